#pragma once

#include "ncood/dataset_model.hpp"
#include "ncood/tensor_store.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace ncood {

struct BlobsSpec {
    int classes = 4;
    int input_dim = 16;
    int n_per_class = 50;
    double center_spread = 10.0;
    double noise_sigma = 1.0;
    std::uint64_t seed = 7;
};

struct BlobsDataset {
    Matrix inputs;         // N x D_in
    Labels labels;         // length N
    Matrix class_centers;  // C x D_in

    Eigen::Index num_classes() const { return class_centers.rows(); }
};

/// Gaussian blobs around seeded centers at pairwise distance >= center_spread.
BlobsDataset make_blobs(int classes, int input_dim, int n_per_class, double center_spread, double noise_sigma,
                        std::uint64_t seed);
BlobsDataset make_blobs(const BlobsSpec& spec);

enum class Activation { relu, tanh };

Activation parse_activation(const std::string& name);
const char* activation_name(Activation a);

struct MlpConfig {
    std::vector<int> layer_widths = {16, 64, 32};  // input, hidden..., penultimate
    Activation activation = Activation::tanh;
    int epochs = 600;
    std::vector<std::pair<int, double>> lr_schedule = {{0, 0.5}};  // (first epoch, rate)
    double weight_decay = 5e-3;
    int batch_size = 0;  // 0 = full batch
    std::uint64_t seed = 7;

    void validate() const;
    double learning_rate(int epoch) const;
};

struct DenseLayer {
    Matrix weight;  // out x in
    Vector bias;    // out
};

class Mlp {
public:
    /// Glorot-uniform weights, zero biases.
    Mlp(const MlpConfig& cfg, int num_classes);

    Matrix penultimate(const Matrix& inputs) const;
    Matrix logits(const Matrix& inputs) const;
    ClassifierHead classifier_head() const;

    std::vector<DenseLayer>& layers() { return layers_; }
    const std::vector<DenseLayer>& layers() const { return layers_; }
    Activation activation() const { return activation_; }

    std::size_t parameter_count() const;
    double& parameter(std::size_t index);
    double parameter(std::size_t index) const;

    /// Per-layer tensors plus the head as weights/bias.
    TensorMap to_tensors() const;

private:
    std::vector<DenseLayer> layers_;  // hidden layers, then the linear head
    Activation activation_;
};

/// Mean cross-entropy plus (weight_decay / 2) * sum of squared weights (biases excluded).
double mlp_loss(const Mlp& model, const Matrix& inputs, const Labels& labels, double weight_decay);

/// Analytic gradient of mlp_loss, laid out like the model's layers.
std::vector<DenseLayer> mlp_gradient(const Mlp& model, const Matrix& inputs, const Labels& labels,
                                     double weight_decay, double* loss_out = nullptr);

struct NcReport {
    double nc1 = 0.0;              // trace(Sigma_W) / trace(Sigma_B)
    double nc2_norm_spread = 0.0;  // coefficient of variation of ||mu_c - mu_G||
    double nc2_angle_gap = 0.0;    // max |cos(mu_c - mu_G, mu_c' - mu_G) + 1/(C-1)| over c != c'
    double nc3_duality_gap = 0.0;  // mean_c || w_c/||w_c|| - (mu_c - mu_G)/||mu_c - mu_G|| ||
    double nc4_agreement = 0.0;    // fraction where argmax logits == nearest class mean
    double theorem1_alignment = 0.0;  // mean cos(h - mu_G, w_label)
};

NcReport nc_metrics(const Matrix& features, const Labels& labels, const ClassifierHead& head);

struct EpochRecord {
    int epoch = 0;
    double train_loss = 0.0;
    double train_accuracy = 0.0;
    NcReport nc;
};

struct TrainTrace {
    std::vector<EpochRecord> records;
};

struct TrainResult {
    Mlp model;
    TrainTrace trace;
};

/// Each record describes the parameters at the start of its epoch, before
/// that epoch's updates. Throws NumericalError on a non-finite loss.
TrainResult train_mlp(const MlpConfig& cfg, const BlobsDataset& data);

/// Central difference (f(x + h) - f(x - h)) / 2h.
double central_difference(const std::function<double(double)>& f, double x, double step);

/// |a - f| / max(|a|, |f|, kGradCheckFloor)
double relative_error(double analytic, double numeric);
inline constexpr double kGradCheckFloor = 1e-6;

/// Max relative error between analytic and central-difference gradients at
/// probe_count distinct parameters drawn with the given seed.
double grad_check(const Mlp& model, const Matrix& inputs, const Labels& labels, double weight_decay,
                  int probe_count, double fd_step, std::uint64_t seed);

/// Trains per cfg, then checks the gradient of the trained network.
double grad_check(const MlpConfig& cfg, const BlobsDataset& data, int probe_count, double fd_step);

void write_trace_csv(std::ostream& out, const TrainTrace& trace);
TrainTrace read_trace_csv(std::istream& in);

inline constexpr const char* kTraceHeader =
    "epoch,train_loss,train_accuracy,nc1,nc2_norm_spread,nc2_angle_gap,nc3_duality_gap,nc4_agreement,"
    "theorem1_alignment";

}  // namespace ncood
