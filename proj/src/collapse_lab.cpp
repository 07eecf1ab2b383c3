#include "ncood/collapse_lab.hpp"

#include "ncood/error.hpp"
#include "ncood/format.hpp"
#include "ncood/rng.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>

namespace ncood {

namespace {

constexpr int kCenterRetries = 1000;
constexpr std::uint64_t kCenterStream = 11;
constexpr std::uint64_t kNoiseStream = 12;
constexpr std::uint64_t kInitStream = 13;
constexpr std::uint64_t kBatchStream = 14;
constexpr std::uint64_t kProbeStream = 15;

Matrix activate(const Matrix& z, Activation a) {
    switch (a) {
        case Activation::relu: return z.cwiseMax(0.0);
        case Activation::tanh: return z.array().tanh().matrix();
    }
    return z;
}

// Derivative expressed through the pre-activation z and output y.
Matrix activation_grad(const Matrix& z, const Matrix& y, Activation a) {
    switch (a) {
        case Activation::relu: return (z.array() > 0.0).cast<double>().matrix();
        case Activation::tanh: return (1.0 - y.array().square()).matrix();
    }
    return Matrix::Ones(z.rows(), z.cols());
}

Matrix affine(const Matrix& x, const DenseLayer& layer) {
    Matrix z = x * layer.weight.transpose();
    z.rowwise() += layer.bias.transpose();
    return z;
}

void check_labels(const Matrix& inputs, const Labels& labels, Eigen::Index classes) {
    if (static_cast<Eigen::Index>(labels.size()) != inputs.rows()) {
        throw ContractError("label count does not match input rows");
    }
    for (auto c : labels) {
        if (c < 0 || c >= classes) throw ContractError("label " + std::to_string(c) + " out of range");
    }
}

// Row-wise softmax with max subtraction; also returns mean cross-entropy.
Matrix softmax_rows(const Matrix& logits, const Labels& labels, double& ce) {
    Matrix p(logits.rows(), logits.cols());
    ce = 0.0;
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        const double m = logits.row(i).maxCoeff();
        p.row(i) = (logits.row(i).array() - m).exp().matrix();
        const double s = p.row(i).sum();
        p.row(i) /= s;
        ce += std::log(s) + m - logits(i, labels[static_cast<std::size_t>(i)]);
    }
    if (logits.rows() > 0) ce /= static_cast<double>(logits.rows());
    return p;
}

double weight_penalty(const Mlp& model, double weight_decay) {
    double sq = 0.0;
    for (const auto& l : model.layers()) sq += l.weight.squaredNorm();
    return 0.5 * weight_decay * sq;
}

}  // namespace

BlobsDataset make_blobs(int classes, int input_dim, int n_per_class, double center_spread, double noise_sigma,
                        std::uint64_t seed) {
    if (classes < 2) throw ContractError("blobs need at least 2 classes");
    if (input_dim < 1) throw ContractError("blobs need a positive input dimension");
    if (n_per_class < 0) throw ContractError("samples per class must be non-negative");
    if (!(center_spread >= 0.0) || !(noise_sigma >= 0.0)) {
        throw ContractError("center spread and noise sigma must be non-negative");
    }

    BlobsDataset data;
    data.class_centers.resize(classes, input_dim);
    Rng centers(derive_seed(seed, kCenterStream));
    // Centers ~ N(0, s^2 I) with s chosen so a typical center has norm ~ spread.
    const double s = std::max(center_spread, 1.0) / std::sqrt(static_cast<double>(input_dim));
    for (int c = 0; c < classes; ++c) {
        bool placed = false;
        for (int attempt = 0; attempt < kCenterRetries && !placed; ++attempt) {
            for (int j = 0; j < input_dim; ++j) data.class_centers(c, j) = s * centers.normal();
            placed = true;
            for (int other = 0; other < c; ++other) {
                if ((data.class_centers.row(c) - data.class_centers.row(other)).norm() < center_spread) {
                    placed = false;
                    break;
                }
            }
        }
        if (!placed) {
            throw GenerationError("could not place blob center " + std::to_string(c) + " at distance >= " +
                                  std::to_string(center_spread) + " after " + std::to_string(kCenterRetries) +
                                  " tries; use a larger input dimension or a smaller spread");
        }
    }

    Rng noise(derive_seed(seed, kNoiseStream));
    const Eigen::Index n = static_cast<Eigen::Index>(classes) * n_per_class;
    data.inputs.resize(n, input_dim);
    data.labels.resize(static_cast<std::size_t>(n));
    Eigen::Index row = 0;
    for (int c = 0; c < classes; ++c) {
        for (int i = 0; i < n_per_class; ++i, ++row) {
            for (int j = 0; j < input_dim; ++j) {
                data.inputs(row, j) = data.class_centers(c, j) + noise_sigma * noise.normal();
            }
            data.labels[static_cast<std::size_t>(row)] = c;
        }
    }
    return data;
}

BlobsDataset make_blobs(const BlobsSpec& spec) {
    return make_blobs(spec.classes, spec.input_dim, spec.n_per_class, spec.center_spread, spec.noise_sigma, spec.seed);
}

Activation parse_activation(const std::string& name) {
    if (name == "relu") return Activation::relu;
    if (name == "tanh") return Activation::tanh;
    throw ContractError("unknown activation \"" + name + "\" (expected relu or tanh)");
}

const char* activation_name(Activation a) { return a == Activation::relu ? "relu" : "tanh"; }

void MlpConfig::validate() const {
    if (layer_widths.size() < 2) {
        throw ContractError("layer widths need an input width and at least one hidden width");
    }
    for (int w : layer_widths) {
        if (w < 1) throw ContractError("layer widths must be positive");
    }
    if (epochs < 0) throw ContractError("epochs must be non-negative");
    if (lr_schedule.empty() || lr_schedule.front().first != 0) {
        throw ContractError("learning-rate schedule must start at epoch 0");
    }
    for (std::size_t i = 0; i < lr_schedule.size(); ++i) {
        if (!(lr_schedule[i].second >= 0.0)) throw ContractError("learning rates must be non-negative");
        if (i > 0 && lr_schedule[i].first <= lr_schedule[i - 1].first) {
            throw ContractError("learning-rate schedule epochs must increase");
        }
    }
    if (!(weight_decay >= 0.0)) throw ContractError("weight decay must be non-negative");
    if (batch_size < 0) throw ContractError("batch size must be non-negative");
}

double MlpConfig::learning_rate(int epoch) const {
    double rate = lr_schedule.front().second;
    for (const auto& [start, r] : lr_schedule) {
        if (epoch >= start) rate = r;
    }
    return rate;
}

Mlp::Mlp(const MlpConfig& cfg, int num_classes) : activation_(cfg.activation) {
    cfg.validate();
    if (num_classes < 2) throw ContractError("MLP head needs at least 2 classes");
    Rng rng(derive_seed(cfg.seed, kInitStream));
    auto make = [&](int in, int out) {
        const double bound = std::sqrt(6.0 / static_cast<double>(in + out));
        DenseLayer l{Matrix(out, in), Vector::Zero(out)};
        for (Eigen::Index i = 0; i < l.weight.size(); ++i) l.weight.data()[i] = rng.uniform(-bound, bound);
        return l;
    };
    for (std::size_t i = 0; i + 1 < cfg.layer_widths.size(); ++i) {
        layers_.push_back(make(cfg.layer_widths[i], cfg.layer_widths[i + 1]));
    }
    layers_.push_back(make(cfg.layer_widths.back(), num_classes));
}

Matrix Mlp::penultimate(const Matrix& inputs) const {
    if (inputs.cols() != layers_.front().weight.cols()) {
        throw ContractError("input width " + std::to_string(inputs.cols()) + " does not match MLP input width " +
                            std::to_string(layers_.front().weight.cols()));
    }
    Matrix a = inputs;
    for (std::size_t l = 0; l + 1 < layers_.size(); ++l) a = activate(affine(a, layers_[l]), activation_);
    return a;
}

Matrix Mlp::logits(const Matrix& inputs) const { return affine(penultimate(inputs), layers_.back()); }

ClassifierHead Mlp::classifier_head() const { return ClassifierHead(layers_.back().weight, layers_.back().bias); }

std::size_t Mlp::parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers_) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
    return n;
}

double& Mlp::parameter(std::size_t index) {
    for (auto& l : layers_) {
        const auto nw = static_cast<std::size_t>(l.weight.size());
        if (index < nw) return l.weight.data()[index];
        index -= nw;
        const auto nb = static_cast<std::size_t>(l.bias.size());
        if (index < nb) return l.bias.data()[index];
        index -= nb;
    }
    throw ContractError("parameter index out of range");
}

double Mlp::parameter(std::size_t index) const { return const_cast<Mlp*>(this)->parameter(index); }

TensorMap Mlp::to_tensors() const {
    TensorMap t;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        const auto prefix = "layer" + std::to_string(l);
        t.emplace(prefix + ".weight", Tensor::from_matrix(layers_[l].weight));
        t.emplace(prefix + ".bias", Tensor::from_vector(layers_[l].bias));
    }
    t.emplace("weights", Tensor::from_matrix(layers_.back().weight));
    t.emplace("bias", Tensor::from_vector(layers_.back().bias));
    return t;
}

std::vector<DenseLayer> mlp_gradient(const Mlp& model, const Matrix& inputs, const Labels& labels,
                                     double weight_decay, double* loss_out) {
    const auto& layers = model.layers();
    check_labels(inputs, labels, layers.back().weight.rows());
    const auto n = inputs.rows();

    std::vector<Matrix> pre;   // pre-activations of the hidden layers
    std::vector<Matrix> post;  // post[0] = inputs, post[l + 1] = act(pre[l])
    post.push_back(inputs);
    for (std::size_t l = 0; l + 1 < layers.size(); ++l) {
        pre.push_back(affine(post.back(), layers[l]));
        post.push_back(activate(pre.back(), model.activation()));
    }
    const Matrix logits = affine(post.back(), layers.back());
    double ce = 0.0;
    Matrix delta = softmax_rows(logits, labels, ce);
    for (Eigen::Index i = 0; i < n; ++i) delta(i, labels[static_cast<std::size_t>(i)]) -= 1.0;
    if (n > 0) delta /= static_cast<double>(n);
    if (loss_out) *loss_out = ce + weight_penalty(model, weight_decay);

    std::vector<DenseLayer> grads(layers.size());
    for (std::size_t l = layers.size(); l-- > 0;) {
        grads[l].weight = delta.transpose() * post[l] + weight_decay * layers[l].weight;
        grads[l].bias = delta.colwise().sum().transpose();
        if (l > 0) {
            delta = (delta * layers[l].weight).cwiseProduct(activation_grad(pre[l - 1], post[l], model.activation()));
        }
    }
    return grads;
}

double mlp_loss(const Mlp& model, const Matrix& inputs, const Labels& labels, double weight_decay) {
    check_labels(inputs, labels, model.layers().back().weight.rows());
    double ce = 0.0;
    softmax_rows(model.logits(inputs), labels, ce);
    return ce + weight_penalty(model, weight_decay);
}

NcReport nc_metrics(const Matrix& features, const Labels& labels, const ClassifierHead& head) {
    FeatureSet fs{features, labels, "nc_metrics"};
    TrainStats stats;
    try {
        stats = compute_train_stats(fs, head);
    } catch (const FitError& e) {
        throw ContractError(e.what());
    }
    const auto c_count = head.num_classes();
    const double cm1 = static_cast<double>(c_count - 1);
    const Matrix centered_means = stats.class_means.rowwise() - stats.mu_G.transpose();
    const Vector mean_norms = centered_means.rowwise().norm();

    NcReport r;
    const double trace_w = stats.sigma_W.trace();
    const double trace_b = centered_means.squaredNorm() / static_cast<double>(c_count);
    if (trace_b > 0.0) {
        r.nc1 = trace_w / trace_b;
    } else {
        r.nc1 = trace_w == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    }

    const double norm_mean = mean_norms.mean();
    const double norm_var = (mean_norms.array() - norm_mean).square().mean();
    r.nc2_norm_spread = norm_mean > 0.0 ? std::sqrt(norm_var) / norm_mean : 0.0;

    auto unit = [](const Vector& v) -> Vector {
        const double n = v.norm();
        return n > 0.0 ? Vector(v / n) : Vector::Zero(v.size());
    };
    double gap = 0.0;
    for (Eigen::Index a = 0; a < c_count; ++a) {
        for (Eigen::Index b = a + 1; b < c_count; ++b) {
            const double cos = unit(centered_means.row(a).transpose()).dot(unit(centered_means.row(b).transpose()));
            gap = std::max(gap, std::abs(cos + 1.0 / cm1));
        }
    }
    r.nc2_angle_gap = gap;

    double duality = 0.0;
    for (Eigen::Index c = 0; c < c_count; ++c) {
        duality += (unit(head.weights().row(c).transpose()) - unit(centered_means.row(c).transpose())).norm();
    }
    r.nc3_duality_gap = duality / static_cast<double>(c_count);

    const Labels predicted = predict_classes(head, features);
    std::size_t agree = 0;
    double alignment = 0.0;
    for (Eigen::Index i = 0; i < features.rows(); ++i) {
        Eigen::Index nearest = 0;
        double best = std::numeric_limits<double>::infinity();
        for (Eigen::Index c = 0; c < c_count; ++c) {
            const double d2 = (features.row(i) - stats.class_means.row(c)).squaredNorm();
            if (d2 < best) {
                best = d2;
                nearest = c;
            }
        }
        if (predicted[static_cast<std::size_t>(i)] == nearest) ++agree;
        const Vector g = features.row(i).transpose() - stats.mu_G;
        const auto label = labels[static_cast<std::size_t>(i)];
        const double gn = g.norm();
        if (gn > 0.0) alignment += g.dot(head.weights().row(label).transpose()) / (gn * head.weights().row(label).norm());
    }
    const auto n = static_cast<double>(features.rows());
    r.nc4_agreement = features.rows() > 0 ? static_cast<double>(agree) / n : 0.0;
    r.theorem1_alignment = features.rows() > 0 ? alignment / n : 0.0;
    return r;
}

TrainResult train_mlp(const MlpConfig& cfg, const BlobsDataset& data) {
    cfg.validate();
    if (cfg.layer_widths.front() != data.inputs.cols()) {
        throw ContractError("MLP input width " + std::to_string(cfg.layer_widths.front()) +
                            " does not match data width " + std::to_string(data.inputs.cols()));
    }
    const auto classes = static_cast<int>(data.num_classes());
    check_labels(data.inputs, data.labels, classes);
    TrainResult result{Mlp(cfg, classes), {}};
    Mlp& model = result.model;
    const auto n = data.inputs.rows();
    const Eigen::Index batch = cfg.batch_size == 0 ? n : std::min<Eigen::Index>(cfg.batch_size, n);

    Rng batch_rng(derive_seed(cfg.seed, kBatchStream));
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});

    auto step = [&](const std::vector<DenseLayer>& grads, double lr) {
        for (std::size_t l = 0; l < grads.size(); ++l) {
            model.layers()[l].weight -= lr * grads[l].weight;
            model.layers()[l].bias -= lr * grads[l].bias;
        }
    };

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const double lr = cfg.learning_rate(epoch);
        EpochRecord rec;
        rec.epoch = epoch;
        std::vector<DenseLayer> full_grads = mlp_gradient(model, data.inputs, data.labels, cfg.weight_decay, &rec.train_loss);
        if (!std::isfinite(rec.train_loss)) {
            throw NumericalError("training diverged: non-finite loss at epoch " + std::to_string(epoch));
        }
        const Matrix features = model.penultimate(data.inputs);
        const ClassifierHead head = model.classifier_head();
        const Labels predicted = predict_classes(head, features);
        std::size_t correct = 0;
        for (std::size_t i = 0; i < predicted.size(); ++i) correct += predicted[i] == data.labels[i];
        rec.train_accuracy = n > 0 ? static_cast<double>(correct) / static_cast<double>(n) : 0.0;
        rec.nc = nc_metrics(features, data.labels, head);
        result.trace.records.push_back(rec);

        if (batch == n) {
            step(full_grads, lr);
            continue;
        }
        // Fisher-Yates with the portable generator.
        for (std::size_t i = order.size(); i > 1; --i) {
            std::swap(order[i - 1], order[static_cast<std::size_t>(batch_rng.below(i))]);
        }
        for (Eigen::Index start = 0; start < n; start += batch) {
            const auto len = std::min(batch, n - start);
            Matrix xb(len, data.inputs.cols());
            Labels yb(static_cast<std::size_t>(len));
            for (Eigen::Index k = 0; k < len; ++k) {
                const auto src = order[static_cast<std::size_t>(start + k)];
                xb.row(k) = data.inputs.row(src);
                yb[static_cast<std::size_t>(k)] = data.labels[static_cast<std::size_t>(src)];
            }
            step(mlp_gradient(model, xb, yb, cfg.weight_decay), lr);
        }
    }
    return result;
}

double central_difference(const std::function<double(double)>& f, double x, double step) {
    return (f(x + step) - f(x - step)) / (2.0 * step);
}

double relative_error(double analytic, double numeric) {
    const double denom = std::max({std::abs(analytic), std::abs(numeric), kGradCheckFloor});
    return std::abs(analytic - numeric) / denom;
}

double grad_check(const Mlp& model, const Matrix& inputs, const Labels& labels, double weight_decay,
                  int probe_count, double fd_step, std::uint64_t seed) {
    if (probe_count <= 0) return 0.0;
    if (!(fd_step > 0.0)) throw ContractError("finite-difference step must be positive");
    const auto grads = mlp_gradient(model, inputs, labels, weight_decay);
    std::vector<double> flat;
    for (const auto& g : grads) {
        flat.insert(flat.end(), g.weight.data(), g.weight.data() + g.weight.size());
        flat.insert(flat.end(), g.bias.data(), g.bias.data() + g.bias.size());
    }
    const std::size_t total = flat.size();
    const auto probes = std::min<std::size_t>(static_cast<std::size_t>(probe_count), total);

    // Partial Fisher-Yates: the first `probes` entries are distinct parameters.
    std::vector<std::size_t> index(total);
    std::iota(index.begin(), index.end(), std::size_t{0});
    Rng rng(derive_seed(seed, kProbeStream));
    for (std::size_t i = 0; i < probes; ++i) {
        std::swap(index[i], index[i + static_cast<std::size_t>(rng.below(total - i))]);
    }

    Mlp probe = model;
    double worst = 0.0;
    for (std::size_t i = 0; i < probes; ++i) {
        const auto p = index[i];
        const double original = probe.parameter(p);
        const double numeric = central_difference(
            [&](double v) {
                probe.parameter(p) = v;
                return mlp_loss(probe, inputs, labels, weight_decay);
            },
            original, fd_step);
        probe.parameter(p) = original;
        worst = std::max(worst, relative_error(flat[p], numeric));
    }
    return worst;
}

double grad_check(const MlpConfig& cfg, const BlobsDataset& data, int probe_count, double fd_step) {
    const TrainResult trained = train_mlp(cfg, data);
    return grad_check(trained.model, data.inputs, data.labels, cfg.weight_decay, probe_count, fd_step, cfg.seed);
}

void write_trace_csv(std::ostream& out, const TrainTrace& trace) {
    out << kTraceHeader << '\n';
    for (const auto& r : trace.records) {
        out << r.epoch;
        for (double v : {r.train_loss, r.train_accuracy, r.nc.nc1, r.nc.nc2_norm_spread, r.nc.nc2_angle_gap,
                         r.nc.nc3_duality_gap, r.nc.nc4_agreement, r.nc.theorem1_alignment}) {
            out << ',' << format_double(v);
        }
        out << '\n';
    }
}

TrainTrace read_trace_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw FormatError("trace CSV is empty");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kTraceHeader) throw FormatError("trace CSV header mismatch");
    TrainTrace trace;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<double> v;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            char* end = nullptr;
            const double x = std::strtod(cell.c_str(), &end);
            if (cell.empty() || end != cell.c_str() + cell.size()) {
                throw FormatError("trace CSV line " + std::to_string(lineno) + ": bad number \"" + cell + "\"");
            }
            v.push_back(x);
        }
        if (v.size() != 9) {
            throw FormatError("trace CSV line " + std::to_string(lineno) + ": expected 9 columns");
        }
        EpochRecord r;
        r.epoch = static_cast<int>(v[0]);
        r.train_loss = v[1];
        r.train_accuracy = v[2];
        r.nc = NcReport{v[3], v[4], v[5], v[6], v[7], v[8]};
        trace.records.push_back(r);
    }
    return trace;
}

}  // namespace ncood
