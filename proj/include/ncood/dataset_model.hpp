#pragma once

#include "ncood/linalg.hpp"
#include "ncood/tensor_store.hpp"

#include <optional>
#include <string>

namespace ncood {

/// N x D penultimate-layer activations, optionally labelled.
struct FeatureSet {
    Matrix features;
    std::optional<Labels> labels;
    std::string name;

    Eigen::Index size() const { return features.rows(); }
    Eigen::Index dim() const { return features.cols(); }
};

/// Linear classification head: logits = W h + b.
class ClassifierHead {
public:
    /// Requires C >= 2, bias length C, and no all-zero weight row.
    ClassifierHead(Matrix weights, Vector bias);

    const Matrix& weights() const { return weights_; }
    const Vector& bias() const { return bias_; }
    Eigen::Index num_classes() const { return weights_.rows(); }
    Eigen::Index dim() const { return weights_.cols(); }

private:
    Matrix weights_;
    Vector bias_;
};

/// Everything fit on the training features.
struct TrainStats {
    Vector mu_G;                            // global feature mean
    Matrix class_means;                     // C x D
    std::vector<std::int64_t> class_counts; // length C
    Matrix sigma_W;                         // within-class covariance, 1/N normalized
    Vector lambda_c;                        // ||mu_c - mu_G|| / ||w_c||
    Vector mean_feature;                    // column mean of the training features

    Eigen::Index num_classes() const { return class_means.rows(); }
    Eigen::Index dim() const { return mu_G.size(); }
};

TrainStats compute_train_stats(const FeatureSet& train, const ClassifierHead& head);

Matrix compute_logits(const ClassifierHead& head, const Matrix& features);

/// Argmax over logits; ties go to the lowest class index.
Labels predict_classes(const ClassifierHead& head, const Matrix& features);
Labels argmax_rows(const Matrix& logits);

/// Throws ContractError naming both widths when they differ.
void require_width(const ClassifierHead& head, const Matrix& features);

// Bundle conversions. Features and labels come from the "features"/"labels"
// roles, the head from "weights"/"bias", statistics from tensor.* roles.

FeatureSet feature_set_from_bundle(const Bundle& bundle);
ClassifierHead head_from_bundle(const Bundle& bundle);
TrainStats stats_from_bundle(const Bundle& bundle);

TensorMap feature_set_tensors(const FeatureSet& fs, DType dtype = DType::f32);
TensorMap head_tensors(const ClassifierHead& head, DType dtype = DType::f32);
TensorMap stats_tensors(const TrainStats& stats);

}  // namespace ncood
