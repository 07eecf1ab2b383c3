#include "ncood/dataset_model.hpp"

#include "ncood/error.hpp"

namespace ncood {

ClassifierHead::ClassifierHead(Matrix weights, Vector bias) : weights_(std::move(weights)), bias_(std::move(bias)) {
    if (weights_.rows() < 2) {
        throw ContractError("classifier head needs at least 2 classes, got " + std::to_string(weights_.rows()));
    }
    if (weights_.cols() < 1) {
        throw ContractError("classifier head has zero feature width");
    }
    if (bias_.size() != weights_.rows()) {
        throw ContractError("bias length " + std::to_string(bias_.size()) + " does not match class count " +
                            std::to_string(weights_.rows()));
    }
    for (Eigen::Index c = 0; c < weights_.rows(); ++c) {
        if (weights_.row(c).squaredNorm() == 0.0) {
            throw ContractError("weight row for class " + std::to_string(c) + " is all zero");
        }
    }
}

void require_width(const ClassifierHead& head, const Matrix& features) {
    if (features.cols() != head.dim()) {
        throw ContractError("feature width " + std::to_string(features.cols()) + " does not match head width " +
                            std::to_string(head.dim()));
    }
}

TrainStats compute_train_stats(const FeatureSet& train, const ClassifierHead& head) {
    if (!train.labels) {
        throw ContractError("training features \"" + train.name + "\" have no labels");
    }
    require_width(head, train.features);
    const auto& labels = *train.labels;
    const Eigen::Index n = train.size();
    const Eigen::Index d = train.dim();
    const Eigen::Index c_count = head.num_classes();
    if (static_cast<Eigen::Index>(labels.size()) != n) {
        throw ConsistencyError("labels length does not match feature rows");
    }

    TrainStats s;
    s.class_means = Matrix::Zero(c_count, d);
    s.class_counts.assign(static_cast<std::size_t>(c_count), 0);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto c = labels[static_cast<std::size_t>(i)];
        if (c < 0 || c >= c_count) {
            throw ContractError("label " + std::to_string(c) + " at row " + std::to_string(i) + " outside [0, " +
                                std::to_string(c_count) + ")");
        }
        s.class_means.row(c) += train.features.row(i);
        ++s.class_counts[static_cast<std::size_t>(c)];
    }
    for (Eigen::Index c = 0; c < c_count; ++c) {
        const auto count = s.class_counts[static_cast<std::size_t>(c)];
        if (count == 0) {
            throw FitError("class " + std::to_string(c) + " has no training samples");
        }
        s.class_means.row(c) /= static_cast<double>(count);
    }

    s.mean_feature = train.features.colwise().mean().transpose();
    s.mu_G = s.mean_feature;

    Matrix centered(n, d);
    for (Eigen::Index i = 0; i < n; ++i) {
        centered.row(i) = train.features.row(i) - s.class_means.row(labels[static_cast<std::size_t>(i)]);
    }
    s.sigma_W = (centered.transpose() * centered) / static_cast<double>(n);
    s.sigma_W = 0.5 * (s.sigma_W + s.sigma_W.transpose()).eval();

    s.lambda_c.resize(c_count);
    for (Eigen::Index c = 0; c < c_count; ++c) {
        const double wn = head.weights().row(c).norm();
        if (wn == 0.0) throw FitError("weight row for class " + std::to_string(c) + " has zero norm");
        s.lambda_c[c] = (s.class_means.row(c).transpose() - s.mu_G).norm() / wn;
    }
    return s;
}

Matrix compute_logits(const ClassifierHead& head, const Matrix& features) {
    require_width(head, features);
    Matrix logits = features * head.weights().transpose();
    logits.rowwise() += head.bias().transpose();
    return logits;
}

Labels argmax_rows(const Matrix& logits) {
    Labels out(static_cast<std::size_t>(logits.rows()));
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        Eigen::Index best = 0;
        for (Eigen::Index c = 1; c < logits.cols(); ++c) {
            if (logits(i, c) > logits(i, best)) best = c;
        }
        out[static_cast<std::size_t>(i)] = best;
    }
    return out;
}

Labels predict_classes(const ClassifierHead& head, const Matrix& features) {
    return argmax_rows(compute_logits(head, features));
}

FeatureSet feature_set_from_bundle(const Bundle& bundle) {
    FeatureSet fs;
    fs.name = bundle.manifest.dataset_name;
    fs.features = bundle.at("features").to_matrix();
    if (bundle.has("labels")) fs.labels = bundle.at("labels").to_labels();
    return fs;
}

ClassifierHead head_from_bundle(const Bundle& bundle) {
    Matrix w = bundle.at("weights").to_matrix();
    Vector b = bundle.has("bias") ? bundle.at("bias").to_vector() : Vector::Zero(w.rows());
    return ClassifierHead(std::move(w), std::move(b));
}

TrainStats stats_from_bundle(const Bundle& bundle) {
    TrainStats s;
    s.mu_G = bundle.at("mu_G").to_vector();
    s.class_means = bundle.at("class_means").to_matrix();
    s.class_counts = bundle.at("class_counts").to_labels();
    s.sigma_W = bundle.at("sigma_W").to_matrix();
    s.lambda_c = bundle.at("lambda_c").to_vector();
    s.mean_feature = bundle.at("mean_feature").to_vector();
    const auto c = s.class_means.rows();
    const auto d = s.mu_G.size();
    if (s.class_means.cols() != d || s.sigma_W.rows() != d || s.sigma_W.cols() != d || s.lambda_c.size() != c ||
        static_cast<Eigen::Index>(s.class_counts.size()) != c || s.mean_feature.size() != d) {
        throw ConsistencyError("statistics bundle tensors have inconsistent shapes");
    }
    return s;
}

TensorMap feature_set_tensors(const FeatureSet& fs, DType dtype) {
    TensorMap t;
    t.emplace("features", Tensor::from_matrix(fs.features, dtype));
    if (fs.labels) t.emplace("labels", Tensor::from_labels(*fs.labels));
    return t;
}

TensorMap head_tensors(const ClassifierHead& head, DType dtype) {
    TensorMap t;
    t.emplace("weights", Tensor::from_matrix(head.weights(), dtype));
    t.emplace("bias", Tensor::from_vector(head.bias(), dtype));
    return t;
}

TensorMap stats_tensors(const TrainStats& stats) {
    TensorMap t;
    t.emplace("mu_G", Tensor::from_vector(stats.mu_G));
    t.emplace("class_means", Tensor::from_matrix(stats.class_means));
    t.emplace("class_counts", Tensor::from_labels(stats.class_counts));
    t.emplace("sigma_W", Tensor::from_matrix(stats.sigma_W));
    t.emplace("lambda_c", Tensor::from_vector(stats.lambda_c));
    t.emplace("mean_feature", Tensor::from_vector(stats.mean_feature));
    return t;
}

}  // namespace ncood
