#include "ncood/baselines.hpp"

#include "ncood/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace ncood {

namespace {

void require_finite_logits(const Matrix& logits) {
    if (logits.cols() < 2) {
        throw ContractError("logit scores need at least 2 classes, got " + std::to_string(logits.cols()));
    }
    if (!logits.allFinite()) {
        throw ContractError("non-finite logit");
    }
}

double logsumexp_row(const Matrix& logits, Eigen::Index i) {
    const double m = logits.row(i).maxCoeff();
    return m + std::log((logits.row(i).array() - m).exp().sum());
}

}  // namespace

Vector msp_score(const Matrix& logits) {
    require_finite_logits(logits);
    Vector out(logits.rows());
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        const double m = logits.row(i).maxCoeff();
        // The max entry contributes exp(0) = 1 to the denominator.
        out[i] = 1.0 / (logits.row(i).array() - m).exp().sum();
    }
    return out;
}

Vector energy_score(const Matrix& logits) {
    require_finite_logits(logits);
    Vector out(logits.rows());
    for (Eigen::Index i = 0; i < logits.rows(); ++i) out[i] = logsumexp_row(logits, i);
    return out;
}

double percentile(std::vector<double> values, double pct) {
    if (values.empty()) throw FitError("percentile of an empty set");
    if (!(pct >= 0.0 && pct <= 100.0)) throw ContractError("percentile must be in [0, 100]");
    std::sort(values.begin(), values.end());
    const double pos = pct / 100.0 * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, values.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return values[lo] + frac * (values[hi] - values[lo]);
}

ReactClip fit_react(const FeatureSet& train, double pct) {
    if (!(pct > 0.0 && pct <= 100.0)) {
        throw ContractError("ReAct percentile must be in (0, 100], got " + std::to_string(pct));
    }
    if (train.features.size() == 0) {
        throw FitError("cannot fit ReAct clip on an empty training set");
    }
    std::vector<double> all(train.features.data(), train.features.data() + train.features.size());
    return ReactClip{percentile(std::move(all), pct), pct};
}

Vector react_score(const Matrix& features, const ClassifierHead& head, const ReactClip& clip) {
    require_width(head, features);
    const Matrix clipped = features.array().min(clip.threshold).matrix();
    return energy_score(compute_logits(head, clipped));
}

DiceMask fit_dice(const TrainStats& stats, const ClassifierHead& head, double sparsity) {
    if (!(sparsity >= 0.0 && sparsity < 100.0)) {
        throw ContractError("Dice sparsity percentile must be in [0, 100), got " + std::to_string(sparsity));
    }
    if (stats.mean_feature.size() != head.dim()) {
        throw ContractError("statistics width does not match head width");
    }
    const auto c_count = head.num_classes();
    const auto d = head.dim();
    const auto drop = std::llround(sparsity / 100.0 * static_cast<double>(d));
    const auto keep = static_cast<std::size_t>(d - drop);

    DiceMask out{decltype(DiceMask::mask)::Constant(c_count, d, false), sparsity};
    std::vector<Eigen::Index> order(static_cast<std::size_t>(d));
    for (Eigen::Index c = 0; c < c_count; ++c) {
        const Vector importance = head.weights().row(c).transpose().cwiseProduct(stats.mean_feature);
        std::iota(order.begin(), order.end(), Eigen::Index{0});
        std::stable_sort(order.begin(), order.end(),
                         [&](Eigen::Index a, Eigen::Index b) { return importance[a] > importance[b]; });
        for (std::size_t j = 0; j < keep; ++j) out.mask(c, order[j]) = true;
    }
    return out;
}

Vector dice_score(const Matrix& features, const ClassifierHead& head, const DiceMask& mask) {
    require_width(head, features);
    if (mask.mask.rows() != head.num_classes() || mask.mask.cols() != head.dim()) {
        throw ContractError("Dice mask shape does not match the head");
    }
    Matrix masked = head.weights();
    for (Eigen::Index c = 0; c < masked.rows(); ++c) {
        for (Eigen::Index j = 0; j < masked.cols(); ++j) {
            if (!mask.mask(c, j)) masked(c, j) = 0.0;
        }
    }
    Matrix logits = features * masked.transpose();
    logits.rowwise() += head.bias().transpose();
    return energy_score(logits);
}

double default_mahalanobis_ridge(const Matrix& covariance) {
    return 1e-6 * covariance.trace() / static_cast<double>(covariance.rows());
}

MahalanobisFit mahalanobis_fit(const Matrix& class_means, const Matrix& covariance, double ridge) {
    if (!(ridge >= 0.0)) throw ContractError("ridge must be non-negative");
    const auto d = covariance.rows();
    if (covariance.cols() != d || class_means.cols() != d) {
        throw ContractError("covariance and class means disagree on width");
    }
    Matrix reg = covariance;
    reg.diagonal().array() += ridge;
    reg = 0.5 * (reg + reg.transpose()).eval();

    Eigen::SelfAdjointEigenSolver<Matrix> eig(reg);
    if (eig.info() != Eigen::Success) throw FitError("eigendecomposition of the tied covariance failed");
    const Vector& values = eig.eigenvalues();
    const double largest = values.cwiseAbs().maxCoeff();
    const double tol = static_cast<double>(d) * std::numeric_limits<double>::epsilon() * largest;
    if (largest == 0.0 || values.minCoeff() <= tol) {
        throw FitError("tied covariance + ridge*I is singular at ridge " + std::to_string(ridge) +
                       "; use a positive ridge");
    }
    const Matrix& v = eig.eigenvectors();
    Matrix precision = v * values.cwiseInverse().asDiagonal() * v.transpose();
    precision = 0.5 * (precision + precision.transpose()).eval();
    return MahalanobisFit{class_means, std::move(precision), covariance, ridge};
}

MahalanobisFit mahalanobis_fit(const FeatureSet& train, double ridge) {
    if (!train.labels) throw ContractError("Mahalanobis fit needs labels");
    const auto& labels = *train.labels;
    if (static_cast<Eigen::Index>(labels.size()) != train.size()) {
        throw ConsistencyError("labels length does not match feature rows");
    }
    if (train.size() == 0) throw FitError("cannot fit Mahalanobis on an empty training set");
    const auto c_count = *std::max_element(labels.begin(), labels.end()) + 1;
    const auto d = train.dim();
    Matrix means = Matrix::Zero(c_count, d);
    std::vector<std::int64_t> counts(static_cast<std::size_t>(c_count), 0);
    for (Eigen::Index i = 0; i < train.size(); ++i) {
        const auto c = labels[static_cast<std::size_t>(i)];
        if (c < 0) throw ContractError("negative label at row " + std::to_string(i));
        means.row(c) += train.features.row(i);
        ++counts[static_cast<std::size_t>(c)];
    }
    for (Eigen::Index c = 0; c < c_count; ++c) {
        if (counts[static_cast<std::size_t>(c)] == 0) {
            throw FitError("class " + std::to_string(c) + " has no training samples");
        }
        means.row(c) /= static_cast<double>(counts[static_cast<std::size_t>(c)]);
    }
    Matrix centered(train.size(), d);
    for (Eigen::Index i = 0; i < train.size(); ++i) {
        centered.row(i) = train.features.row(i) - means.row(labels[static_cast<std::size_t>(i)]);
    }
    const Matrix cov = centered.transpose() * centered / static_cast<double>(train.size());
    return mahalanobis_fit(means, cov, ridge);
}

Vector mahalanobis_score(const Matrix& features, const MahalanobisFit& fit) {
    if (features.cols() != fit.shared_precision.rows()) {
        throw ContractError("feature width " + std::to_string(features.cols()) + " does not match fit width " +
                            std::to_string(fit.shared_precision.rows()));
    }
    Vector out(features.rows());
    for (Eigen::Index i = 0; i < features.rows(); ++i) {
        double best = -std::numeric_limits<double>::infinity();
        for (Eigen::Index c = 0; c < fit.class_means.rows(); ++c) {
            const Vector diff = (features.row(i) - fit.class_means.row(c)).transpose();
            best = std::max(best, -diff.dot(fit.shared_precision * diff));
        }
        out[i] = best;
    }
    return out;
}

Matrix l2_normalize_rows(const Matrix& m) {
    Matrix out = m;
    for (Eigen::Index i = 0; i < out.rows(); ++i) {
        const double n = out.row(i).norm();
        if (n > 0.0) out.row(i) /= n;
    }
    return out;
}

KnnIndex::KnnIndex(const Matrix& train_features, int k) : train_(l2_normalize_rows(train_features)), k_(k) {
    if (k_ < 1) throw ContractError("KNN k must be positive");
    if (k_ > train_.rows()) {
        throw ContractError("KNN k = " + std::to_string(k_) + " exceeds the " + std::to_string(train_.rows()) +
                            " stored training rows");
    }
}

Vector knn_score(const Matrix& features, const KnnIndex& index) {
    const auto& train = index.normalized_train();
    if (index.k() > train.rows()) throw ContractError("KNN k exceeds the stored training rows");
    if (features.cols() != train.cols()) {
        throw ContractError("feature width " + std::to_string(features.cols()) + " does not match index width " +
                            std::to_string(train.cols()));
    }
    const Matrix queries = l2_normalize_rows(features);
    Vector out(queries.rows());
    std::vector<double> dist2(static_cast<std::size_t>(train.rows()));
    const auto kth = static_cast<std::ptrdiff_t>(index.k() - 1);
    for (Eigen::Index i = 0; i < queries.rows(); ++i) {
        for (Eigen::Index j = 0; j < train.rows(); ++j) {
            dist2[static_cast<std::size_t>(j)] = (queries.row(i) - train.row(j)).squaredNorm();
        }
        std::nth_element(dist2.begin(), dist2.begin() + kth, dist2.end());
        out[i] = -std::sqrt(dist2[static_cast<std::size_t>(kth)]);
    }
    return out;
}

}  // namespace ncood
