#include "ncood/nc_scores.hpp"

#include "ncood/error.hpp"

#include <cmath>

namespace ncood {

namespace {

void require_stats(const TrainStats& stats, const ClassifierHead& head) {
    if (stats.mu_G.size() != head.dim()) {
        throw ContractError("statistics width " + std::to_string(stats.mu_G.size()) + " does not match head width " +
                            std::to_string(head.dim()));
    }
    if (stats.lambda_c.size() != head.num_classes()) {
        throw ContractError("statistics class count " + std::to_string(stats.lambda_c.size()) +
                            " does not match head class count " + std::to_string(head.num_classes()));
    }
}

// Calls fn(i, g, c) with the centered row g = h_i - mu_G and predicted class c.
template <typename Fn>
Vector score_rows(const Matrix& features, const TrainStats& stats, const ClassifierHead& head, Fn fn) {
    require_stats(stats, head);
    const Labels predicted = predict_classes(head, features);
    Vector out(features.rows());
    for (Eigen::Index i = 0; i < features.rows(); ++i) {
        const Vector g = features.row(i).transpose() - stats.mu_G;
        out[i] = fn(g, predicted[static_cast<std::size_t>(i)]);
    }
    return out;
}

}  // namespace

FilterNorm parse_filter_norm(const std::string& name) {
    if (name == "L1" || name == "l1") return FilterNorm::L1;
    if (name == "L2" || name == "l2") return FilterNorm::L2;
    if (name == "Linf" || name == "linf" || name == "LINF") return FilterNorm::Linf;
    throw ContractError("unknown filter norm \"" + name + "\" (expected L1, L2 or Linf)");
}

const char* filter_norm_name(FilterNorm norm) {
    switch (norm) {
        case FilterNorm::L1: return "L1";
        case FilterNorm::L2: return "L2";
        case FilterNorm::Linf: return "Linf";
    }
    return "?";
}

void NcScoreConfig::validate() const {
    if (!(alpha >= 0.0) || !std::isfinite(alpha)) {
        throw ContractError("alpha must be a finite non-negative number");
    }
    if (!(epsilon > 0.0)) {
        throw ContractError("epsilon must be positive");
    }
}

Vector feature_norms(const Matrix& features, FilterNorm norm) {
    switch (norm) {
        case FilterNorm::L1: return features.rowwise().lpNorm<1>();
        case FilterNorm::L2: return features.rowwise().norm();
        case FilterNorm::Linf: return features.rowwise().lpNorm<Eigen::Infinity>();
    }
    throw ContractError("unknown filter norm");
}

Vector p_score(const Matrix& features, const TrainStats& stats, const ClassifierHead& head, double epsilon) {
    const auto& w = head.weights();
    return score_rows(features, stats, head, [&](const Vector& g, std::int64_t c) {
        const double gn = g.norm();
        if (gn < epsilon) return 0.0;
        return g.dot(w.row(c).transpose()) / gn;
    });
}

Vector nc_score(const Matrix& features, const TrainStats& stats, const ClassifierHead& head,
                const NcScoreConfig& cfg) {
    cfg.validate();
    Vector score = p_score(features, stats, head, cfg.epsilon);
    if (cfg.alpha != 0.0) score += cfg.alpha * feature_norms(features, cfg.filter_norm);
    return score;
}

Vector cos_score(const Matrix& features, const TrainStats& stats, const ClassifierHead& head, double epsilon) {
    const auto& w = head.weights();
    return score_rows(features, stats, head, [&](const Vector& g, std::int64_t c) {
        const double gn = g.norm();
        if (gn < epsilon) return 0.0;
        return g.dot(w.row(c).transpose()) / (gn * w.row(c).norm());
    });
}

Vector dist_score(const Matrix& features, const TrainStats& stats, const ClassifierHead& head) {
    const auto& w = head.weights();
    return score_rows(features, stats, head, [&](const Vector& g, std::int64_t c) {
        return -(g - stats.lambda_c[c] * w.row(c).transpose()).norm();
    });
}

}  // namespace ncood
