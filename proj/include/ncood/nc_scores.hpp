#pragma once

#include "ncood/dataset_model.hpp"

#include <string>

namespace ncood {

enum class FilterNorm { L1, L2, Linf };

FilterNorm parse_filter_norm(const std::string& name);
const char* filter_norm_name(FilterNorm norm);

struct NcScoreConfig {
    double alpha = 0.0;
    FilterNorm filter_norm = FilterNorm::L1;
    /// Centered features with L2 norm below this get the orthogonal score 0.
    double epsilon = 1e-12;

    void validate() const;
};

/// Row-wise L1 / L2 / Linf norms of the raw features.
Vector feature_norms(const Matrix& features, FilterNorm norm);

/// Projection of w_c onto the centered feature h - mu_G, c the predicted class:
/// (h - mu_G) . w_c / ||h - mu_G||.
Vector p_score(const Matrix& features, const TrainStats& stats, const ClassifierHead& head, double epsilon = 1e-12);

/// alpha * ||h||_p + pScore. The norm is taken on the raw, uncentered feature.
Vector nc_score(const Matrix& features, const TrainStats& stats, const ClassifierHead& head,
                const NcScoreConfig& cfg);

/// Cosine between the centered feature and w_c, in [-1, 1].
Vector cos_score(const Matrix& features, const TrainStats& stats, const ClassifierHead& head, double epsilon = 1e-12);

/// -|| (h - mu_G) - lambda_c w_c ||, always <= 0.
Vector dist_score(const Matrix& features, const TrainStats& stats, const ClassifierHead& head);

}  // namespace ncood
