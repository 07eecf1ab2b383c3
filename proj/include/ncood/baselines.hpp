#pragma once

#include "ncood/dataset_model.hpp"

#include <vector>

namespace ncood {

// Output-space and feature-space baselines. For every score here a lower
// value means more OOD.

/// Max softmax probability per row, computed with max subtraction.
Vector msp_score(const Matrix& logits);

/// log-sum-exp over classes per row. Higher is more in-distribution.
Vector energy_score(const Matrix& logits);

/// Linear-interpolated order statistic (numpy's default "linear" method).
double percentile(std::vector<double> values, double pct);

struct ReactClip {
    double threshold;
    double percentile;
};

/// Global clip value at the given percentile of all N*D training activations.
ReactClip fit_react(const FeatureSet& train, double percentile = 90.0);
Vector react_score(const Matrix& features, const ClassifierHead& head, const ReactClip& clip);

struct DiceMask {
    Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> mask;
    double sparsity_percentile;

    Eigen::Index kept() const { return mask.count(); }
};

inline constexpr double kDiceSparsityCifar = 90.0;
inline constexpr double kDiceSparsityImageNet = 70.0;

/// Per class row, keeps the round((100 - sparsity)% * D) entries with the
/// largest importance w_cj * mean_feature_j; ties keep the lower index.
DiceMask fit_dice(const TrainStats& stats, const ClassifierHead& head, double sparsity_percentile);
Vector dice_score(const Matrix& features, const ClassifierHead& head, const DiceMask& mask);

struct MahalanobisFit {
    Matrix class_means;
    Matrix shared_precision;
    Matrix shared_covariance;
    double ridge;
};

/// Ridge used when none is given: 1e-6 * trace(cov) / D.
double default_mahalanobis_ridge(const Matrix& covariance);

MahalanobisFit mahalanobis_fit(const FeatureSet& train, double ridge);
/// Fit from precomputed class means and tied covariance.
MahalanobisFit mahalanobis_fit(const Matrix& class_means, const Matrix& covariance, double ridge);
/// max_c -(h - mu_c)^T P (h - mu_c)
Vector mahalanobis_score(const Matrix& features, const MahalanobisFit& fit);

inline constexpr int kDefaultKnnK = 50;

class KnnIndex {
public:
    /// Stores L2-normalized copies of the training rows.
    KnnIndex(const Matrix& train_features, int k = kDefaultKnnK);

    const Matrix& normalized_train() const { return train_; }
    int k() const { return k_; }

private:
    Matrix train_;
    int k_;
};

/// Rows scaled to unit L2 norm; zero rows stay zero.
Matrix l2_normalize_rows(const Matrix& m);

/// -(distance from the normalized query to its k-th nearest normalized
/// training row), exact search.
Vector knn_score(const Matrix& features, const KnnIndex& index);

}  // namespace ncood
