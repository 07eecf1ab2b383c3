#pragma once

#include "ncood/baselines.hpp"
#include "ncood/nc_scores.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace ncood {

const std::vector<std::string>& detector_names();
bool is_detector(const std::string& name);
/// Throws ContractError listing the valid names.
void require_detector(const std::string& name);

struct DetectorParams {
    std::optional<double> alpha;  // required by ncood
    FilterNorm filter_norm = FilterNorm::L1;
    double epsilon = 1e-12;
    int k = kDefaultKnnK;
    double react_percentile = 90.0;
    double dice_sparsity = kDiceSparsityCifar;
    std::optional<double> ridge;  // default_mahalanobis_ridge when unset
};

struct ScoreResult {
    Labels predicted;
    Vector scores;
};

/// Scores `features` with the named detector. `train` is needed by react
/// and knn only.
ScoreResult run_detector(const std::string& name, const DetectorParams& params, const ClassifierHead& head,
                         const TrainStats& stats, const FeatureSet* train, const Matrix& features);

/// Stable one-line description of the detector configuration.
std::string config_digest(const std::string& name, const DetectorParams& params);

inline const std::vector<double> kDefaultAlphaGrid = {0.001, 0.01, 0.1, 1.0};

struct AlphaSweepRow {
    double alpha;
    double auroc;
};

struct AlphaSweep {
    std::vector<AlphaSweepRow> rows;
    double best_alpha = 0.0;
    double best_auroc = 0.0;
};

/// AUROC of nc_score on ID-validation vs noise-validation features for each
/// alpha; the winner maximizes AUROC, ties going to the smaller alpha.
AlphaSweep sweep_alpha(const TrainStats& stats, const ClassifierHead& head, const Matrix& id_val,
                       const Matrix& noise_val, const std::vector<double>& grid,
                       FilterNorm filter_norm = FilterNorm::L1);

/// Score CSV: header "index,predicted_class,score", one row per sample.
void write_scores_csv(std::ostream& out, const ScoreResult& result);
/// Returns the score column. Malformed rows raise ContractError with the line number.
std::vector<double> read_scores_csv(std::istream& in, const std::string& source_name = "scores");

}  // namespace ncood
