#include "ncood/detectors.hpp"

#include "ncood/error.hpp"
#include "ncood/format.hpp"
#include "ncood/metrics.hpp"

#include <algorithm>
#include <istream>
#include <ostream>
#include <sstream>

namespace ncood {

namespace {

std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

const FeatureSet& require_train(const FeatureSet* train, const std::string& name) {
    if (!train) throw ContractError("detector \"" + name + "\" needs training features");
    return *train;
}

}  // namespace

const std::vector<std::string>& detector_names() {
    static const std::vector<std::string> names = {"ncood", "pscore",  "cosscore", "distscore",   "msp",
                                                   "energy", "react", "dice",     "mahalanobis", "knn"};
    return names;
}

bool is_detector(const std::string& name) {
    const auto& n = detector_names();
    return std::find(n.begin(), n.end(), name) != n.end();
}

void require_detector(const std::string& name) {
    if (!is_detector(name)) {
        std::string valid;
        for (const auto& n : detector_names()) valid += (valid.empty() ? "" : ", ") + n;
        throw ContractError("unknown detector \"" + name + "\"; valid detectors: " + valid);
    }
}

ScoreResult run_detector(const std::string& name, const DetectorParams& params, const ClassifierHead& head,
                         const TrainStats& stats, const FeatureSet* train, const Matrix& features) {
    require_detector(name);
    ScoreResult r;
    r.predicted = predict_classes(head, features);
    if (name == "ncood") {
        if (!params.alpha) throw ContractError("detector \"ncood\" needs an alpha (see sweep-alpha)");
        r.scores = nc_score(features, stats, head, NcScoreConfig{*params.alpha, params.filter_norm, params.epsilon});
    } else if (name == "pscore") {
        r.scores = p_score(features, stats, head, params.epsilon);
    } else if (name == "cosscore") {
        r.scores = cos_score(features, stats, head, params.epsilon);
    } else if (name == "distscore") {
        r.scores = dist_score(features, stats, head);
    } else if (name == "msp") {
        r.scores = msp_score(compute_logits(head, features));
    } else if (name == "energy") {
        r.scores = energy_score(compute_logits(head, features));
    } else if (name == "react") {
        r.scores = react_score(features, head, fit_react(require_train(train, name), params.react_percentile));
    } else if (name == "dice") {
        r.scores = dice_score(features, head, fit_dice(stats, head, params.dice_sparsity));
    } else if (name == "mahalanobis") {
        const double ridge = params.ridge.value_or(default_mahalanobis_ridge(stats.sigma_W));
        r.scores = mahalanobis_score(features, mahalanobis_fit(stats.class_means, stats.sigma_W, ridge));
    } else {
        r.scores = knn_score(features, KnnIndex(require_train(train, name).features, params.k));
    }
    return r;
}

std::string config_digest(const std::string& name, const DetectorParams& params) {
    std::ostringstream s;
    s << "detector=" << name;
    if (name == "ncood") {
        s << ";alpha=" << (params.alpha ? format_double(*params.alpha) : std::string("unset"))
          << ";norm=" << filter_norm_name(params.filter_norm);
    } else if (name == "knn") {
        s << ";k=" << params.k;
    } else if (name == "react") {
        s << ";percentile=" << format_double(params.react_percentile);
    } else if (name == "dice") {
        s << ";sparsity=" << format_double(params.dice_sparsity);
    } else if (name == "mahalanobis") {
        s << ";ridge=" << (params.ridge ? format_double(*params.ridge) : std::string("default"));
    }
    return s.str();
}

AlphaSweep sweep_alpha(const TrainStats& stats, const ClassifierHead& head, const Matrix& id_val,
                       const Matrix& noise_val, const std::vector<double>& grid, FilterNorm filter_norm) {
    if (grid.empty()) throw ContractError("alpha grid is empty");
    AlphaSweep sweep;
    bool first = true;
    for (double alpha : grid) {
        const NcScoreConfig cfg{alpha, filter_norm};
        const auto id = to_std(nc_score(id_val, stats, head, cfg));
        const auto noise = to_std(nc_score(noise_val, stats, head, cfg));
        const double a = auroc(id, noise);
        sweep.rows.push_back({alpha, a});
        if (first || a > sweep.best_auroc || (a == sweep.best_auroc && alpha < sweep.best_alpha)) {
            sweep.best_alpha = alpha;
            sweep.best_auroc = a;
            first = false;
        }
    }
    return sweep;
}

void write_scores_csv(std::ostream& out, const ScoreResult& result) {
    out << "index,predicted_class,score\n";
    for (Eigen::Index i = 0; i < result.scores.size(); ++i) {
        out << i << ',' << result.predicted[static_cast<std::size_t>(i)] << ',' << format_double(result.scores[i])
            << '\n';
    }
}

std::vector<double> read_scores_csv(std::istream& in, const std::string& source_name) {
    std::string line;
    std::size_t lineno = 0;
    auto fail = [&](const std::string& why) {
        throw ContractError(source_name + " line " + std::to_string(lineno) + ": " + why);
    };
    if (!std::getline(in, line)) {
        lineno = 1;
        fail("missing header");
    }
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "index,predicted_class,score") fail("expected header \"index,predicted_class,score\"");
    std::vector<double> scores;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (cells.size() != 3) fail("expected 3 columns, got " + std::to_string(cells.size()));
        char* end = nullptr;
        const double score = std::strtod(cells[2].c_str(), &end);
        if (cells[2].empty() || end != cells[2].c_str() + cells[2].size()) fail("bad score \"" + cells[2] + "\"");
        scores.push_back(score);
    }
    if (scores.empty()) fail("no score rows");
    return scores;
}

}  // namespace ncood
