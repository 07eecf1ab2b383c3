#pragma once

#include "ncood/collapse_lab.hpp"
#include "ncood/detectors.hpp"
#include "ncood/metrics.hpp"
#include "ncood/synth_geometry.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace ncood::cli {

namespace fs = std::filesystem;

// Stable exit codes for scripting.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitIo = 3;
inline constexpr int kExitNumeric = 4;

/// Maps the in-flight exception to an exit code, printing it to `err`.
int report_exception(std::ostream& err);

struct StatsOptions {
    fs::path train;
    std::optional<fs::path> head;
    fs::path out;
};

struct ScoreOptions {
    std::string detector;
    DetectorParams params;
    std::optional<fs::path> head;
    std::optional<fs::path> stats;
    std::optional<fs::path> train;
    fs::path features;
    fs::path out;
};

struct EvalOptions {
    fs::path id_scores;
    std::vector<std::string> ood;  // "name=path" or bare path (name = file stem)
    std::string detector = "detector";
    std::optional<fs::path> out;
};

struct SweepOptions {
    std::optional<fs::path> head;
    std::optional<fs::path> stats;
    std::optional<fs::path> train;
    fs::path id_val;
    fs::path noise_val;
    std::vector<double> grid = kDefaultAlphaGrid;
    FilterNorm filter_norm = FilterNorm::L1;
    std::optional<fs::path> out;
};

struct SynthOptions {
    SynthSpec spec;
    int n_test_per_class = 100;
    fs::path out;
};

struct CollapseOptions {
    BlobsSpec blobs;
    MlpConfig mlp;
    fs::path out;
};

struct HistOptions {
    std::vector<std::string> scores;  // "name=path" or bare path
    int bins = kDefaultHistogramBins;
    fs::path out;
};

// Each command writes human-readable output to `out` and throws on failure.
void cmd_stats(const StatsOptions& opt, std::ostream& out);
void cmd_score(const ScoreOptions& opt, std::ostream& out);
void cmd_eval(const EvalOptions& opt, std::ostream& out);
AlphaSweep cmd_sweep_alpha(const SweepOptions& opt, std::ostream& out);
void cmd_synth(const SynthOptions& opt, std::ostream& out);
NcReport cmd_collapse(const CollapseOptions& opt, std::ostream& out);
void cmd_hist(const HistOptions& opt, std::ostream& out);

/// Full command-line entry point; returns the process exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace ncood::cli
