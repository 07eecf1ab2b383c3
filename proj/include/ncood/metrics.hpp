#pragma once

#include <cstddef>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace ncood {

// ID is the positive class; a higher score means more in-distribution.

/// Tie-corrected AUROC: P(id > ood) + 0.5 * P(id == ood), via midranks.
double auroc(std::span<const double> id_scores, std::span<const double> ood_scores);

/// Largest threshold t keeping at least tpr_target of ID (id >= t), then the
/// fraction of OOD with ood >= t.
double fpr_at_tpr(std::span<const double> id_scores, std::span<const double> ood_scores, double tpr_target = 0.95);

struct EvalReport {
    std::string detector_name;
    std::string ood_set_name;
    double auroc = 0.0;
    double fpr_at_95tpr = 0.0;
    std::size_t n_id = 0;
    std::size_t n_ood = 0;
    std::string config_digest;
};

inline constexpr const char* kAverageRow = "Average";

/// One report per OOD set in name order, then an unweighted "Average" row.
std::vector<EvalReport> evaluate(const std::string& detector_name, std::span<const double> id_scores,
                                 const std::map<std::string, std::vector<double>>& ood_sets,
                                 const std::string& config_digest = "");

/// CSV with header detector,ood_set,auroc,fpr95,n_id,n_ood.
void write_report_csv(std::ostream& out, const std::vector<EvalReport>& reports);
std::string format_report_table(const std::vector<EvalReport>& reports);

/// Uniform bins between the pooled min and max of all named sets.
struct Histogram {
    double lo = 0.0;
    double hi = 0.0;
    std::map<std::string, std::vector<std::size_t>> counts;
};

inline constexpr int kDefaultHistogramBins = 50;

Histogram pooled_histogram(const std::map<std::string, std::vector<double>>& sets, int bins = kDefaultHistogramBins);
/// CSV: bin,lo,hi,<set names...>
void write_histogram_csv(std::ostream& out, const Histogram& h);

}  // namespace ncood
