#include "ncood/metrics.hpp"

#include "ncood/error.hpp"
#include "ncood/format.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>

namespace ncood {

namespace {

void require_scores(std::span<const double> id_scores, std::span<const double> ood_scores) {
    if (id_scores.empty()) throw ContractError("ID score set is empty");
    if (ood_scores.empty()) throw ContractError("OOD score set is empty");
    auto finite = [](double x) { return std::isfinite(x); };
    if (!std::all_of(id_scores.begin(), id_scores.end(), finite) ||
        !std::all_of(ood_scores.begin(), ood_scores.end(), finite)) {
        throw ContractError("scores must be finite");
    }
}

}  // namespace

double auroc(std::span<const double> id_scores, std::span<const double> ood_scores) {
    require_scores(id_scores, ood_scores);
    struct Entry {
        double score;
        bool is_id;
    };
    std::vector<Entry> all;
    all.reserve(id_scores.size() + ood_scores.size());
    for (double s : id_scores) all.push_back({s, true});
    for (double s : ood_scores) all.push_back({s, false});
    std::sort(all.begin(), all.end(), [](const Entry& a, const Entry& b) { return a.score < b.score; });

    // Mann-Whitney U over doubled midranks keeps every quantity an integer.
    long double id_rank2 = 0;
    std::size_t i = 0;
    while (i < all.size()) {
        std::size_t j = i;
        while (j < all.size() && all[j].score == all[i].score) ++j;
        const auto midrank2 = static_cast<long double>(i + 1 + j);  // 2 * average of ranks i+1..j
        for (std::size_t k = i; k < j; ++k) {
            if (all[k].is_id) id_rank2 += midrank2;
        }
        i = j;
    }
    const auto n_id = static_cast<long double>(id_scores.size());
    const auto n_ood = static_cast<long double>(ood_scores.size());
    const long double u2 = id_rank2 - n_id * (n_id + 1);
    return static_cast<double>(u2 / (2 * n_id * n_ood));
}

double fpr_at_tpr(std::span<const double> id_scores, std::span<const double> ood_scores, double tpr_target) {
    require_scores(id_scores, ood_scores);
    if (!(tpr_target > 0.0 && tpr_target <= 1.0)) {
        throw ContractError("TPR target must be in (0, 1]");
    }
    std::vector<double> id(id_scores.begin(), id_scores.end());
    std::sort(id.begin(), id.end(), std::greater<>());
    const auto n_id = static_cast<double>(id.size());
    double threshold = id.back();
    for (std::size_t k = 1; k <= id.size(); ++k) {
        if (static_cast<double>(k) / n_id >= tpr_target) {
            threshold = id[k - 1];
            break;
        }
    }
    const auto accepted = std::count_if(ood_scores.begin(), ood_scores.end(), [&](double s) { return s >= threshold; });
    return static_cast<double>(accepted) / static_cast<double>(ood_scores.size());
}

std::vector<EvalReport> evaluate(const std::string& detector_name, std::span<const double> id_scores,
                                 const std::map<std::string, std::vector<double>>& ood_sets,
                                 const std::string& config_digest) {
    if (ood_sets.empty()) throw ContractError("no OOD sets to evaluate");
    std::vector<EvalReport> out;
    EvalReport avg{detector_name, kAverageRow, 0.0, 0.0, id_scores.size(), 0, config_digest};
    for (const auto& [name, scores] : ood_sets) {
        EvalReport r{detector_name, name, auroc(id_scores, scores), fpr_at_tpr(id_scores, scores, 0.95),
                     id_scores.size(), scores.size(), config_digest};
        avg.auroc += r.auroc;
        avg.fpr_at_95tpr += r.fpr_at_95tpr;
        avg.n_ood += r.n_ood;
        out.push_back(std::move(r));
    }
    const auto n = static_cast<double>(ood_sets.size());
    avg.auroc /= n;
    avg.fpr_at_95tpr /= n;
    out.push_back(std::move(avg));
    return out;
}

void write_report_csv(std::ostream& out, const std::vector<EvalReport>& reports) {
    out << "detector,ood_set,auroc,fpr95,n_id,n_ood\n";
    for (const auto& r : reports) {
        out << r.detector_name << ',' << r.ood_set_name << ',' << format_double(r.auroc) << ','
            << format_double(r.fpr_at_95tpr) << ',' << r.n_id << ',' << r.n_ood << '\n';
    }
}

std::string format_report_table(const std::vector<EvalReport>& reports) {
    std::size_t wd = 8, wo = 7;
    for (const auto& r : reports) {
        wd = std::max(wd, r.detector_name.size());
        wo = std::max(wo, r.ood_set_name.size());
    }
    std::ostringstream s;
    s << std::left << std::setw(static_cast<int>(wd)) << "detector" << "  " << std::setw(static_cast<int>(wo))
      << "ood_set" << "  " << std::right << std::setw(8) << "AUROC" << "  " << std::setw(8) << "FPR95" << "  "
      << std::setw(7) << "n_id" << "  " << std::setw(7) << "n_ood" << "\n";
    s << std::fixed;
    for (const auto& r : reports) {
        s << std::left << std::setw(static_cast<int>(wd)) << r.detector_name << "  " << std::setw(static_cast<int>(wo))
          << r.ood_set_name << "  " << std::right << std::setprecision(4) << std::setw(8) << r.auroc << "  "
          << std::setw(8) << r.fpr_at_95tpr << "  " << std::setw(7) << r.n_id << "  " << std::setw(7)
          << r.n_ood << "\n";
    }
    return s.str();
}

Histogram pooled_histogram(const std::map<std::string, std::vector<double>>& sets, int bins) {
    if (bins < 1) throw ContractError("histogram needs at least one bin");
    Histogram h;
    bool any = false;
    for (const auto& [_, values] : sets) {
        for (double v : values) {
            if (!std::isfinite(v)) throw ContractError("histogram values must be finite");
            h.lo = any ? std::min(h.lo, v) : v;
            h.hi = any ? std::max(h.hi, v) : v;
            any = true;
        }
    }
    if (!any) throw ContractError("histogram of empty sets");
    const double width = (h.hi - h.lo) / bins;
    for (const auto& [name, values] : sets) {
        auto& counts = h.counts[name];
        counts.assign(static_cast<std::size_t>(bins), 0);
        for (double v : values) {
            auto b = width > 0.0 ? static_cast<int>((v - h.lo) / width) : 0;
            ++counts[static_cast<std::size_t>(std::clamp(b, 0, bins - 1))];
        }
    }
    return h;
}

void write_histogram_csv(std::ostream& out, const Histogram& h) {
    out << "bin,lo,hi";
    for (const auto& [name, _] : h.counts) out << ',' << name;
    out << '\n';
    const auto bins = h.counts.empty() ? 0 : h.counts.begin()->second.size();
    const double width = bins ? (h.hi - h.lo) / static_cast<double>(bins) : 0.0;
    for (std::size_t b = 0; b < bins; ++b) {
        out << b << ',' << format_double(h.lo + width * static_cast<double>(b)) << ','
            << format_double(h.lo + width * static_cast<double>(b + 1));
        for (const auto& [_, counts] : h.counts) out << ',' << counts[b];
        out << '\n';
    }
}

}  // namespace ncood
