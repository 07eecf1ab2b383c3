#pragma once

// Brute-force reference implementations used only by tests. They follow the
// defining formulas literally and share no code with the library paths they check.

#include "ncood/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <limits>
#include <set>
#include <string>
#include <vector>

namespace ncood::oracle {

/// Pairwise definition: 1 per (id > ood), 0.5 per tie.
inline double auroc(const std::vector<double>& id, const std::vector<double>& ood) {
    double sum = 0.0;
    for (double a : id) {
        for (double b : ood) {
            if (a > b) {
                sum += 1.0;
            } else if (a == b) {
                sum += 0.5;
            }
        }
    }
    return sum / (static_cast<double>(id.size()) * static_cast<double>(ood.size()));
}

/// Scans every distinct score as a candidate threshold.
inline double fpr_at_tpr(const std::vector<double>& id, const std::vector<double>& ood, double target) {
    std::set<double> candidates(id.begin(), id.end());
    candidates.insert(ood.begin(), ood.end());
    double best = -std::numeric_limits<double>::infinity();
    for (double t : candidates) {
        std::size_t kept = 0;
        for (double a : id) kept += a >= t;
        if (static_cast<double>(kept) / static_cast<double>(id.size()) >= target) best = std::max(best, t);
    }
    std::size_t accepted = 0;
    for (double b : ood) accepted += b >= best;
    return static_cast<double>(accepted) / static_cast<double>(ood.size());
}

/// Within-class covariance by an explicit triple loop, 1/N normalized.
inline Matrix within_class_covariance(const Matrix& x, const Labels& y, int classes) {
    const auto n = x.rows();
    const auto d = x.cols();
    std::vector<std::vector<double>> mean(static_cast<std::size_t>(classes), std::vector<double>(d, 0.0));
    std::vector<double> count(static_cast<std::size_t>(classes), 0.0);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto c = static_cast<std::size_t>(y[static_cast<std::size_t>(i)]);
        count[c] += 1.0;
        for (Eigen::Index j = 0; j < d; ++j) mean[c][j] += x(i, j);
    }
    for (std::size_t c = 0; c < mean.size(); ++c) {
        for (auto& v : mean[c]) v /= count[c];
    }
    Matrix s = Matrix::Zero(d, d);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto c = static_cast<std::size_t>(y[static_cast<std::size_t>(i)]);
        for (Eigen::Index a = 0; a < d; ++a) {
            for (Eigen::Index b = 0; b < d; ++b) {
                s(a, b) += (x(i, a) - mean[c][a]) * (x(i, b) - mean[c][b]);
            }
        }
    }
    return s / static_cast<double>(n);
}

/// max_c of -(h - mu_c)^T P (h - mu_c) by scalar loops.
inline std::vector<double> mahalanobis(const Matrix& x, const Matrix& means, const Matrix& precision) {
    std::vector<double> out;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        double best = -std::numeric_limits<double>::infinity();
        for (Eigen::Index c = 0; c < means.rows(); ++c) {
            double q = 0.0;
            for (Eigen::Index a = 0; a < x.cols(); ++a) {
                for (Eigen::Index b = 0; b < x.cols(); ++b) {
                    q += (x(i, a) - means(c, a)) * precision(a, b) * (x(i, b) - means(c, b));
                }
            }
            best = std::max(best, -q);
        }
        out.push_back(best);
    }
    return out;
}

inline std::vector<double> unit_row(const Matrix& m, Eigen::Index i) {
    double n2 = 0.0;
    for (Eigen::Index j = 0; j < m.cols(); ++j) n2 += m(i, j) * m(i, j);
    const double n = std::sqrt(n2);
    std::vector<double> out(m.cols());
    for (Eigen::Index j = 0; j < m.cols(); ++j) out[j] = n > 0.0 ? m(i, j) / n : 0.0;
    return out;
}

/// Negative k-th smallest distance between normalized rows, by full sort.
inline std::vector<double> knn(const Matrix& train, const Matrix& queries, int k) {
    std::vector<double> out;
    for (Eigen::Index i = 0; i < queries.rows(); ++i) {
        const auto q = unit_row(queries, i);
        std::vector<double> dist;
        for (Eigen::Index j = 0; j < train.rows(); ++j) {
            const auto t = unit_row(train, j);
            double d2 = 0.0;
            for (std::size_t a = 0; a < q.size(); ++a) d2 += (q[a] - t[a]) * (q[a] - t[a]);
            dist.push_back(std::sqrt(d2));
        }
        std::sort(dist.begin(), dist.end());
        out.push_back(-dist[static_cast<std::size_t>(k - 1)]);
    }
    return out;
}

/// NCT1 writer that assembles every byte with shifts, independent of the
/// library's memcpy-based path and of host endianness.
inline std::string nct1_bytes(std::uint8_t dtype_code, const std::vector<std::uint64_t>& shape,
                              const std::vector<std::uint64_t>& element_bits, std::size_t element_bytes) {
    std::string out = "NCT1";
    out.push_back(static_cast<char>(1));
    out.push_back(static_cast<char>(dtype_code));
    out.push_back(static_cast<char>(shape.size()));
    for (auto e : shape) {
        for (int b = 0; b < 8; ++b) out.push_back(static_cast<char>((e >> (8 * b)) & 0xFF));
    }
    for (auto bits : element_bits) {
        for (std::size_t b = 0; b < element_bytes; ++b) out.push_back(static_cast<char>((bits >> (8 * b)) & 0xFF));
    }
    return out;
}

inline std::uint64_t bits_of(double v) {
    std::uint64_t u;
    std::memcpy(&u, &v, 8);
    return u;
}

inline std::uint64_t bits_of(float v) {
    std::uint32_t u;
    std::memcpy(&u, &v, 4);
    return u;
}

}  // namespace ncood::oracle
