#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

namespace ncood {

/// Row-major dense matrix; one sample or class per row.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using Labels = std::vector<std::int64_t>;

}  // namespace ncood
