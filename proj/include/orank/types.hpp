#pragma once

#include <Eigen/Core>

namespace orank {

/// Row-major dense matrix; one unit per row.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

}  // namespace orank
