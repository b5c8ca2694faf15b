#pragma once

#include <Eigen/Core>

namespace updp {

// Row-major so that prompt positions and vocabulary entries are contiguous rows.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

/// A D-dimensional feature. Encoder outputs are unit-norm.
using FeatureVec = Vector;

}  // namespace updp
