#pragma once

#include <Eigen/Dense>

namespace cfl {

using Scalar = double;

// Flattened model parameters, updates and directions, length d_w.
using ParamVector = Eigen::VectorXd;

using Matrix = Eigen::MatrixXd;
using IntVector = Eigen::VectorXi;

// Per-class sample counts of a client's training set.
using LabelHistogram = Eigen::VectorXi;

}  // namespace cfl
