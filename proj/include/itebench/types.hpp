#pragma once

#include <Eigen/Dense>

#include <vector>

namespace itebench {

using Eigen::Index;
using RealMatrix = Eigen::MatrixXd;
using RealVector = Eigen::VectorXd;
using IndexSet = std::vector<Index>;

}  // namespace itebench
