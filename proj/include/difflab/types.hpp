#pragma once

#include <Eigen/Dense>
#include <vector>

namespace difflab {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Points = std::vector<Vector>;

}  // namespace difflab
