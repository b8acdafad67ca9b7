#pragma once

#include <Eigen/Dense>

namespace bdconv {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

}  // namespace bdconv
