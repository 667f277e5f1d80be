#pragma once

#include <Eigen/Core>

namespace sdsim {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

}  // namespace sdsim
