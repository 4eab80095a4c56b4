#pragma once

#include <Eigen/Dense>

namespace bayman {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

}  // namespace bayman
