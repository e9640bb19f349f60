#pragma once

#include <Eigen/Core>

namespace rearsim {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Arr = Eigen::ArrayXd;

inline constexpr double kMsToKmh = 3.6;

}  // namespace rearsim
