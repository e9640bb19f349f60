#pragma once

#include <optional>

#include "rearsim/scenario.hpp"
#include "rearsim/types.hpp"

namespace rearsim {

/// Optical expansion of the lead vehicle as seen from the follower.
struct LoomingSeries {
  Vec t;
  Vec theta;      // rad, angle subtended by the lead's width
  Vec theta_dot;  // rad/s
  Vec inv_tau;    // 1/s, theta_dot / theta
};

inline constexpr double kDefaultAnchorThreshold = 0.2;  // 1/s

/// 2 atan(w / 2R). Throws DomainError for range <= 0 or width <= 0.
double optical_angle(double range, double lead_width);

/// Exact derivative of `optical_angle` for range rate `range_rate`.
double optical_angle_rate(double range, double range_rate, double lead_width);

/// Samples up to (not including) the first overlap of the counterfactual.
LoomingSeries looming_series(const CounterfactualSeed& cf);

/// First upward crossing of `threshold`, interpolated linearly between samples.
std::optional<double> find_anchor(const LoomingSeries& series, double threshold = kDefaultAnchorThreshold);

/// Copy of `cf` with `anchor_time` filled in.
CounterfactualSeed with_anchor(CounterfactualSeed cf, double threshold = kDefaultAnchorThreshold);

}  // namespace rearsim
