#include "rearsim/looming.hpp"

#include <cmath>

#include "rearsim/errors.hpp"

namespace rearsim {

double optical_angle(double range, double lead_width) {
  if (!(range > 0.0)) throw DomainError("optical_angle: range must be positive (vehicles overlap)");
  if (!(lead_width > 0.0)) throw DomainError("optical_angle: lead width must be positive");
  return 2.0 * std::atan(lead_width / (2.0 * range));
}

double optical_angle_rate(double range, double range_rate, double lead_width) {
  return -lead_width * range_rate / (range * range + 0.25 * lead_width * lead_width);
}

LoomingSeries looming_series(const CounterfactualSeed& cf) {
  const SeedCrash& s = cf.scenario;
  const double w = s.lead_meta.width;
  Eigen::Index n = 0;
  while (n < s.size() && s.gap(n) > 0.0) ++n;

  LoomingSeries out;
  out.t = s.t.head(n);
  out.theta.resize(n);
  out.theta_dot.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double range = s.gap(i);
    const double range_rate = s.lead.speed[i] - s.follower.speed[i];
    out.theta[i] = optical_angle(range, w);
    out.theta_dot[i] = optical_angle_rate(range, range_rate, w);
  }
  out.inv_tau = out.theta_dot.cwiseQuotient(out.theta);
  return out;
}

std::optional<double> find_anchor(const LoomingSeries& series, double threshold) {
  if (!(threshold > 0.0)) throw DomainError("find_anchor: threshold must be positive");
  const Vec& v = series.inv_tau;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (v[i] >= threshold) {
      if (i == 0) return series.t[0];
      const double frac = (threshold - v[i - 1]) / (v[i] - v[i - 1]);
      return series.t[i - 1] + frac * (series.t[i] - series.t[i - 1]);
    }
  }
  return std::nullopt;
}

CounterfactualSeed with_anchor(CounterfactualSeed cf, double threshold) {
  cf.anchor_time = find_anchor(looming_series(cf), threshold);
  return cf;
}

}  // namespace rearsim
