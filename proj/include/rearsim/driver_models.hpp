#pragma once

#include <limits>

#include "rearsim/scenario.hpp"
#include "rearsim/types.hpp"

namespace rearsim {

inline constexpr double kNever = std::numeric_limits<double>::infinity();

struct CbmConfig {
  double inv_tau_threshold = 0.2;  // 1/s
  double response_delay = 0.5;     // s, eyes back on road to brake onset
  double jerk_mean = -23.04;       // m/s^3
  double jerk_sd = 0.74;           // m/s^3, informational only
  double no_response_fraction = 0.10;

  /// Throws ValidationError.
  void validate() const;
};

/// Ramp at |jerk| from `onset` up to a plateau of `d_max`. onset == kNever means no braking.
struct BrakeProfile {
  double onset = kNever;
  double jerk = -23.04;
  double d_max = 1.0;  // magnitude, m/s^2
};

/// Deceleration magnitude at time t.
inline double brake_deceleration(const BrakeProfile& p, double t) {
  if (!(t > p.onset)) return 0.0;
  const double ramp = (p.jerk < 0.0 ? -p.jerk : p.jerk) * (t - p.onset);
  return ramp < p.d_max ? ramp : p.d_max;
}

/// Onset of braking for the off-road-glance model: anchor + overshoot + delay.
double cbm_onset(double anchor, double overshoot, const CbmConfig& cfg);

/// Onset of braking for the brake-light model.
double blom_onset(double brake_light_onset, double reaction_time);
/// Throws ModelUndefinedError unless the lead brakes during the seed.
double blom_onset(const CounterfactualSeed& cf, double reaction_time);

/// Log-normal reaction-time distribution discretised to 0.2 s bins.
struct ReactionTimeDistribution {
  Vec times;          // bin centres, s
  Vec probabilities;  // sums to 1
  double m = 0.0;     // mean, s
  double v = 0.0;     // variance, s^2
  double mu = 0.0;
  double sigma = 0.0;
};

inline constexpr double kReactionTimeMean = 1.275;
inline constexpr double kReactionTimeVariance = 0.36;

/// Mass of each bin is the log-normal integral over centre +/- 0.1 s for
/// centres 0.2, 0.4, ..., 5.0; the remaining tails are dropped and the
/// result renormalised.
ReactionTimeDistribution discretize_reaction_time(double m = kReactionTimeMean,
                                                  double v = kReactionTimeVariance);

}  // namespace rearsim
