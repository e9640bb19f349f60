#include "rearsim/driver_models.hpp"

#include <cmath>

#include "rearsim/errors.hpp"

namespace rearsim {

void CbmConfig::validate() const {
  if (!(inv_tau_threshold > 0.0)) throw ValidationError("inv_tau_threshold must be positive");
  if (!(response_delay >= 0.0)) throw ValidationError("response_delay must be >= 0");
  if (!(jerk_mean < 0.0)) throw ValidationError("jerk must be negative");
  if (!(no_response_fraction >= 0.0 && no_response_fraction < 1.0)) {
    throw ValidationError("no_response_fraction must be in [0, 1)");
  }
}

double cbm_onset(double anchor, double overshoot, const CbmConfig& cfg) {
  if (!(overshoot >= 0.0)) throw DomainError("cbm_onset: overshoot must be >= 0");
  return anchor + overshoot + cfg.response_delay;
}

double blom_onset(double brake_light_onset, double reaction_time) {
  if (!(reaction_time >= 0.0)) throw DomainError("blom_onset: reaction time must be >= 0");
  return brake_light_onset + reaction_time;
}

double blom_onset(const CounterfactualSeed& cf, double reaction_time) {
  if (cf.lead_behavior != LeadBehavior::kBraking || !cf.brake_light_onset) {
    throw ModelUndefinedError("brake-light model undefined for seed '" + cf.scenario.id + "': lead is " +
                              to_string(cf.lead_behavior));
  }
  return blom_onset(*cf.brake_light_onset, reaction_time);
}

ReactionTimeDistribution discretize_reaction_time(double m, double v) {
  if (!(m > 0.0) || !(v > 0.0)) throw DomainError("discretize_reaction_time: m and v must be positive");
  ReactionTimeDistribution d;
  d.m = m;
  d.v = v;
  d.mu = std::log(m * m / std::sqrt(v + m * m));
  d.sigma = std::sqrt(std::log(v / (m * m) + 1.0));

  constexpr int kBins = 25;
  constexpr double kStep = 0.2;
  auto cdf = [&](double x) { return 0.5 * std::erfc(-(std::log(x) - d.mu) / (d.sigma * std::sqrt(2.0))); };

  d.times.resize(kBins);
  d.probabilities.resize(kBins);
  for (int k = 0; k < kBins; ++k) {
    const double centre = kStep * (k + 1);
    d.times[k] = centre;
    d.probabilities[k] = cdf(centre + 0.5 * kStep) - cdf(centre - 0.5 * kStep);
  }
  const double total = d.probabilities.sum();
  if (!(total > 0.0)) throw DomainError("discretize_reaction_time: no mass inside 0.1-5.1 s");
  d.probabilities /= total;
  return d;
}

}  // namespace rearsim
