#pragma once

// Deterministic synthetic stand-ins for the proprietary inputs: glance
// samples, deceleration samples, occupant records, reference histograms and
// illustrative injury-risk curves.

#include <cstdint>
#include <vector>

#include "rearsim/bias_transform.hpp"
#include "rearsim/distributions.hpp"
#include "rearsim/outcome.hpp"
#include "rearsim/scenario.hpp"
#include "rearsim/sim_engine.hpp"
#include "rearsim/validation.hpp"

namespace rearsim::fixtures {

inline constexpr double kNaturalisticOnRoad = 0.8;

/// 4604 off-road glances; every 0.1 s bin up to 6.6 s is occupied.
std::vector<double> naturalistic_glance_durations();
GlanceDistribution naturalistic_glances();

/// Short-tailed test-track style sample, longest glance 2.6 s.
std::vector<double> test_track_glance_durations();
GlanceDistribution test_track_glances();

/// 45 maximum decelerations spanning six 1.5 m/s^2 bins.
std::vector<double> max_decelerations();
DecelDistribution decel_distribution();

/// Insurance-style occupant sample: censored MAIS0 records plus injured ones.
std::vector<OccupantRecord> insurance_occupants();

/// Occupant records whose complete PDO population follows B1 exp(-B2 dv)
/// (density share of `n_complete`), with the lowest bins thinned by `keep`.
std::vector<OccupantRecord> exponential_pdo_occupants(double B1, double B2, double n_complete,
                                                      const std::vector<double>& keep, double bin_width = 2.0);

/// Injury-database style reference histogram (gamma-shaped, mean about 18 km/h).
DeltaVDistribution injury_reference(double n = 1000.0);

struct LogisticRisk {
  const char* level;
  double intercept;
  double slope;
};

/// Illustrative curves; real parameter values are user-supplied.
LogisticRisk example_risk_parameters(int mais_level);
InjuryRiskCurve example_risk_curve(int mais_level);

/// Outcome matrices whose crash masses span `span`:1 (log-spaced).
std::vector<OutcomeMatrix> weighting_stress_matrices(int n_seeds, double span);

/// Synthesis config for the golden pipeline.
SynthConfig small_seed_config(int n_seeds = 12);

/// `n` draws from a normalised histogram, as counts per bin.
Vec multinomial_counts(const Vec& probabilities, int n, std::uint64_t seed);

}  // namespace rearsim::fixtures
