#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rearsim/outcome.hpp"
#include "rearsim/sim_engine.hpp"
#include "rearsim/types.hpp"

namespace rearsim {

struct ComparisonStats {
  double abs_mean_diff = 0.0;           // km/h
  double mean_abs_diff = 0.0;           // unweighted mean over bins of |p - q|
  double weighted_mean_abs_diff = 0.0;  // |p - q| weighted by (p + q) / 2
  double max_abs_diff = 0.0;
  double tv_distance = 0.0;
  double kl_divergence = 0.0;  // KL(p || q) after half-count smoothing
  double ks_distance = 0.0;
};

/// Both histograms must share the bin width; they are zero-padded to a
/// common length and normalised. The KL pseudo-count uses each histogram's
/// `count` (falling back to its number of bins when unknown).
ComparisonStats compare(const DeltaVDistribution& p, const DeltaVDistribution& q);

enum class PercentileMarker { kInRange, kBelowMin, kAboveMax };

const char* to_string(PercentileMarker m);

struct SeedPercentile {
  std::string seed_id;
  double percentile = 0.0;  // valid when marker == kInRange
  PercentileMarker marker = PercentileMarker::kInRange;
};

/// 100 * (mass strictly below + tie_share * mass equal) / total mass.
/// tie_share 0.5 is the mid-rank convention; a uniform draw gives the
/// randomised rank, which stays uniform when the generated distribution has atoms.
SeedPercentile seed_percentile(double seed_dv, std::span<const WeightedSample> generated, double tie_share = 0.5);

struct PercentileReport {
  Vec counts;  // in-range seeds per percentile bin
  std::size_t below_min = 0;
  std::size_t above_max = 0;
  std::size_t in_range = 0;
  double chi_square = 0.0;
  int dof = 0;
  double p_value = 0.0;  // NaN when no seed is in range
};

PercentileReport percentile_histogram(const std::vector<SeedPercentile>& seeds, int n_bins = 10);

/// Upper regularised incomplete gamma, P(X > chi2) for `dof` degrees of freedom.
double chi_square_sf(double chi2, int dof);

/// Nondecreasing injury risk R(dv) in [0, 1], tabulated (linear, clamped
/// at the ends) or logistic(intercept + slope * dv).
class InjuryRiskCurve {
 public:
  static InjuryRiskCurve tabulated(std::string level, Vec delta_v, Vec risk);
  static InjuryRiskCurve logistic(std::string level, double intercept, double slope);
  static InjuryRiskCurve constant(std::string level, double c);

  /// CSV `delta_v_kmh,risk` (level from the file stem) or JSON
  /// `{level, intercept, slope}`.
  static InjuryRiskCurve load(const std::filesystem::path& path);

  double operator()(double dv) const;
  const std::string& level() const { return level_; }

 private:
  std::string level_;
  bool logistic_ = false;
  double intercept_ = 0.0;
  double slope_ = 0.0;
  Vec dv_;
  Vec risk_;
};

/// Sum over bins of R(bin centre) * h (h normalised first).
double injury_risk(const DeltaVDistribution& h, const InjuryRiskCurve& curve);

struct SeedAvoidance {
  std::string seed_id;
  double p_base = 0.0;
  double p_treat = 0.0;
  double avoidance = 0.0;  // 1 - p_treat / p_base, not clamped
};

struct AvoidanceResult {
  double rate = 0.0;  // mean over seeds with p_base > 0
  std::vector<SeedAvoidance> seeds;
  std::size_t skipped = 0;  // baseline seeds without crash probability
};

/// Seeds are matched by id; every baseline seed must appear in the treatment.
AvoidanceResult crash_avoidance_rate(const std::vector<OutcomeMatrix>& baseline,
                                     const std::vector<OutcomeMatrix>& treatment);

}  // namespace rearsim
