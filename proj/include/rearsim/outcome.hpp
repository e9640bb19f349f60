#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "rearsim/sim_engine.hpp"
#include "rearsim/types.hpp"

namespace rearsim {

inline constexpr double kDeltaVBinWidth = 2.0;  // km/h

/// Follower delta-v from momentum conservation (plastic impact), m/s.
/// m1 is the follower mass, m2 the lead mass.
double delta_v(double v1, double v2, double m1, double m2);
double delta_v_kmh(double v1, double v2, double m1, double m2);

/// Histogram of delta-v on bins [k*w, (k+1)*w) km/h, k = 0, 1, ...
struct DeltaVDistribution {
  double bin_width = kDeltaVBinWidth;
  Vec weights;
  double mean = 0.0;              // km/h, from unbinned samples
  double count = 0.0;             // number of underlying crashes (0 = unknown)
  double no_response_mass = 0.0;  // share contributed by the no-response component

  Eigen::Index bins() const { return weights.size(); }
  double bin_low(Eigen::Index k) const { return bin_width * static_cast<double>(k); }
  double bin_high(Eigen::Index k) const { return bin_width * static_cast<double>(k + 1); }
  double bin_centre(Eigen::Index k) const { return bin_width * (static_cast<double>(k) + 0.5); }
  Vec centres() const;
  double total() const { return weights.sum(); }
  /// Mean computed from bin centres.
  double binned_mean() const;
};

struct WeightedSample {
  double delta_v = 0.0;  // km/h
  double weight = 0.0;
};

/// Order-invariant: samples are sorted before accumulation.
DeltaVDistribution build_histogram(std::vector<WeightedSample> samples, double bin_width = kDeltaVBinWidth);

/// Weights scaled to sum to 1; throws ValidationError when the total is 0.
DeltaVDistribution normalize(DeltaVDistribution h);

/// Zero-pads `h` to `bins` bins.
DeltaVDistribution pad_to(DeltaVDistribution h, Eigen::Index bins);

/// (1 - fraction) * a + fraction * b on a common binning. Both normalised.
DeltaVDistribution mix(const DeltaVDistribution& a, const DeltaVDistribution& b, double fraction);

/// Mixes a normalised base with the histogram of the per-seed no-response
/// delta-v values (equal weight each).
DeltaVDistribution mix_no_response(const DeltaVDistribution& base, std::span<const double> no_resp_dvs,
                                   double fraction);

struct SeedWeight {
  std::string seed_id;
  double crash_mass = 0.0;  // sum of crash-cell probabilities
  double q = 0.0;           // crash_mass normalised over seeds
  double w_raw = 0.0;       // 1 / q
  double w = 0.0;           // trimmed
};

struct PrevalenceWeighting {
  std::vector<SeedWeight> seeds;       // seeds with at least one crash cell
  std::vector<std::string> excluded;   // seeds without crash cells
  double trim_low = 0.0;
  double trim_high = 0.0;
  double raw_span = 1.0;  // max(w_raw) / min(w_raw)
  double norm = 1.0;      // sum over crash cells of w_i * p_j before renormalisation
};

/// Nearest-rank percentile (p in (0, 100]) of an unsorted sample.
double nearest_rank(std::vector<double> values, double p);

PrevalenceWeighting prevalence_weights(const std::vector<OutcomeMatrix>& matrices, double trim_low_pct = 5.0,
                                       double trim_high_pct = 95.0);

/// Every crash cell as (delta-v, w_i * p_j / norm). Total weight is 1.
std::vector<WeightedSample> weighted_crash_samples(const std::vector<OutcomeMatrix>& matrices,
                                                   const PrevalenceWeighting& weighting);

/// Delta-v of each seed's no-response outcome (crashing seeds only).
std::vector<double> no_response_delta_vs(const std::vector<OutcomeMatrix>& matrices);

/// One seed's generated distribution: crash cells normalised to (1 - f) plus
/// the no-response point at f. f is 0 for models without a no-response part.
std::vector<WeightedSample> seed_generated_samples(const OutcomeMatrix& m, double no_response_fraction);

/// Histogram CSV `bin_low_kmh,bin_high_kmh,weight`.
void save_histogram(const DeltaVDistribution& h, const std::filesystem::path& csv);
DeltaVDistribution load_histogram(const std::filesystem::path& csv);

}  // namespace rearsim
