#pragma once

#include <filesystem>
#include <span>

#include "rearsim/types.hpp"

namespace rearsim {

inline constexpr double kGlanceBinWidth = 0.1;  // s
inline constexpr double kDecelBinWidth = 1.5;   // m/s^2

/// Off-road glance durations binned at 0.1 s plus an on-road point mass.
///
/// `off_road[k]` is the probability of a glance in ((k)*0.1, (k+1)*0.1] s,
/// i.e. duration (k+1)*0.1 s. Bins may be zero.
struct GlanceDistribution {
  double on_road_mass = 1.0;
  Vec off_road;

  Eigen::Index bins() const { return off_road.size(); }
  double duration(Eigen::Index k) const { return kGlanceBinWidth * static_cast<double>(k + 1); }
  double off_road_mass() const { return off_road.sum(); }
  Eigen::Index occupied_bins() const;
  /// Longest occupied duration, 0 if there is none.
  double max_duration() const;
};

/// Glance overshoot beyond the looming anchor. Same indexing as GlanceDistribution.
struct OvershootDistribution {
  double on_road_mass = 1.0;
  Vec off_road;

  Eigen::Index bins() const { return off_road.size(); }
  double overshoot(Eigen::Index k) const { return kGlanceBinWidth * static_cast<double>(k + 1); }

  /// Overshoot values including the on-road entry (0 s) first.
  Vec axis_values() const;
  /// Probabilities aligned with `axis_values()`.
  Vec axis_probabilities() const;
};

struct DecelDistribution {
  Vec d_max;          // bin centres, m/s^2, ascending
  Vec probabilities;  // sums to 1
  double bin_width = kDecelBinWidth;
};

/// Bin index (0-based) for a positive duration: bin j covers ((j-1)*0.1, j*0.1].
Eigen::Index glance_bin(double duration);

GlanceDistribution bin_glances(std::span<const double> durations, double on_road_fraction);

OvershootDistribution overshoot_transform(const GlanceDistribution& g);

/// Removes glances longer than `cut_at` and rescales the rest to the original off-road mass.
GlanceDistribution cut_glances(const GlanceDistribution& g, double cut_at);

/// Count-based probabilities on bins [b*w, (b+1)*w); only occupied bins are kept.
DecelDistribution bin_decels(std::span<const double> d_values, double bin_width = kDecelBinWidth);

void validate(const GlanceDistribution& g);
void validate(const DecelDistribution& d);

GlanceDistribution load_glance_distribution(const std::filesystem::path& csv);
void save_glance_distribution(const GlanceDistribution& g, const std::filesystem::path& csv);
DecelDistribution load_decel_distribution(const std::filesystem::path& csv);
void save_decel_distribution(const DecelDistribution& d, const std::filesystem::path& csv);

}  // namespace rearsim
