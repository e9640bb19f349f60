#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "rearsim/outcome.hpp"
#include "rearsim/types.hpp"

namespace rearsim {

enum class OccupantRole { kDriver, kPassenger };

struct OccupantRecord {
  double delta_v = 0.0;  // km/h
  int mais = 0;          // 0..6
  OccupantRole role = OccupantRole::kDriver;
};

std::vector<OccupantRecord> load_occupants(const std::filesystem::path& csv);
void save_occupants(const std::vector<OccupantRecord>& records, const std::filesystem::path& csv);

/// f(dv) = B1 * exp(-B2 * dv): PDO density per km/h, expressed as a share of
/// the complete (PDO + injured) population.
struct PdoModel {
  double B1 = 0.0;
  double B2 = 0.0;

  double density(double dv) const;
  /// Integral of the density over [lo, hi).
  double mass(double lo, double hi) const;
};

struct PdoFit {
  PdoModel model;
  double bin_width = kDeltaVBinWidth;
  Vec observed;   // MAIS0 counts per bin
  Vec fill;       // added counts per bin (zero above the fill ceiling)
  Vec augmented;  // observed + fill
  double n_injured = 0.0;
  double n_pdo = 0.0;
  double pdo_total = 0.0;
  double deficit = 0.0;
  Eigen::Index mode_bin = 0;
  Eigen::Index fill_bins = 0;
  int iterations = 0;
  std::vector<double> residual_curve;

  double complete_count() const { return pdo_total + n_injured; }
};

inline constexpr double kDefaultPdoShare = 0.7;
inline constexpr int kDefaultFillBins = 6;

/// Adds the PDO deficit to the lowest `n_fill_bins` bins and fits the
/// exponential form, alternating until the fit residual settles.
/// Throws ValidationError when MAIS0 already exceeds `p_pdo`, FitError when
/// the fit does not converge or does not decay.
PdoFit build_pdo(const std::vector<OccupantRecord>& records, double p_pdo = kDefaultPdoShare,
                 int n_fill_bins = kDefaultFillBins, double bin_width = kDeltaVBinWidth);

/// Weighted log-linear fit of the exponential to positive bins of `counts`.
PdoModel fit_exponential(const Vec& counts, double bin_width, double complete_count);

struct AugmentedReference {
  DeltaVDistribution combined;  // normalised
  Vec pdo_component;            // share of `combined` contributed by the PDO form
};

/// (1 - p_pdo) * injury + p_pdo * PDO form (exact bin integrals, normalised).
AugmentedReference augment_reference(const DeltaVDistribution& injury, const PdoModel& pdo, double p_pdo);

/// P(dv) = logistic(C1 + C2 * dv).
struct TransferFunction {
  double C1 = 0.0;
  double C2 = 0.0;

  double operator()(double dv) const;
  double midpoint() const { return -C1 / C2; }
};

struct TransferGrid {
  double c1_min = -10.0;
  double c1_step = 0.05;
  int c1_count = 199;  // up to -0.1
  double c2_min = 0.001;
  double c2_step = 0.001;
  int c2_count = 5000;  // up to 5

  double c1(int i) const { return c1_min + c1_step * static_cast<double>(i); }
  double c2(int j) const { return c2_min + c2_step * static_cast<double>(j); }
};

struct TransferFit {
  TransferFunction tf;
  double cost = 0.0;
  int c1_index = 0;
  int c2_index = 0;
  bool on_boundary = false;
  bool degenerate = false;  // no censoring signal: flattest slope, or P flat within 1 % over occupied bins
};

/// Sum of |original - s * with_pdo * P| with s matching the original's total mass.
double transfer_cost(const DeltaVDistribution& with_pdo, const DeltaVDistribution& original,
                     const TransferFunction& tf);

/// Exhaustive grid search; ties go to the smallest C1, then the smallest C2.
TransferFit fit_transfer(const DeltaVDistribution& with_pdo, const DeltaVDistribution& original,
                         const TransferGrid& grid = {}, unsigned workers = 1);

/// Weights multiplied by P(bin centre) and renormalised.
DeltaVDistribution apply_transfer(const DeltaVDistribution& dist, const TransferFunction& tf);

struct SensitivityResult {
  double base_mean = 0.0;
  std::vector<double> variant_means;
  std::vector<PdoModel> variant_pdo;
  std::vector<TransferFunction> variant_tf;
  double max_abs_shift = 0.0;
};

/// Perturbs every fill bin by a uniform factor in [1 - amplitude, 1 + amplitude],
/// refits the exponential and transfer, and records the transformed model mean.
SensitivityResult fill_sensitivity(const PdoFit& base, const DeltaVDistribution& injury,
                                   const DeltaVDistribution& model, double p_pdo, int n_variants,
                                   double amplitude, std::uint64_t seed, unsigned workers = 1);

}  // namespace rearsim
