#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "rearsim/distributions.hpp"
#include "rearsim/driver_models.hpp"
#include "rearsim/scenario.hpp"
#include "rearsim/types.hpp"

namespace rearsim {

inline constexpr double kDefaultDt = 0.01;             // s
inline constexpr double kImpactSpeedTolerance = 0.01;  // m/s

/// Result of one forward simulation. Non-crash outcomes are all-zero so
/// that filled and simulated cells compare bit-exactly.
struct SimOutcome {
  bool crashed = false;
  double impact_time = 0.0;  // s
  double v1 = 0.0;           // follower speed at first overlap, m/s
  double v2 = 0.0;           // lead speed at first overlap, m/s
  bool max_severity = false;  // no braking applied before impact

  bool operator==(const SimOutcome&) const = default;
};

/// Follower holds the counterfactual constant speed until `onset`, then
/// brakes along the jerk ramp to `d_max`. Lead follows the (extended) seed.
/// Semi-implicit Euler; the overlap instant is interpolated linearly.
SimOutcome simulate(const CounterfactualSeed& cf, double onset, double d_max,
                    double jerk = -23.04, double dt = kDefaultDt);

enum class ResponseModel { kCbm, kBlom };

const char* to_string(ResponseModel m);
ResponseModel response_model_from_string(const std::string& s);

/// Per-seed grid over (axis1 x decel). axis1 is overshoot (CBM) or
/// reaction time (BLOM), ascending, so later bins mean later brake onset.
struct OutcomeMatrix {
  std::string seed_id;
  ResponseModel model = ResponseModel::kCbm;
  Vec axis1;
  Vec axis1_prob;
  Vec decel;
  Vec decel_prob;
  std::vector<SimOutcome> cells;  // row-major in decel: index = d * n_axis1 + a
  SimOutcome no_response;
  double follower_mass = 0.0;  // m1
  double lead_mass = 0.0;      // m2
  std::optional<double> seed_delta_v_kmh;
  std::size_t kernel_calls = 0;
  std::size_t fallback_rows = 0;

  Eigen::Index n_axis1() const { return axis1.size(); }
  Eigen::Index n_decel() const { return decel.size(); }
  std::size_t index(Eigen::Index a, Eigen::Index d) const {
    return static_cast<std::size_t>(d * n_axis1() + a);
  }
  const SimOutcome& cell(Eigen::Index a, Eigen::Index d) const { return cells[index(a, d)]; }
  double p_cell(Eigen::Index a, Eigen::Index d) const { return axis1_prob[a] * decel_prob[d]; }
  /// Sum of cell probabilities over crashing cells.
  double crash_probability() const;
  std::size_t crash_count() const;
};

struct SweepOptions {
  bool exhaustive = false;
  double jerk = -23.04;
  double dt = kDefaultDt;
  std::uint64_t rng_seed = 0;  // spot-check sampling
};

/// Diagnostic emitted when a fill-in spot check disagrees with simulation.
struct SweepDiagnostic {
  std::string seed_id;
  Eigen::Index decel_bin = 0;
  Eigen::Index axis1_bin = 0;
};

/// `onsets[a]` is the brake onset for axis1 bin a (kNever allowed) and must be
/// nondecreasing. Rows are reduced by binary search plus fill-in unless
/// `opts.exhaustive` is set.
OutcomeMatrix sweep_seed(const CounterfactualSeed& cf, const Vec& onsets, const Vec& axis1, const Vec& axis1_prob,
                         const DecelDistribution& decels, ResponseModel model, const SweepOptions& opts,
                         std::vector<SweepDiagnostic>* diagnostics = nullptr);

struct CampaignConfig {
  ResponseModel model = ResponseModel::kCbm;
  CbmConfig cbm;
  double reaction_time_mean = kReactionTimeMean;
  double reaction_time_variance = kReactionTimeVariance;
  std::optional<double> glance_cut;  // DMS truncation, s
  double dt = kDefaultDt;
  double horizon_extension = kDefaultHorizonExtension;
  std::uint64_t rng_seed = 1;
  bool exhaustive = false;
};

CampaignConfig campaign_config_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const CampaignConfig& cfg);

struct Exclusion {
  std::string seed_id;
  std::string reason;
};

struct CampaignResult {
  ResponseModel model = ResponseModel::kCbm;
  std::vector<OutcomeMatrix> matrices;  // ordered by seed id
  std::vector<Exclusion> exclusions;
  std::vector<SweepDiagnostic> diagnostics;
  std::size_t theoretical_cells = 0;
  std::size_t kernel_calls = 0;
};

/// Axis used for CBM campaigns: overshoot 0 (on-road) followed by the
/// overshoot bins of the (optionally cut) glance distribution.
OvershootDistribution campaign_overshoot(const GlanceDistribution& glances, std::optional<double> cut);

/// Simulates every eligible seed. `glances` is required for CBM. Output is
/// independent of `workers`.
CampaignResult run_campaign(const std::vector<SeedCrash>& seeds, const CampaignConfig& cfg,
                            const GlanceDistribution* glances, const DecelDistribution& decels,
                            unsigned workers = 1);

/// Outcome CSV: seed_id,axis1_bin,decel_bin,crashed,v1,v2,max_severity,p_cell
void save_outcomes_csv(const std::vector<OutcomeMatrix>& matrices, const std::filesystem::path& csv);
/// Full campaign output (outcomes.csv, seeds.csv, axes.json, summary.json) in `dir`.
void save_campaign(const CampaignResult& result, const std::filesystem::path& dir);
CampaignResult load_campaign(const std::filesystem::path& dir);

}  // namespace rearsim
