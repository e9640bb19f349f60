#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "rearsim/types.hpp"

namespace rearsim {

struct VehicleMeta {
  double mass = 1500.0;   // kg
  double width = 1.8;     // m
  double length = 4.5;    // m
  std::string id;
};

struct TrajectorySample {
  double t = 0.0;
  double position = 0.0;
  double speed = 0.0;
  double acceleration = 0.0;
};

/// One vehicle's time series; indices align with the owning scenario's time base.
struct Track {
  Vec position;
  Vec speed;
  Vec acceleration;
};

enum class LeadBehavior { kBraking, kNonBraking, kStandstill };

const char* to_string(LeadBehavior b);

/// Reconstructed pre-crash kinematics on a common 1-D path.
///
/// Follower positions refer to its front bumper, lead positions to its rear
/// bumper, so `gap(i) = lead.position[i] - follower.position[i]`.
struct SeedCrash {
  std::string id;
  Vec t;
  Track lead;
  Track follower;
  VehicleMeta lead_meta;
  VehicleMeta follower_meta;
  std::optional<double> seed_delta_v_kmh;

  Eigen::Index size() const { return t.size(); }
  double gap(Eigen::Index i) const { return lead.position[i] - follower.position[i]; }
  TrajectorySample lead_sample(Eigen::Index i) const;
  TrajectorySample follower_sample(Eigen::Index i) const;
};

/// A seed with the follower's evasive manoeuvre replaced by constant speed
/// and the lead extrapolated beyond the original window.
struct CounterfactualSeed {
  SeedCrash scenario;
  double follower_speed = 0.0;
  Eigen::Index original_samples = 0;
  LeadBehavior lead_behavior = LeadBehavior::kNonBraking;
  std::optional<double> brake_light_onset;
  std::optional<double> anchor_time;

  double original_end() const { return scenario.t[original_samples - 1]; }
  double horizon_end() const { return scenario.t[scenario.size() - 1]; }
};

inline constexpr double kOnsetAccelThreshold = -0.5;   // m/s^2
inline constexpr double kOnsetSustain = 0.2;           // s
inline constexpr double kCollisionTolerance = 0.05;    // m
inline constexpr double kStandstillSpeed = 0.05;       // m/s
inline constexpr double kDefaultHorizonExtension = 30.0;  // s

/// Throws ValidationError naming the first violated invariant.
void validate(const SeedCrash& seed);

/// Index of the first sample that starts a run of acceleration <= threshold
/// lasting at least `sustain` seconds.
std::optional<Eigen::Index> find_deceleration_onset(const Vec& t, const Vec& acceleration,
                                                    double threshold = kOnsetAccelThreshold,
                                                    double sustain = kOnsetSustain);

/// Reads `<stem>.csv` plus its `<stem>.json` sidecar and validates the result.
SeedCrash load_seed(const std::filesystem::path& csv_path);
void save_seed(const SeedCrash& seed, const std::filesystem::path& csv_path);
/// Every seed CSV in `dir`, ordered by seed id.
std::vector<SeedCrash> load_seed_dir(const std::filesystem::path& dir);

CounterfactualSeed remove_evasive_maneuver(const SeedCrash& seed,
                                           double horizon_extension = kDefaultHorizonExtension);
/// Recomputes the counterfactual from an existing one; returns an identical record.
CounterfactualSeed remove_evasive_maneuver(const CounterfactualSeed& cf,
                                           double horizon_extension = kDefaultHorizonExtension);

struct Range {
  double min = 0.0;
  double max = 0.0;
};

struct SynthConfig {
  int n_seeds = 103;
  double dt = 0.01;
  double window = 5.0;          // kept pre-impact duration
  double max_duration = 120.0;  // raw-simulation cut-off
  int max_attempts = 200;       // per seed

  Range follower_speed{8.0, 30.0};
  Range time_headway{0.6, 3.0};
  double min_gap = 2.0;

  // Relative weights; converted to exact counts by largest remainder.
  double mix_braking = 68.0;
  double mix_non_braking = 20.0;
  double mix_standstill = 15.0;

  Range braking_speed_ratio{0.5, 1.0};
  Range lead_brake_onset{0.5, 4.0};
  Range lead_decel{2.0, 8.0};
  double lead_jerk = 10.0;  // magnitude, m/s^3

  Range non_braking_speed_ratio{0.2, 0.8};
  Range standstill_gap{15.0, 70.0};

  double follower_brake_probability = 0.6;
  Range follower_brake_ttc{0.4, 1.2};
  Range follower_decel{2.0, 7.0};
  double follower_jerk = 15.0;

  Range mass{1000.0, 2200.0};
  Range width{1.6, 2.0};
  Range length{3.8, 5.0};
};

SynthConfig synth_config_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const SynthConfig& cfg);

/// Parameters of one synthetic seed before forward simulation.
struct SeedParams {
  LeadBehavior lead_behavior = LeadBehavior::kBraking;
  double follower_speed = 0.0;
  double lead_speed = 0.0;
  double initial_gap = 0.0;
  double lead_brake_onset = 0.0;
  double lead_decel = 0.0;
  double lead_jerk = 10.0;
  bool follower_brakes = false;
  double follower_brake_ttc = 0.0;
  double follower_decel = 0.0;
  double follower_jerk = 15.0;
  VehicleMeta lead_meta;
  VehicleMeta follower_meta;
};

struct RawSeedRun {
  SeedCrash full;  // untruncated, t from 0
  bool collided = false;
  Eigen::Index collision_index = 0;  // first sample with gap <= 0
  double collision_time = 0.0;       // linearly interpolated
  double v1 = 0.0;                   // follower speed at collision
  double v2 = 0.0;                   // lead speed at collision
};

RawSeedRun simulate_raw_seed(const SeedParams& params, double dt, double max_duration);

/// Deterministic in (cfg, rng_seed). Every seed satisfies `validate`.
std::vector<SeedCrash> synthesize_seeds(const SynthConfig& cfg, std::uint64_t rng_seed);

}  // namespace rearsim
