#pragma once

#include <cmath>
#include <filesystem>
#include <string>

#include "rearsim/scenario.hpp"

namespace test {

namespace fs = std::filesystem;

/// Both vehicles at constant speed; the follower reaches the lead's rear at
/// t = gap0 / (vf - vl), which is the last sample.
inline rearsim::SeedCrash approach_seed(const std::string& id, double gap0, double vf, double vl, double dt = 0.01) {
  const double t_end = gap0 / (vf - vl);
  const auto n = static_cast<Eigen::Index>(std::llround(t_end / dt)) + 1;
  rearsim::SeedCrash s;
  s.id = id;
  s.t = rearsim::Vec::LinSpaced(n, 0.0, dt * static_cast<double>(n - 1));
  s.follower.position = vf * s.t;
  s.follower.speed = rearsim::Vec::Constant(n, vf);
  s.follower.acceleration = rearsim::Vec::Zero(n);
  s.lead.position = (gap0 + vl * s.t.array()).matrix();
  s.lead.speed = rearsim::Vec::Constant(n, vl);
  s.lead.acceleration = rearsim::Vec::Zero(n);
  s.lead_meta.mass = 1500.0;
  s.follower_meta.mass = 1500.0;
  return s;
}

/// Lead brakes at `onset` while the follower holds speed; collides by construction.
inline rearsim::SeedCrash braking_lead_seed(const std::string& id, double onset = 1.0) {
  rearsim::SeedParams p;
  p.lead_behavior = rearsim::LeadBehavior::kBraking;
  p.follower_speed = 20.0;
  p.lead_speed = 18.0;
  p.initial_gap = 15.0;
  p.lead_brake_onset = onset;
  p.lead_decel = 6.0;
  auto run = rearsim::simulate_raw_seed(p, 0.01, 60.0);
  run.full.id = id;
  return run.full;
}

/// Fresh empty directory under the system temp dir.
inline fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("rearsim_unit_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace test
