#include "rearsim/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "rearsim/errors.hpp"
#include "rearsim/io.hpp"
#include "rearsim/outcome.hpp"
#include "rearsim/rng.hpp"

namespace rearsim {

namespace fs = std::filesystem;
using nlohmann::json;

const char* to_string(LeadBehavior b) {
  switch (b) {
    case LeadBehavior::kBraking: return "braking";
    case LeadBehavior::kNonBraking: return "non-braking";
    case LeadBehavior::kStandstill: return "standstill-at-start";
  }
  return "unknown";
}

TrajectorySample SeedCrash::lead_sample(Eigen::Index i) const {
  return {t[i], lead.position[i], lead.speed[i], lead.acceleration[i]};
}

TrajectorySample SeedCrash::follower_sample(Eigen::Index i) const {
  return {t[i], follower.position[i], follower.speed[i], follower.acceleration[i]};
}

namespace {

std::string at(const SeedCrash& s, Eigen::Index i) {
  std::ostringstream os;
  os << "seed '" << s.id << "' sample " << i << " (t=" << s.t[i] << ")";
  return os.str();
}

void check_meta(const VehicleMeta& m, const std::string& who, const std::string& id) {
  if (!(m.mass > 0.0) || !(m.width > 0.0) || !(m.length > 0.0)) {
    throw ValidationError("seed '" + id + "': " + who + " mass, width and length must be positive");
  }
}

}  // namespace

void validate(const SeedCrash& s) {
  const auto n = s.size();
  if (n < 2) throw ValidationError("seed '" + s.id + "': needs at least two samples");
  for (const Vec* v : {&s.lead.position, &s.lead.speed, &s.lead.acceleration, &s.follower.position,
                       &s.follower.speed, &s.follower.acceleration}) {
    if (v->size() != n) throw ValidationError("seed '" + s.id + "': tracks do not share the time base");
    if (!v->allFinite()) throw ValidationError("seed '" + s.id + "': non-finite sample value");
  }
  if (!s.t.allFinite()) throw ValidationError("seed '" + s.id + "': non-finite time stamp");
  for (Eigen::Index i = 1; i < n; ++i) {
    if (!(s.t[i] > s.t[i - 1])) throw ValidationError(at(s, i) + ": time is not strictly increasing");
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    if (s.lead.speed[i] < 0.0 || s.follower.speed[i] < 0.0) {
      throw ValidationError(at(s, i) + ": negative speed");
    }
  }
  check_meta(s.lead_meta, "lead", s.id);
  check_meta(s.follower_meta, "follower", s.id);
  for (Eigen::Index i = 0; i + 1 < n; ++i) {
    if (s.gap(i) < 0.0) throw ValidationError(at(s, i) + ": negative gap before the final sample");
  }
  if (s.gap(n - 1) > kCollisionTolerance) {
    throw ValidationError("seed '" + s.id + "': seed does not end in collision (final gap " +
                          io::format_double(s.gap(n - 1)) + " m)");
  }
}

std::optional<Eigen::Index> find_deceleration_onset(const Vec& t, const Vec& acceleration,
                                                    double threshold, double sustain) {
  const auto n = t.size();
  Eigen::Index run_start = -1;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (acceleration[i] <= threshold) {
      if (run_start < 0) run_start = i;
      if (t[i] - t[run_start] >= sustain - 1e-9) return run_start;
    } else {
      run_start = -1;
    }
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Seed files

namespace {

constexpr const char* kSeedHeader = "t,lead_pos,lead_speed,lead_acc,foll_pos,foll_speed,foll_acc";

json meta_json(const VehicleMeta& m) {
  json j = {{"mass", m.mass}, {"width", m.width}, {"length", m.length}};
  if (!m.id.empty()) j["id"] = m.id;
  return j;
}

VehicleMeta meta_from_json(const json& j, const std::string& where) {
  if (!j.is_object()) throw ParseError(where + ": expected an object");
  VehicleMeta m;
  try {
    m.mass = j.at("mass").get<double>();
    m.width = j.at("width").get<double>();
    m.length = j.at("length").get<double>();
    if (j.contains("id")) m.id = j.at("id").get<std::string>();
  } catch (const json::exception& e) {
    throw ParseError(where + ": " + e.what());
  }
  return m;
}

}  // namespace

SeedCrash load_seed(const fs::path& csv_path) {
  const auto rows = io::read_csv(csv_path);
  if (rows.empty() || io::join_row(rows.front()) != kSeedHeader) {
    throw ParseError(csv_path.string() + ": expected header '" + kSeedHeader + "'");
  }
  const auto n = static_cast<Eigen::Index>(rows.size() - 1);
  SeedCrash s;
  s.t.resize(n);
  for (Track* tr : {&s.lead, &s.follower}) {
    tr->position.resize(n);
    tr->speed.resize(n);
    tr->acceleration.resize(n);
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = rows[static_cast<std::size_t>(i) + 1];
    const std::string ctx = csv_path.filename().string() + " line " + std::to_string(i + 2);
    if (r.size() != 7) throw ParseError(ctx + ": expected 7 fields");
    s.t[i] = io::parse_double(r[0], ctx);
    s.lead.position[i] = io::parse_double(r[1], ctx);
    s.lead.speed[i] = io::parse_double(r[2], ctx);
    s.lead.acceleration[i] = io::parse_double(r[3], ctx);
    s.follower.position[i] = io::parse_double(r[4], ctx);
    s.follower.speed[i] = io::parse_double(r[5], ctx);
    s.follower.acceleration[i] = io::parse_double(r[6], ctx);
  }

  fs::path sidecar = csv_path;
  sidecar.replace_extension(".json");
  const json meta = io::read_json(sidecar);
  try {
    s.id = meta.at("id").get<std::string>();
    s.lead_meta = meta_from_json(meta.at("lead"), sidecar.string() + " lead");
    s.follower_meta = meta_from_json(meta.at("follower"), sidecar.string() + " follower");
    if (meta.contains("seed_delta_v_kmh") && !meta["seed_delta_v_kmh"].is_null()) {
      s.seed_delta_v_kmh = meta["seed_delta_v_kmh"].get<double>();
    }
  } catch (const json::exception& e) {
    throw ParseError(sidecar.string() + ": " + e.what());
  }
  validate(s);
  return s;
}

void save_seed(const SeedCrash& s, const fs::path& csv_path) {
  std::string out = std::string(kSeedHeader) + "\n";
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    out += io::join_row({io::format_double(s.t[i]), io::format_double(s.lead.position[i]),
                         io::format_double(s.lead.speed[i]), io::format_double(s.lead.acceleration[i]),
                         io::format_double(s.follower.position[i]),
                         io::format_double(s.follower.speed[i]),
                         io::format_double(s.follower.acceleration[i])});
    out += '\n';
  }
  io::write_text(csv_path, out);

  json meta = {{"id", s.id}, {"lead", meta_json(s.lead_meta)}, {"follower", meta_json(s.follower_meta)}};
  if (s.seed_delta_v_kmh) meta["seed_delta_v_kmh"] = *s.seed_delta_v_kmh;
  fs::path sidecar = csv_path;
  sidecar.replace_extension(".json");
  io::write_json(sidecar, meta);
}

std::vector<SeedCrash> load_seed_dir(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw ParseError(dir.string() + ": not a directory");
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.path().extension() != ".csv") continue;
    fs::path sidecar = entry.path();
    sidecar.replace_extension(".json");
    if (fs::exists(sidecar)) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<SeedCrash> seeds;
  seeds.reserve(files.size());
  for (const auto& f : files) seeds.push_back(load_seed(f));
  std::sort(seeds.begin(), seeds.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  return seeds;
}

// ---------------------------------------------------------------------------
// Counterfactual construction

namespace {

CounterfactualSeed build_counterfactual(const SeedCrash& s, Eigen::Index n_orig, double extension) {
  if (extension < 0.0) throw ValidationError("horizon extension must be non-negative");
  const double t0 = s.t[0];
  const double t_last = s.t[n_orig - 1];
  const double step = n_orig > 1 ? (t_last - t0) / static_cast<double>(n_orig - 1) : 0.01;
  const auto n_ext = static_cast<Eigen::Index>(std::llround(extension / step));
  const Eigen::Index n = n_orig + n_ext;

  CounterfactualSeed cf;
  cf.original_samples = n_orig;
  SeedCrash& out = cf.scenario;
  out.id = s.id;
  out.lead_meta = s.lead_meta;
  out.follower_meta = s.follower_meta;
  out.seed_delta_v_kmh = s.seed_delta_v_kmh;

  out.t.resize(n);
  out.t.head(n_orig) = s.t.head(n_orig);
  for (Eigen::Index k = 1; k <= n_ext; ++k) {
    out.t[n_orig - 1 + k] = t_last + static_cast<double>(k) * step;
  }

  const Vec orig_t = s.t.head(n_orig);
  const auto f_onset = find_deceleration_onset(orig_t, s.follower.acceleration.head(n_orig));
  double vc = s.follower.speed[0];
  if (f_onset && *f_onset > 0) vc = s.follower.speed[*f_onset - 1];
  cf.follower_speed = vc;

  const double fp0 = s.follower.position[0];
  out.follower.position = (fp0 + vc * (out.t.array() - t0)).matrix();
  out.follower.speed = Vec::Constant(n, vc);
  out.follower.acceleration = Vec::Zero(n);

  out.lead.position.resize(n);
  out.lead.speed.resize(n);
  out.lead.acceleration.resize(n);
  out.lead.position.head(n_orig) = s.lead.position.head(n_orig);
  out.lead.speed.head(n_orig) = s.lead.speed.head(n_orig);
  out.lead.acceleration.head(n_orig) = s.lead.acceleration.head(n_orig);
  const double lp_last = s.lead.position[n_orig - 1];
  const double lv_last = s.lead.speed[n_orig - 1];
  for (Eigen::Index i = n_orig; i < n; ++i) {
    out.lead.position[i] = lp_last + lv_last * (out.t[i] - t_last);
    out.lead.speed[i] = lv_last;
    out.lead.acceleration[i] = 0.0;
  }

  if (s.lead.speed[0] < kStandstillSpeed) {
    cf.lead_behavior = LeadBehavior::kStandstill;
  } else if (const auto l_onset = find_deceleration_onset(orig_t, s.lead.acceleration.head(n_orig))) {
    cf.lead_behavior = LeadBehavior::kBraking;
    cf.brake_light_onset = s.t[*l_onset];
  } else {
    cf.lead_behavior = LeadBehavior::kNonBraking;
  }
  return cf;
}

}  // namespace

CounterfactualSeed remove_evasive_maneuver(const SeedCrash& seed, double horizon_extension) {
  validate(seed);
  return build_counterfactual(seed, seed.size(), horizon_extension);
}

CounterfactualSeed remove_evasive_maneuver(const CounterfactualSeed& cf, double horizon_extension) {
  auto out = build_counterfactual(cf.scenario, cf.original_samples, horizon_extension);
  out.anchor_time = cf.anchor_time;
  return out;
}

// ---------------------------------------------------------------------------
// Synthesis

namespace {

Range range_from_json(const json& doc, const char* key, Range fallback) {
  if (!doc.contains(key)) return fallback;
  const json& v = doc.at(key);
  if (!v.is_array() || v.size() != 2) {
    throw ValidationError(std::string("synthesis config: '") + key + "' must be [min, max]");
  }
  Range r{v[0].get<double>(), v[1].get<double>()};
  if (!(r.min <= r.max)) throw ValidationError(std::string("synthesis config: '") + key + "' has min > max");
  return r;
}

template <typename T>
T value_or(const json& doc, const char* key, T fallback) {
  return doc.contains(key) ? doc.at(key).get<T>() : fallback;
}

void require(bool ok, const std::string& what) {
  if (!ok) throw ValidationError("synthesis config: " + what);
}

}  // namespace

SynthConfig synth_config_from_json(const json& doc) {
  SynthConfig c;
  if (!doc.is_object()) throw ValidationError("synthesis config must be a JSON object");
  try {
    c.n_seeds = value_or(doc, "n_seeds", c.n_seeds);
    c.dt = value_or(doc, "dt", c.dt);
    c.window = value_or(doc, "window", c.window);
    c.max_duration = value_or(doc, "max_duration", c.max_duration);
    c.max_attempts = value_or(doc, "max_attempts", c.max_attempts);
    c.follower_speed = range_from_json(doc, "follower_speed", c.follower_speed);
    c.time_headway = range_from_json(doc, "time_headway", c.time_headway);
    c.min_gap = value_or(doc, "min_gap", c.min_gap);
    if (doc.contains("lead_mix")) {
      const json& mix = doc.at("lead_mix");
      c.mix_braking = value_or(mix, "braking", 0.0);
      c.mix_non_braking = value_or(mix, "non_braking", 0.0);
      c.mix_standstill = value_or(mix, "standstill", 0.0);
    }
    c.braking_speed_ratio = range_from_json(doc, "braking_speed_ratio", c.braking_speed_ratio);
    c.lead_brake_onset = range_from_json(doc, "lead_brake_onset", c.lead_brake_onset);
    c.lead_decel = range_from_json(doc, "lead_decel", c.lead_decel);
    c.lead_jerk = value_or(doc, "lead_jerk", c.lead_jerk);
    c.non_braking_speed_ratio = range_from_json(doc, "non_braking_speed_ratio", c.non_braking_speed_ratio);
    c.standstill_gap = range_from_json(doc, "standstill_gap", c.standstill_gap);
    c.follower_brake_probability = value_or(doc, "follower_brake_probability", c.follower_brake_probability);
    c.follower_brake_ttc = range_from_json(doc, "follower_brake_ttc", c.follower_brake_ttc);
    c.follower_decel = range_from_json(doc, "follower_decel", c.follower_decel);
    c.follower_jerk = value_or(doc, "follower_jerk", c.follower_jerk);
    c.mass = range_from_json(doc, "mass", c.mass);
    c.width = range_from_json(doc, "width", c.width);
    c.length = range_from_json(doc, "length", c.length);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("synthesis config: ") + e.what());
  }

  require(c.n_seeds >= 1, "n_seeds must be >= 1");
  require(c.dt > 0.0 && c.window > 0.0 && c.max_duration > c.window, "dt, window, max_duration invalid");
  require(c.max_attempts >= 1, "max_attempts must be >= 1");
  require(c.follower_speed.min > 0.0, "follower_speed must be positive");
  require(c.time_headway.min > 0.0 && c.min_gap >= 0.0, "headway must be positive");
  require(c.mix_braking >= 0.0 && c.mix_non_braking >= 0.0 && c.mix_standstill >= 0.0 &&
              c.mix_braking + c.mix_non_braking + c.mix_standstill > 0.0,
          "lead_mix weights must be non-negative with a positive sum");
  require(c.braking_speed_ratio.min > 0.0 && c.non_braking_speed_ratio.min > 0.0,
          "lead speed ratios must be positive");
  require(c.lead_decel.min > 0.0 && c.lead_jerk > 0.0, "lead braking must be positive");
  require(c.standstill_gap.min > 0.0, "standstill_gap must be positive");
  require(c.follower_brake_probability >= 0.0 && c.follower_brake_probability <= 1.0,
          "follower_brake_probability must be in [0, 1]");
  require(c.follower_decel.min > 0.0 && c.follower_jerk > 0.0, "follower braking must be positive");
  require(c.mass.min > 0.0 && c.width.min > 0.0 && c.length.min > 0.0, "vehicle sizes must be positive");
  return c;
}

json to_json(const SynthConfig& c) {
  auto r = [](Range x) { return json::array({x.min, x.max}); };
  return {
      {"n_seeds", c.n_seeds},
      {"dt", c.dt},
      {"window", c.window},
      {"max_duration", c.max_duration},
      {"max_attempts", c.max_attempts},
      {"follower_speed", r(c.follower_speed)},
      {"time_headway", r(c.time_headway)},
      {"min_gap", c.min_gap},
      {"lead_mix", {{"braking", c.mix_braking}, {"non_braking", c.mix_non_braking}, {"standstill", c.mix_standstill}}},
      {"braking_speed_ratio", r(c.braking_speed_ratio)},
      {"lead_brake_onset", r(c.lead_brake_onset)},
      {"lead_decel", r(c.lead_decel)},
      {"lead_jerk", c.lead_jerk},
      {"non_braking_speed_ratio", r(c.non_braking_speed_ratio)},
      {"standstill_gap", r(c.standstill_gap)},
      {"follower_brake_probability", c.follower_brake_probability},
      {"follower_brake_ttc", r(c.follower_brake_ttc)},
      {"follower_decel", r(c.follower_decel)},
      {"follower_jerk", c.follower_jerk},
      {"mass", r(c.mass)},
      {"width", r(c.width)},
      {"length", r(c.length)},
  };
}

RawSeedRun simulate_raw_seed(const SeedParams& p, double dt, double max_duration) {
  const auto n_max = static_cast<std::size_t>(std::ceil(max_duration / dt));
  std::vector<double> t, lp, ls, la, fp, fsp, fa;
  double x_l = p.initial_gap;
  double v_l = p.lead_behavior == LeadBehavior::kStandstill ? 0.0 : p.lead_speed;
  double x_f = 0.0;
  double v_f = p.follower_speed;
  std::optional<double> follower_brake_start;

  RawSeedRun run;
  for (std::size_t n = 0; n <= n_max; ++n) {
    const double tn = static_cast<double>(n) * dt;
    double a_l = 0.0;
    if (p.lead_behavior == LeadBehavior::kBraking && tn >= p.lead_brake_onset && v_l > 0.0) {
      a_l = -std::min(p.lead_jerk * (tn - p.lead_brake_onset), p.lead_decel);
    }
    if (p.follower_brakes && !follower_brake_start) {
      const double closing = v_f - v_l;
      if (closing > 0.0 && (x_l - x_f) / closing <= p.follower_brake_ttc) follower_brake_start = tn;
    }
    double a_f = 0.0;
    if (follower_brake_start && v_f > 0.0) {
      a_f = -std::min(p.follower_jerk * (tn - *follower_brake_start), p.follower_decel);
    }
    t.push_back(tn);
    lp.push_back(x_l);
    ls.push_back(v_l);
    la.push_back(a_l);
    fp.push_back(x_f);
    fsp.push_back(v_f);
    fa.push_back(a_f);

    const double gap = x_l - x_f;
    if (gap <= 0.0) {
      if (n == 0) break;
      const double g_prev = lp[n - 1] - fp[n - 1];
      const double alpha = g_prev / (g_prev - gap);
      run.collided = true;
      run.collision_index = static_cast<Eigen::Index>(n);
      run.collision_time = t[n - 1] + alpha * dt;
      run.v1 = fsp[n - 1] + alpha * (fsp[n] - fsp[n - 1]);
      run.v2 = ls[n - 1] + alpha * (ls[n] - ls[n - 1]);
      break;
    }
    if (v_f == 0.0 && follower_brake_start) break;  // stopped short; lead never reverses

    v_l = std::max(0.0, v_l + a_l * dt);
    x_l += v_l * dt;
    v_f = std::max(0.0, v_f + a_f * dt);
    x_f += v_f * dt;
  }

  auto to_vec = [](const std::vector<double>& v) {
    return Vec(Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size())));
  };
  run.full.t = to_vec(t);
  run.full.lead = {to_vec(lp), to_vec(ls), to_vec(la)};
  run.full.follower = {to_vec(fp), to_vec(fsp), to_vec(fa)};
  run.full.lead_meta = p.lead_meta;
  run.full.follower_meta = p.follower_meta;
  return run;
}

namespace {

std::vector<LeadBehavior> lead_classes(const SynthConfig& c, Rng& rng) {
  const double weights[3] = {c.mix_braking, c.mix_non_braking, c.mix_standstill};
  const double total = weights[0] + weights[1] + weights[2];
  int counts[3];
  double remainders[3];
  int assigned = 0;
  for (int k = 0; k < 3; ++k) {
    const double exact = c.n_seeds * weights[k] / total;
    counts[k] = static_cast<int>(std::floor(exact + 1e-9));
    remainders[k] = exact - counts[k];
    assigned += counts[k];
  }
  while (assigned < c.n_seeds) {
    int best = 0;
    for (int k = 1; k < 3; ++k) {
      if (remainders[k] > remainders[best]) best = k;
    }
    ++counts[best];
    remainders[best] = -1.0;
    ++assigned;
  }
  std::vector<LeadBehavior> out;
  const LeadBehavior kinds[3] = {LeadBehavior::kBraking, LeadBehavior::kNonBraking, LeadBehavior::kStandstill};
  for (int k = 0; k < 3; ++k) out.insert(out.end(), static_cast<std::size_t>(counts[k]), kinds[k]);
  rng.shuffle(out);
  return out;
}

SeedParams sample_params(const SynthConfig& c, LeadBehavior kind, Rng& rng) {
  SeedParams p;
  p.lead_behavior = kind;
  p.follower_speed = rng.uniform(c.follower_speed.min, c.follower_speed.max);
  const double headway = rng.uniform(c.time_headway.min, c.time_headway.max);
  const double brake_ratio = rng.uniform(c.braking_speed_ratio.min, c.braking_speed_ratio.max);
  const double cruise_ratio = rng.uniform(c.non_braking_speed_ratio.min, c.non_braking_speed_ratio.max);
  const double standstill_gap = rng.uniform(c.standstill_gap.min, c.standstill_gap.max);
  p.lead_brake_onset = rng.uniform(c.lead_brake_onset.min, c.lead_brake_onset.max);
  p.lead_decel = rng.uniform(c.lead_decel.min, c.lead_decel.max);
  p.lead_jerk = c.lead_jerk;
  p.follower_brakes = rng.uniform() < c.follower_brake_probability;
  p.follower_brake_ttc = rng.uniform(c.follower_brake_ttc.min, c.follower_brake_ttc.max);
  p.follower_decel = rng.uniform(c.follower_decel.min, c.follower_decel.max);
  p.follower_jerk = c.follower_jerk;
  for (VehicleMeta* m : {&p.lead_meta, &p.follower_meta}) {
    m->mass = rng.uniform(c.mass.min, c.mass.max);
    m->width = rng.uniform(c.width.min, c.width.max);
    m->length = rng.uniform(c.length.min, c.length.max);
  }
  p.lead_meta.id = "lead";
  p.follower_meta.id = "follower";

  switch (kind) {
    case LeadBehavior::kBraking:
      p.lead_speed = p.follower_speed * brake_ratio;
      p.initial_gap = std::max(c.min_gap, headway * p.follower_speed);
      break;
    case LeadBehavior::kNonBraking:
      p.lead_speed = p.follower_speed * cruise_ratio;
      p.initial_gap = std::max(c.min_gap, headway * p.follower_speed);
      break;
    case LeadBehavior::kStandstill:
      p.lead_speed = 0.0;
      p.initial_gap = standstill_gap;
      break;
  }
  return p;
}

SeedCrash truncate_to_window(const RawSeedRun& run, const SynthConfig& c) {
  const auto keep = static_cast<Eigen::Index>(std::llround(c.window / c.dt));
  const Eigen::Index end = run.collision_index;
  const Eigen::Index start = std::max<Eigen::Index>(0, end - keep);
  const Eigen::Index n = end - start + 1;
  SeedCrash s;
  s.lead_meta = run.full.lead_meta;
  s.follower_meta = run.full.follower_meta;
  s.t.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) s.t[i] = static_cast<double>(i) * c.dt;
  const double origin = run.full.follower.position[start];
  s.lead.position = run.full.lead.position.segment(start, n).array() - origin;
  s.lead.speed = run.full.lead.speed.segment(start, n);
  s.lead.acceleration = run.full.lead.acceleration.segment(start, n);
  s.follower.position = run.full.follower.position.segment(start, n).array() - origin;
  s.follower.speed = run.full.follower.speed.segment(start, n);
  s.follower.acceleration = run.full.follower.acceleration.segment(start, n);
  return s;
}

bool collides_without_response(const CounterfactualSeed& cf) {
  const SeedCrash& s = cf.scenario;
  for (Eigen::Index i = 1; i < s.size(); ++i) {
    if (s.gap(i) <= 0.0) return s.follower.speed[i] > s.lead.speed[i];
  }
  return false;
}

}  // namespace

std::vector<SeedCrash> synthesize_seeds(const SynthConfig& c, std::uint64_t rng_seed) {
  Rng rng(rng_seed);
  const auto classes = lead_classes(c, rng);
  const int width = std::max(3, static_cast<int>(std::to_string(c.n_seeds).size()));

  std::vector<SeedCrash> seeds;
  seeds.reserve(static_cast<std::size_t>(c.n_seeds));
  for (int i = 0; i < c.n_seeds; ++i) {
    bool done = false;
    int no_collision = 0;
    int no_counterfactual = 0;
    int class_mismatch = 0;
    for (int attempt = 0; attempt < c.max_attempts && !done; ++attempt) {
      const SeedParams p = sample_params(c, classes[static_cast<std::size_t>(i)], rng);
      const RawSeedRun run = simulate_raw_seed(p, c.dt, c.max_duration);
      if (!run.collided || !(run.v1 > run.v2)) {
        ++no_collision;
        continue;
      }
      SeedCrash s = truncate_to_window(run, c);
      std::string id = std::to_string(i + 1);
      if (id.size() < static_cast<std::size_t>(width)) id.insert(0, static_cast<std::size_t>(width) - id.size(), '0');
      s.id = "seed_" + id;
      s.seed_delta_v_kmh = delta_v_kmh(run.v1, run.v2, p.follower_meta.mass, p.lead_meta.mass);
      validate(s);
      const CounterfactualSeed cf = remove_evasive_maneuver(s);
      if (!collides_without_response(cf)) {
        ++no_counterfactual;
        continue;
      }
      // The class must be recoverable from the kept window alone.
      if (cf.lead_behavior != classes[static_cast<std::size_t>(i)]) {
        ++class_mismatch;
        continue;
      }
      seeds.push_back(std::move(s));
      done = true;
    }
    if (!done) {
      std::ostringstream os;
      os << "could not synthesize seed " << (i + 1) << " (" << to_string(classes[static_cast<std::size_t>(i)])
         << " lead) in " << c.max_attempts << " attempts: " << no_collision
         << " runs ended without a closing collision, " << no_counterfactual
         << " counterfactuals did not collide, " << class_mismatch
         << " windows did not show the intended lead behaviour; check the speed-ratio, headway and follower-braking ranges";
      throw GenerationError(os.str());
    }
  }
  return seeds;
}

}  // namespace rearsim
