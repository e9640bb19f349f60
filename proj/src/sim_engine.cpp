#include "rearsim/sim_engine.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <map>
#include <thread>

#include "rearsim/errors.hpp"
#include "rearsim/io.hpp"
#include "rearsim/looming.hpp"
#include "rearsim/rng.hpp"

namespace rearsim {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// Kernel

namespace {

/// Lead state on the counterfactual's uniform grid, linear between samples
/// and constant-speed beyond the last one.
class LeadTrack {
 public:
  explicit LeadTrack(const SeedCrash& s)
      : pos_(s.lead.position), speed_(s.lead.speed), n_(s.size()) {
    step_ = n_ > 1 ? (s.t[n_ - 1] - s.t[0]) / static_cast<double>(n_ - 1) : 1.0;
  }

  // u is the fractional sample index.
  void at(double u, double& x, double& v) const {
    if (u >= static_cast<double>(n_ - 1)) {
      v = speed_[n_ - 1];
      x = pos_[n_ - 1] + v * (u - static_cast<double>(n_ - 1)) * step_;
      return;
    }
    const auto i = static_cast<Eigen::Index>(u);
    const double f = u - static_cast<double>(i);
    x = pos_[i] + f * (pos_[i + 1] - pos_[i]);
    v = speed_[i] + f * (speed_[i + 1] - speed_[i]);
  }

  double step() const { return step_; }

 private:
  const Vec& pos_;
  const Vec& speed_;
  Eigen::Index n_;
  double step_;
};

}  // namespace

SimOutcome simulate(const CounterfactualSeed& cf, double onset, double d_max, double jerk, double dt) {
  if (!(dt > 0.0)) throw DomainError("simulate: dt must be positive");
  if (!(d_max > 0.0)) throw DomainError("simulate: d_max must be positive");
  const SeedCrash& s = cf.scenario;
  const LeadTrack lead(s);
  const BrakeProfile profile{onset, jerk, d_max};

  const double t0 = s.t[0];
  const double u_step = dt / lead.step();
  const double u_orig_end = static_cast<double>(cf.original_samples - 1);
  const double v_lead_final = s.lead.speed[s.size() - 1];
  const auto n_steps = static_cast<long long>(std::ceil((cf.horizon_end() - t0) / dt - 1e-9));

  double x = s.follower.position[0];
  double v = cf.follower_speed;
  double lx = 0.0;
  double lv = 0.0;
  lead.at(0.0, lx, lv);

  SimOutcome out;
  double gap = lx - x;
  if (gap <= 0.0) {
    if (v > lv) out = {true, t0, v, lv, true};
    return out;
  }

  bool braked = false;
  for (long long n = 0; n < n_steps; ++n) {
    const double tn = t0 + static_cast<double>(n) * dt;
    const double decel = brake_deceleration(profile, tn);
    if (decel > 0.0) braked = true;

    const double prev_gap = gap;
    const double prev_v = v;
    const double prev_lv = lv;
    v = std::max(0.0, v - decel * dt);
    x += v * dt;
    const double u = static_cast<double>(n + 1) * u_step;
    lead.at(u, lx, lv);
    gap = lx - x;

    if (gap <= 0.0) {
      const double frac = prev_gap / (prev_gap - gap);
      const double v1 = prev_v + frac * (v - prev_v);
      const double v2 = prev_lv + frac * (lv - prev_lv);
      if (v1 > v2) out = {true, tn + frac * dt, v1, v2, !braked};
      return out;
    }
    if (v == 0.0) return out;
    if (u >= u_orig_end && v <= v_lead_final) return out;
  }
  return out;
}

const char* to_string(ResponseModel m) {
  return m == ResponseModel::kCbm ? "cbm" : "blom";
}

ResponseModel response_model_from_string(const std::string& s) {
  if (s == "cbm" || s == "CBM") return ResponseModel::kCbm;
  if (s == "blom" || s == "BLOM") return ResponseModel::kBlom;
  throw ValidationError("unknown response model '" + s + "' (expected cbm or blom)");
}

double OutcomeMatrix::crash_probability() const {
  double p = 0.0;
  for (Eigen::Index d = 0; d < n_decel(); ++d) {
    for (Eigen::Index a = 0; a < n_axis1(); ++a) {
      if (cell(a, d).crashed) p += p_cell(a, d);
    }
  }
  return p;
}

std::size_t OutcomeMatrix::crash_count() const {
  return static_cast<std::size_t>(std::count_if(cells.begin(), cells.end(), [](const auto& c) { return c.crashed; }));
}

// ---------------------------------------------------------------------------
// Sweep

OutcomeMatrix sweep_seed(const CounterfactualSeed& cf, const Vec& onsets, const Vec& axis1, const Vec& axis1_prob,
                         const DecelDistribution& decels, ResponseModel model, const SweepOptions& opts,
                         std::vector<SweepDiagnostic>* diagnostics) {
  const Eigen::Index na = axis1.size();
  const Eigen::Index nd = decels.d_max.size();
  if (na == 0 || nd == 0) throw ValidationError("sweep_seed: empty axis");
  if (onsets.size() != na || axis1_prob.size() != na) throw ValidationError("sweep_seed: axis size mismatch");
  for (Eigen::Index a = 1; a < na; ++a) {
    if (onsets[a] < onsets[a - 1]) throw ValidationError("sweep_seed: onsets must be nondecreasing");
  }

  OutcomeMatrix m;
  m.seed_id = cf.scenario.id;
  m.model = model;
  m.axis1 = axis1;
  m.axis1_prob = axis1_prob;
  m.decel = decels.d_max;
  m.decel_prob = decels.probabilities;
  m.follower_mass = cf.scenario.follower_meta.mass;
  m.lead_mass = cf.scenario.lead_meta.mass;
  m.seed_delta_v_kmh = cf.scenario.seed_delta_v_kmh;
  m.cells.resize(static_cast<std::size_t>(na * nd));

  m.no_response = simulate(cf, kNever, decels.d_max[0], opts.jerk, opts.dt);
  m.kernel_calls = 1;

  Rng rng(opts.rng_seed);
  for (Eigen::Index d = 0; d < nd; ++d) {
    std::vector<std::optional<SimOutcome>> row(static_cast<std::size_t>(na));
    auto eval = [&](Eigen::Index a) -> const SimOutcome& {
      auto& slot = row[static_cast<std::size_t>(a)];
      if (!slot) {
        slot = simulate(cf, onsets[a], decels.d_max[d], opts.jerk, opts.dt);
        ++m.kernel_calls;
      }
      return *slot;
    };
    auto exhaustive = [&] {
      for (Eigen::Index a = 0; a < na; ++a) m.cells[m.index(a, d)] = eval(a);
    };

    if (opts.exhaustive) {
      exhaustive();
      continue;
    }

    // First crashing bin; later onsets can only make the outcome worse.
    Eigen::Index lo = 0;
    Eigen::Index hi = na;
    while (lo < hi) {
      const Eigen::Index mid = lo + (hi - lo) / 2;
      if (eval(mid).crashed) hi = mid;
      else lo = mid + 1;
    }
    const Eigen::Index boundary = lo;

    // Walk up until braking no longer starts before impact; from there on
    // every cell reproduces the no-response outcome exactly.
    bool violated = false;
    for (Eigen::Index a = boundary; a < na; ++a) {
      const SimOutcome& o = eval(a);
      if (!o.crashed) {
        violated = true;
        break;
      }
      if (o.max_severity) break;
    }

    std::vector<Eigen::Index> filled;
    for (Eigen::Index a = 0; a < na && !violated; ++a) {
      if (row[static_cast<std::size_t>(a)]) {
        m.cells[m.index(a, d)] = *row[static_cast<std::size_t>(a)];
      } else {
        m.cells[m.index(a, d)] = a < boundary ? SimOutcome{} : m.no_response;
        filled.push_back(a);
      }
    }

    Eigen::Index bad = -1;
    if (!violated && !filled.empty()) {
      const Eigen::Index a = filled[rng.index(filled.size())];
      if (!(eval(a) == m.cells[m.index(a, d)])) bad = a;
    }
    if (violated || bad >= 0) {
      if (diagnostics) diagnostics->push_back({m.seed_id, d, bad >= 0 ? bad : boundary});
      ++m.fallback_rows;
      exhaustive();
    }
  }
  return m;
}

// ---------------------------------------------------------------------------
// Campaign

CampaignConfig campaign_config_from_json(const json& doc) {
  CampaignConfig c;
  if (!doc.is_object()) throw ValidationError("campaign config must be a JSON object");
  try {
    if (doc.contains("model")) c.model = response_model_from_string(doc.at("model").get<std::string>());
    c.cbm.inv_tau_threshold = doc.value("inv_tau_threshold", c.cbm.inv_tau_threshold);
    c.cbm.response_delay = doc.value("response_delay", c.cbm.response_delay);
    c.cbm.jerk_mean = doc.value("jerk", c.cbm.jerk_mean);
    c.cbm.no_response_fraction = doc.value("no_response_fraction", c.cbm.no_response_fraction);
    if (doc.contains("reaction_time")) {
      const json& rt = doc.at("reaction_time");
      c.reaction_time_mean = rt.value("mean", c.reaction_time_mean);
      c.reaction_time_variance = rt.value("variance", c.reaction_time_variance);
    }
    if (doc.contains("glance_cut") && !doc.at("glance_cut").is_null()) c.glance_cut = doc.at("glance_cut").get<double>();
    c.dt = doc.value("dt", c.dt);
    c.horizon_extension = doc.value("horizon_extension", c.horizon_extension);
    c.rng_seed = doc.value("rng_seed", c.rng_seed);
    c.exhaustive = doc.value("exhaustive", c.exhaustive);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("campaign config: ") + e.what());
  }
  c.cbm.validate();
  if (!(c.dt > 0.0)) throw ValidationError("campaign config: dt must be positive");
  if (!(c.horizon_extension >= 0.0)) throw ValidationError("campaign config: horizon_extension must be >= 0");
  if (c.glance_cut && !(*c.glance_cut > 0.0)) throw ValidationError("campaign config: glance_cut must be positive");
  return c;
}

json to_json(const CampaignConfig& c) {
  json doc = {
      {"model", to_string(c.model)},
      {"inv_tau_threshold", c.cbm.inv_tau_threshold},
      {"response_delay", c.cbm.response_delay},
      {"jerk", c.cbm.jerk_mean},
      {"no_response_fraction", c.cbm.no_response_fraction},
      {"reaction_time", {{"mean", c.reaction_time_mean}, {"variance", c.reaction_time_variance}}},
      {"glance_cut", nullptr},
      {"dt", c.dt},
      {"horizon_extension", c.horizon_extension},
      {"rng_seed", c.rng_seed},
      {"exhaustive", c.exhaustive},
  };
  if (c.glance_cut) doc["glance_cut"] = *c.glance_cut;
  return doc;
}

OvershootDistribution campaign_overshoot(const GlanceDistribution& glances, std::optional<double> cut) {
  return overshoot_transform(cut ? cut_glances(glances, *cut) : glances);
}

namespace {

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

struct SeedTask {
  const SeedCrash* seed = nullptr;
  std::optional<OutcomeMatrix> matrix;
  std::optional<Exclusion> exclusion;
  std::vector<SweepDiagnostic> diagnostics;
  std::exception_ptr error;
};

}  // namespace

CampaignResult run_campaign(const std::vector<SeedCrash>& seeds, const CampaignConfig& cfg,
                            const GlanceDistribution* glances, const DecelDistribution& decels, unsigned workers) {
  cfg.cbm.validate();
  validate(decels);

  Vec axis1;
  Vec axis1_prob;
  if (cfg.model == ResponseModel::kCbm) {
    if (!glances) throw ValidationError("CBM campaign needs a glance distribution");
    const auto o = campaign_overshoot(*glances, cfg.glance_cut);
    axis1 = o.axis_values();
    axis1_prob = o.axis_probabilities();
  } else {
    const auto rt = discretize_reaction_time(cfg.reaction_time_mean, cfg.reaction_time_variance);
    axis1 = rt.times;
    axis1_prob = rt.probabilities;
  }

  std::vector<const SeedCrash*> order;
  order.reserve(seeds.size());
  for (const auto& s : seeds) order.push_back(&s);
  std::sort(order.begin(), order.end(), [](const auto* a, const auto* b) { return a->id < b->id; });

  std::vector<SeedTask> tasks(order.size());
  for (std::size_t i = 0; i < order.size(); ++i) tasks[i].seed = order[i];

  auto run_one = [&](SeedTask& task) {
    const SeedCrash& seed = *task.seed;
    const CounterfactualSeed cf = remove_evasive_maneuver(seed, cfg.horizon_extension);
    Vec onsets(axis1.size());
    if (cfg.model == ResponseModel::kCbm) {
      const auto anchor = find_anchor(looming_series(cf), cfg.cbm.inv_tau_threshold);
      for (Eigen::Index a = 0; a < axis1.size(); ++a) {
        onsets[a] = anchor ? cbm_onset(*anchor, axis1[a], cfg.cbm) : kNever;
      }
    } else {
      if (cf.lead_behavior != LeadBehavior::kBraking) {
        task.exclusion = Exclusion{seed.id, std::string("lead is ") + to_string(cf.lead_behavior)};
        return;
      }
      for (Eigen::Index a = 0; a < axis1.size(); ++a) onsets[a] = blom_onset(cf, axis1[a]);
    }
    SweepOptions opts;
    opts.exhaustive = cfg.exhaustive;
    opts.jerk = cfg.cbm.jerk_mean;
    opts.dt = cfg.dt;
    opts.rng_seed = derive_seed(cfg.rng_seed, fnv1a(seed.id));
    task.matrix = sweep_seed(cf, onsets, axis1, axis1_prob, decels, cfg.model, opts, &task.diagnostics);
  };

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < tasks.size(); i = next++) {
      try {
        run_one(tasks[i]);
      } catch (...) {
        tasks[i].error = std::current_exception();
      }
    }
  };
  const unsigned n_threads = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(tasks.size())));
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned i = 0; i < n_threads; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  CampaignResult result;
  result.model = cfg.model;
  for (auto& task : tasks) {
    if (task.error) std::rethrow_exception(task.error);
    if (task.exclusion) result.exclusions.push_back(std::move(*task.exclusion));
    if (task.matrix) {
      result.theoretical_cells += task.matrix->cells.size();
      result.kernel_calls += task.matrix->kernel_calls;
      result.matrices.push_back(std::move(*task.matrix));
    }
    for (auto& d : task.diagnostics) result.diagnostics.push_back(std::move(d));
  }
  return result;
}

// ---------------------------------------------------------------------------
// Persistence

namespace {

std::string fmt(double v) { return io::format_double(v); }

json vec_json(const Vec& v) {
  json a = json::array();
  for (double x : v) a.push_back(x);
  return a;
}

Vec json_vec(const json& a) {
  Vec v(static_cast<Eigen::Index>(a.size()));
  for (std::size_t i = 0; i < a.size(); ++i) v[static_cast<Eigen::Index>(i)] = a[i].get<double>();
  return v;
}

bool parse_flag(const std::string& s, const std::string& ctx) {
  if (s == "1") return true;
  if (s == "0") return false;
  throw ParseError(ctx + ": expected 0 or 1");
}

}  // namespace

void save_outcomes_csv(const std::vector<OutcomeMatrix>& matrices, const fs::path& csv) {
  std::string out = "seed_id,axis1_bin,decel_bin,crashed,v1,v2,max_severity,p_cell\n";
  for (const auto& m : matrices) {
    for (Eigen::Index d = 0; d < m.n_decel(); ++d) {
      for (Eigen::Index a = 0; a < m.n_axis1(); ++a) {
        const SimOutcome& c = m.cell(a, d);
        out += m.seed_id + "," + std::to_string(a) + "," + std::to_string(d) + "," + (c.crashed ? "1" : "0") + "," +
               fmt(c.v1) + "," + fmt(c.v2) + "," + (c.max_severity ? "1" : "0") + "," + fmt(m.p_cell(a, d)) + "\n";
      }
    }
  }
  io::write_text(csv, out);
}

void save_campaign(const CampaignResult& result, const fs::path& dir) {
  fs::create_directories(dir);
  save_outcomes_csv(result.matrices, dir / "outcomes.csv");

  std::string seeds =
      "seed_id,follower_mass_kg,lead_mass_kg,no_response_crashed,no_response_time,no_response_v1,no_response_v2,"
      "seed_delta_v_kmh,kernel_calls,fallback_rows\n";
  for (const auto& m : result.matrices) {
    seeds += m.seed_id + "," + fmt(m.follower_mass) + "," + fmt(m.lead_mass) + "," +
             (m.no_response.crashed ? "1" : "0") + "," + fmt(m.no_response.impact_time) + "," +
             fmt(m.no_response.v1) + "," + fmt(m.no_response.v2) + "," +
             (m.seed_delta_v_kmh ? fmt(*m.seed_delta_v_kmh) : std::string()) + "," + std::to_string(m.kernel_calls) +
             "," + std::to_string(m.fallback_rows) + "\n";
  }
  io::write_text(dir / "seeds.csv", seeds);

  json axes = {{"model", to_string(result.model)}};
  if (!result.matrices.empty()) {
    const auto& m = result.matrices.front();
    axes["axis1"] = vec_json(m.axis1);
    axes["axis1_prob"] = vec_json(m.axis1_prob);
    axes["decel"] = vec_json(m.decel);
    axes["decel_prob"] = vec_json(m.decel_prob);
  }
  io::write_json(dir / "axes.json", axes);

  std::size_t crash_cells = 0;
  for (const auto& m : result.matrices) crash_cells += m.crash_count();
  json excl = json::array();
  for (const auto& e : result.exclusions) excl.push_back({{"seed_id", e.seed_id}, {"reason", e.reason}});
  json diags = json::array();
  for (const auto& d : result.diagnostics) {
    diags.push_back({{"seed_id", d.seed_id}, {"decel_bin", d.decel_bin}, {"axis1_bin", d.axis1_bin}});
  }
  json summary = {
      {"model", to_string(result.model)},
      {"seeds", result.matrices.size()},
      {"excluded", result.exclusions.size()},
      {"exclusions", excl},
      {"theoretical_cells", result.theoretical_cells},
      {"simulated_cells", result.kernel_calls},
      {"crash_cells", crash_cells},
      {"fallback_diagnostics", diags},
  };
  io::write_json(dir / "summary.json", summary);
}

CampaignResult load_campaign(const fs::path& dir) {
  CampaignResult result;
  const json axes = io::read_json(dir / "axes.json");
  const json summary = io::read_json(dir / "summary.json");
  try {
    result.model = response_model_from_string(axes.at("model").get<std::string>());
    for (const auto& e : summary.at("exclusions")) {
      result.exclusions.push_back({e.at("seed_id").get<std::string>(), e.at("reason").get<std::string>()});
    }
    result.theoretical_cells = summary.at("theoretical_cells").get<std::size_t>();
    result.kernel_calls = summary.at("simulated_cells").get<std::size_t>();
  } catch (const json::exception& e) {
    throw ParseError("campaign summary: " + std::string(e.what()));
  }

  const auto seed_rows = io::read_csv(dir / "seeds.csv");
  if (seed_rows.empty()) throw ParseError("seeds.csv: missing header");
  std::map<std::string, std::size_t> by_id;
  for (std::size_t r = 1; r < seed_rows.size(); ++r) {
    const auto& row = seed_rows[r];
    const std::string ctx = "seeds.csv line " + std::to_string(r + 1);
    if (row.size() != 10) throw ParseError(ctx + ": expected 10 fields");
    OutcomeMatrix m;
    m.seed_id = row[0];
    m.model = result.model;
    m.follower_mass = io::parse_double(row[1], ctx);
    m.lead_mass = io::parse_double(row[2], ctx);
    m.no_response.crashed = parse_flag(row[3], ctx);
    m.no_response.impact_time = io::parse_double(row[4], ctx);
    m.no_response.v1 = io::parse_double(row[5], ctx);
    m.no_response.v2 = io::parse_double(row[6], ctx);
    m.no_response.max_severity = m.no_response.crashed;
    if (!row[7].empty()) m.seed_delta_v_kmh = io::parse_double(row[7], ctx);
    m.kernel_calls = static_cast<std::size_t>(io::parse_int(row[8], ctx));
    m.fallback_rows = static_cast<std::size_t>(io::parse_int(row[9], ctx));
    m.axis1 = json_vec(axes.at("axis1"));
    m.axis1_prob = json_vec(axes.at("axis1_prob"));
    m.decel = json_vec(axes.at("decel"));
    m.decel_prob = json_vec(axes.at("decel_prob"));
    m.cells.resize(static_cast<std::size_t>(m.n_axis1() * m.n_decel()));
    by_id[m.seed_id] = result.matrices.size();
    result.matrices.push_back(std::move(m));
  }

  const auto rows = io::read_csv(dir / "outcomes.csv");
  if (rows.empty() || io::join_row(rows[0]) != "seed_id,axis1_bin,decel_bin,crashed,v1,v2,max_severity,p_cell") {
    throw ParseError("outcomes.csv: unexpected header");
  }
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    const std::string ctx = "outcomes.csv line " + std::to_string(r + 1);
    if (row.size() != 8) throw ParseError(ctx + ": expected 8 fields");
    const auto it = by_id.find(row[0]);
    if (it == by_id.end()) throw ParseError(ctx + ": unknown seed '" + row[0] + "'");
    OutcomeMatrix& m = result.matrices[it->second];
    const auto a = static_cast<Eigen::Index>(io::parse_int(row[1], ctx));
    const auto d = static_cast<Eigen::Index>(io::parse_int(row[2], ctx));
    if (a < 0 || a >= m.n_axis1() || d < 0 || d >= m.n_decel()) throw ParseError(ctx + ": bin out of range");
    SimOutcome& c = m.cells[m.index(a, d)];
    c.crashed = parse_flag(row[3], ctx);
    c.v1 = io::parse_double(row[4], ctx);
    c.v2 = io::parse_double(row[5], ctx);
    c.max_severity = parse_flag(row[6], ctx);
  }
  return result;
}

}  // namespace rearsim
