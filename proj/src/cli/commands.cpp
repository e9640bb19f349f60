#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "rearsim/bias_transform.hpp"
#include "rearsim/cli.hpp"
#include "rearsim/errors.hpp"
#include "rearsim/fixtures.hpp"
#include "rearsim/io.hpp"
#include "rearsim/rng.hpp"
#include "rearsim/scenario.hpp"
#include "rearsim/sim_engine.hpp"
#include "rearsim/validation.hpp"

namespace rearsim::cli {

using nlohmann::json;

namespace {

std::string fmt(double v) { return io::format_double(v); }

json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

struct Config {
  json doc;
  fs::path base;
};

Config load_config(const Options& o) {
  if (o.config.empty()) throw ValidationError("--config is required");
  Config c{io::read_json(o.config), o.config.parent_path()};
  if (!c.doc.is_object()) throw ValidationError(o.config.string() + ": config must be a JSON object");
  return c;
}

void prepare_out(const Options& o) {
  if (o.out.empty()) throw ValidationError("--out is required");
  fs::create_directories(o.out);
}

fs::path resolve(const Config& c, const json& value, const std::string& key) {
  if (!value.is_string()) throw ValidationError("config: '" + key + "' must be a path string");
  return io::resolve(c.base, value.get<std::string>());
}

fs::path path_at(const Config& c, const std::string& key) {
  if (!c.doc.contains(key)) throw ValidationError("config: missing '" + key + "'");
  return resolve(c, c.doc[key], key);
}

template <typename T>
T value(const json& doc, const std::string& key, T fallback) {
  if (!doc.contains(key)) return fallback;
  try {
    return doc.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ValidationError("config: '" + key + "': " + e.what());
  }
}

void warn(const std::string& kind, const std::string& message, json extra = json::object()) {
  extra["warning"] = kind;
  extra["message"] = message;
  std::cerr << extra.dump() << "\n";
}

std::vector<InjuryRiskCurve> load_curves(const Config& c, std::vector<fs::path>* paths) {
  std::vector<InjuryRiskCurve> out;
  if (!c.doc.contains("risk_curves")) return out;
  for (const auto& p : c.doc["risk_curves"]) {
    const auto path = resolve(c, p, "risk_curves");
    out.push_back(InjuryRiskCurve::load(path));
    if (paths) paths->push_back(path);
  }
  return out;
}

double campaign_no_response(const fs::path& dir, ResponseModel model) {
  if (model != ResponseModel::kCbm) return 0.0;
  const auto p = dir / "config.json";
  if (!fs::exists(p)) return CbmConfig{}.no_response_fraction;
  return campaign_config_from_json(io::read_json(p)).cbm.no_response_fraction;
}

struct Weighted {
  PrevalenceWeighting pw;
  std::vector<WeightedSample> samples;
  DeltaVDistribution crash_cells;  // prevalence-weighted crash cells only
  DeltaVDistribution mixed;        // with the no-response share
};

Weighted weigh(const std::vector<OutcomeMatrix>& ms, double fraction, double bin_width, double lo, double hi) {
  Weighted w;
  w.pw = prevalence_weights(ms, lo, hi);
  if (w.pw.seeds.empty()) throw ValidationError("weighting: no seed has a crashing cell");
  w.samples = weighted_crash_samples(ms, w.pw);
  w.crash_cells = normalize(build_histogram(w.samples, bin_width));
  const auto nr = no_response_delta_vs(ms);
  w.mixed = mix_no_response(w.crash_cells, nr, fraction);
  w.mixed.count = w.crash_cells.count + (fraction > 0.0 ? static_cast<double>(nr.size()) : 0.0);
  return w;
}

std::pair<double, double> trim_of(const json& doc) {
  const auto t = value<std::vector<double>>(doc, "trim", {5.0, 95.0});
  if (t.size() != 2) throw ValidationError("config: 'trim' must hold two percentiles");
  return {t[0], t[1]};
}

std::optional<double> parse_cut(const json& v) {
  if (v.is_number()) return v.get<double>();
  if (v.is_string() && (v == "inf" || v == "none")) return std::numeric_limits<double>::infinity();
  if (v.is_null()) return std::numeric_limits<double>::infinity();
  throw ValidationError("config: cuts must be numbers or \"inf\"");
}

std::string cut_label(double cut) { return std::isfinite(cut) ? fmt(cut) : "inf"; }

TransferFunction load_transfer(const fs::path& p) {
  const auto doc = io::read_json(p);
  try {
    return {doc.at("C1").get<double>(), doc.at("C2").get<double>()};
  } catch (const json::exception& e) {
    throw ParseError(p.filename().string() + ": " + e.what());
  }
}

json stats_json(const ComparisonStats& s) {
  return {{"abs_mean_diff_kmh", s.abs_mean_diff},
          {"mean_abs_diff", s.mean_abs_diff},
          {"weighted_mean_abs_diff", s.weighted_mean_abs_diff},
          {"max_abs_diff", s.max_abs_diff},
          {"tv_distance", s.tv_distance},
          {"kl_divergence", s.kl_divergence},
          {"ks_distance", s.ks_distance}};
}

void finish(Manifest& man) {
  man.outputs_from_dir();
  man.write();
}

}  // namespace

int cmd_synth(const Options& o) {
  const auto c = load_config(o);
  prepare_out(o);
  const auto cfg = synth_config_from_json(c.doc);
  const std::uint64_t seed = o.seed.value_or(value<std::uint64_t>(c.doc, "rng_seed", 1));
  const auto seeds = synthesize_seeds(cfg, seed);

  json counts = json::object();
  for (const auto& s : seeds) {
    save_seed(s, o.out / (s.id + ".csv"));
    const std::string cls = to_string(remove_evasive_maneuver(s).lead_behavior);
    counts[cls] = counts.value(cls, 0) + 1;
  }
  io::write_json(o.out / "synth_summary.json",
                 {{"rng_seed", seed}, {"seeds", seeds.size()}, {"lead_behavior", counts}, {"config", to_json(cfg)}});

  Manifest man("synth", o.out);
  man.config(o.config);
  finish(man);
  return 0;
}

int cmd_simulate(const Options& o) {
  const auto c = load_config(o);
  prepare_out(o);
  CampaignConfig cfg = campaign_config_from_json(c.doc.value("campaign", json::object()));
  if (o.seed) cfg.rng_seed = *o.seed;

  const auto seeds_dir = path_at(c, "seeds");
  const auto seeds = load_seed_dir(seeds_dir);
  if (seeds.empty()) throw ValidationError(seeds_dir.string() + ": no seeds found");
  const auto decel_path = path_at(c, "decels");
  const auto decels = load_decel_distribution(decel_path);
  std::optional<GlanceDistribution> glances;
  fs::path glance_path;
  if (cfg.model == ResponseModel::kCbm) {
    glance_path = path_at(c, "glances");
    glances = load_glance_distribution(glance_path);
  }

  const auto result = run_campaign(seeds, cfg, glances ? &*glances : nullptr, decels, o.workers);
  save_campaign(result, o.out);
  io::write_json(o.out / "config.json", to_json(cfg));

  Manifest man("simulate", o.out);
  man.config(o.config);
  man.input_dir(seeds_dir);
  man.input(decel_path);
  if (glances) man.input(glance_path);
  finish(man);

  if (!result.diagnostics.empty()) {
    warn("sweep-fallback", "fill-in spot checks disagreed; affected rows were simulated exhaustively",
         {{"rows", result.diagnostics.size()}});
  }
  if (!result.exclusions.empty()) {
    const bool all = result.matrices.empty();
    warn(all ? "all-seeds-excluded" : "seeds-excluded",
         std::string(to_string(cfg.model)) + " is undefined for " + std::to_string(result.exclusions.size()) + " of " +
             std::to_string(seeds.size()) + " seeds",
         {{"excluded", result.exclusions.size()}, {"seeds", seeds.size()}});
    if (all) return static_cast<int>(ExitCode::kModelUndefined);
  }
  return 0;
}

int cmd_weight(const Options& o) {
  const auto c = load_config(o);
  prepare_out(o);
  const auto dir = path_at(c, "campaign");
  const auto campaign = load_campaign(dir);
  if (campaign.matrices.empty()) throw ValidationError(dir.string() + ": campaign has no simulated seeds");
  const double f = value<double>(c.doc, "no_response_fraction", campaign_no_response(dir, campaign.model));
  const double bw = value<double>(c.doc, "bin_width", kDeltaVBinWidth);
  const auto [lo, hi] = trim_of(c.doc);

  const auto w = weigh(campaign.matrices, f, bw, lo, hi);

  std::string weights = "seed_id,crash_mass,q,w_raw,w\n";
  for (const auto& s : w.pw.seeds) {
    weights += s.seed_id + "," + fmt(s.crash_mass) + "," + fmt(s.q) + "," + fmt(s.w_raw) + "," + fmt(s.w) + "\n";
  }
  io::write_text(o.out / "weights.csv", weights);
  std::string samples = "delta_v_kmh,weight\n";
  for (const auto& s : w.samples) samples += fmt(s.delta_v) + "," + fmt(s.weight) + "\n";
  io::write_text(o.out / "samples.csv", samples);
  save_histogram(w.mixed, o.out / "histogram.csv");
  save_histogram(w.crash_cells, o.out / "histogram_crash_cells.csv");
  io::write_json(o.out / "summary.json", {{"model", to_string(campaign.model)},
                                          {"no_response_fraction", f},
                                          {"mean_kmh", w.mixed.mean},
                                          {"binned_mean_kmh", w.mixed.binned_mean()},
                                          {"crash_cell_mean_kmh", w.crash_cells.mean},
                                          {"count", w.mixed.count},
                                          {"seeds_weighted", w.pw.seeds.size()},
                                          {"excluded_seeds", w.pw.excluded},
                                          {"trim_low", w.pw.trim_low},
                                          {"trim_high", w.pw.trim_high},
                                          {"raw_span", w.pw.raw_span},
                                          {"norm", w.pw.norm},
                                          {"no_response_mass", w.mixed.no_response_mass}});

  Manifest man("weight", o.out);
  man.config(o.config);
  man.input_dir(dir);
  finish(man);
  if (!w.pw.excluded.empty()) {
    warn("seeds-without-crashes", "seeds with no crashing cell carry no weight", {{"seeds", w.pw.excluded}});
  }
  return 0;
}

int cmd_fit_bias(const Options& o) {
  const auto c = load_config(o);
  prepare_out(o);
  const auto occ_path = path_at(c, "occupants");
  const auto ref_path = path_at(c, "injury_reference");
  const auto records = load_occupants(occ_path);
  auto ref = load_histogram(ref_path);
  ref.count = value<double>(c.doc, "injury_count", 0.0);
  const double p = value<double>(c.doc, "p_pdo", kDefaultPdoShare);
  const int n_fill = value<int>(c.doc, "fill_bins", kDefaultFillBins);

  TransferGrid grid;
  if (c.doc.contains("grid")) {
    const auto& g = c.doc["grid"];
    grid.c1_min = value<double>(g, "c1_min", grid.c1_min);
    grid.c1_step = value<double>(g, "c1_step", grid.c1_step);
    grid.c1_count = value<int>(g, "c1_count", grid.c1_count);
    grid.c2_min = value<double>(g, "c2_min", grid.c2_min);
    grid.c2_step = value<double>(g, "c2_step", grid.c2_step);
    grid.c2_count = value<int>(g, "c2_count", grid.c2_count);
  }

  const auto fit = build_pdo(records, p, n_fill, ref.bin_width);
  const auto aug = augment_reference(ref, fit.model, p);
  const auto tfit = fit_transfer(aug.combined, ref, grid, o.workers);

  io::write_json(o.out / "pdo.json", {{"B1", fit.model.B1},
                                      {"B2", fit.model.B2},
                                      {"p_pdo", p},
                                      {"bin_width", fit.bin_width},
                                      {"n_injured", fit.n_injured},
                                      {"n_pdo_observed", fit.n_pdo},
                                      {"pdo_total", fit.pdo_total},
                                      {"deficit", fit.deficit},
                                      {"mode_bin", fit.mode_bin},
                                      {"fill_bins", fit.fill_bins},
                                      {"iterations", fit.iterations}});
  std::string fill = "bin_low_kmh,bin_high_kmh,observed,fill,augmented,fitted\n";
  for (Eigen::Index k = 0; k < fit.observed.size(); ++k) {
    const double lo = fit.bin_width * static_cast<double>(k);
    fill += fmt(lo) + "," + fmt(lo + fit.bin_width) + "," + fmt(fit.observed[k]) + "," + fmt(fit.fill[k]) + "," +
            fmt(fit.augmented[k]) + "," + fmt(fit.complete_count() * fit.model.mass(lo, lo + fit.bin_width)) + "\n";
  }
  io::write_text(o.out / "pdo_fill.csv", fill);
  std::string curve = "iteration,residual\n";
  for (std::size_t i = 0; i < fit.residual_curve.size(); ++i) {
    curve += std::to_string(i + 1) + "," + fmt(fit.residual_curve[i]) + "\n";
  }
  io::write_text(o.out / "residual_curve.csv", curve);
  save_histogram(aug.combined, o.out / "reference_with_pdo.csv");
  io::write_json(o.out / "transfer.json",
                 {{"C1", tfit.tf.C1},
                  {"C2", tfit.tf.C2},
                  {"midpoint_kmh", tfit.tf.midpoint()},
                  {"cost", tfit.cost},
                  {"c1_index", tfit.c1_index},
                  {"c2_index", tfit.c2_index},
                  {"on_boundary", tfit.on_boundary},
                  {"degenerate", tfit.degenerate},
                  {"grid",
                   {{"c1_min", grid.c1_min}, {"c1_step", grid.c1_step}, {"c1_count", grid.c1_count},
                    {"c2_min", grid.c2_min}, {"c2_step", grid.c2_step}, {"c2_count", grid.c2_count}}}});

  Manifest man("fit-bias", o.out);
  man.config(o.config);
  man.input(occ_path);
  man.input(ref_path);

  if (c.doc.contains("sensitivity")) {
    const Config s{c.doc["sensitivity"], c.base};
    const auto model_path = path_at(s, "model_histogram");
    const auto model = load_histogram(model_path);
    man.input(model_path);
    const auto res = fill_sensitivity(fit, ref, model, p, value<int>(s.doc, "variants", 18),
                                      value<double>(s.doc, "amplitude", 0.3), value<std::uint64_t>(s.doc, "seed", 1),
                                      o.workers);
    std::string rows = "variant,B1,B2,C1,C2,transformed_mean_kmh\n";
    rows += "base," + fmt(fit.model.B1) + "," + fmt(fit.model.B2) + "," + fmt(tfit.tf.C1) + "," + fmt(tfit.tf.C2) +
            "," + fmt(res.base_mean) + "\n";
    for (std::size_t i = 0; i < res.variant_means.size(); ++i) {
      rows += std::to_string(i + 1) + "," + fmt(res.variant_pdo[i].B1) + "," + fmt(res.variant_pdo[i].B2) + "," +
              fmt(res.variant_tf[i].C1) + "," + fmt(res.variant_tf[i].C2) + "," + fmt(res.variant_means[i]) + "\n";
    }
    io::write_text(o.out / "sensitivity.csv", rows);
    io::write_json(o.out / "sensitivity.json", {{"base_mean_kmh", res.base_mean},
                                                {"variants", res.variant_means.size()},
                                                {"max_abs_shift_kmh", res.max_abs_shift}});
  }
  finish(man);

  if (tfit.degenerate) {
    warn("degenerate-transfer", "the fitted transfer is flat over the occupied bins; the reference shows no censoring signal");
  } else if (tfit.on_boundary) {
    warn("transfer-on-boundary", "the selected transfer parameters lie on the search-grid boundary");
  }
  return 0;
}

int cmd_apply_bias(const Options& o) {
  const auto c = load_config(o);
  prepare_out(o);
  const auto hist_path = path_at(c, "histogram");
  const auto tf_path = path_at(c, "transfer");
  const auto h = load_histogram(hist_path);
  const auto tf = load_transfer(tf_path);
  const auto t = apply_transfer(h, tf);
  save_histogram(t, o.out / "transformed.csv");
  io::write_json(o.out / "summary.json",
                 {{"C1", tf.C1}, {"C2", tf.C2}, {"mean_before_kmh", h.binned_mean()}, {"mean_after_kmh", t.mean}});

  Manifest man("apply-bias", o.out);
  man.config(o.config);
  man.input(hist_path);
  man.input(tf_path);
  finish(man);
  return 0;
}

int cmd_validate(const Options& o) {
  const auto c = load_config(o);
  prepare_out(o);
  Manifest man("validate", o.out);
  man.config(o.config);

  const auto ref_path = path_at(c, "reference");
  auto ref = load_histogram(ref_path);
  ref.count = value<double>(c.doc, "reference_count", 0.0);
  man.input(ref_path);

  std::vector<fs::path> curve_paths;
  const auto curves = load_curves(c, &curve_paths);
  for (const auto& p : curve_paths) man.input(p);

  std::string risk = "histogram,level,risk\n";
  for (const auto& cv : curves) risk += "reference," + cv.level() + "," + fmt(injury_risk(ref, cv)) + "\n";

  json comparison = json::object();
  std::string table =
      "model,mean_kmh,abs_mean_diff_kmh,mean_abs_diff,weighted_mean_abs_diff,max_abs_diff,tv_distance,kl_divergence,"
      "ks_distance\n";
  for (const auto& m : c.doc.value("models", json::array())) {
    const Config mc{m, c.base};
    const std::string name = value<std::string>(m, "name", "model");
    const auto path = path_at(mc, "histogram");
    auto h = load_histogram(path);
    h.count = value<double>(m, "count", 0.0);
    man.input(path);
    const auto s = compare(h, ref);
    auto entry = stats_json(s);
    entry["mean_kmh"] = h.binned_mean();
    comparison[name] = entry;
    table += name + "," + fmt(h.binned_mean()) + "," + fmt(s.abs_mean_diff) + "," + fmt(s.mean_abs_diff) + "," +
             fmt(s.weighted_mean_abs_diff) + "," + fmt(s.max_abs_diff) + "," + fmt(s.tv_distance) + "," +
             fmt(s.kl_divergence) + "," + fmt(s.ks_distance) + "\n";
    for (const auto& cv : curves) risk += name + "," + cv.level() + "," + fmt(injury_risk(h, cv)) + "\n";
  }
  comparison["reference_mean_kmh"] = ref.binned_mean();
  io::write_json(o.out / "comparison.json", comparison);
  io::write_text(o.out / "comparison.csv", table);
  io::write_text(o.out / "injury_risk.csv", risk);

  const std::uint64_t rng_seed = o.seed.value_or(value<std::uint64_t>(c.doc, "rng_seed", 1));
  json percentiles = json::object();
  for (const auto& pc : c.doc.value("percentiles", json::array())) {
    const Config cc{pc, c.base};
    const std::string name = value<std::string>(pc, "name", "model");
    const auto dir = path_at(cc, "campaign");
    const auto campaign = load_campaign(dir);
    man.input_dir(dir);
    const double f = value<double>(pc, "no_response_fraction", campaign_no_response(dir, campaign.model));

    std::vector<SeedPercentile> mid;
    std::vector<SeedPercentile> randomized;
    std::size_t no_seed_dv = 0;
    std::size_t no_mass = 0;
    std::string rows = "seed_id,seed_delta_v_kmh,marker,percentile_mid_rank,percentile_randomized\n";
    for (std::size_t i = 0; i < campaign.matrices.size(); ++i) {
      const auto& m = campaign.matrices[i];
      if (!m.seed_delta_v_kmh) {
        ++no_seed_dv;
        continue;
      }
      const auto gen = seed_generated_samples(m, f);
      if (gen.empty()) {
        ++no_mass;
        continue;
      }
      Rng rng(derive_seed(rng_seed, i));
      auto a = seed_percentile(*m.seed_delta_v_kmh, gen, 0.5);
      auto b = seed_percentile(*m.seed_delta_v_kmh, gen, rng.uniform());
      a.seed_id = b.seed_id = m.seed_id;
      rows += m.seed_id + "," + fmt(*m.seed_delta_v_kmh) + "," + to_string(a.marker) + "," +
              (a.marker == PercentileMarker::kInRange ? fmt(a.percentile) + "," + fmt(b.percentile) : ",") + "\n";
      mid.push_back(a);
      randomized.push_back(b);
    }
    io::write_text(o.out / ("percentiles_" + name + ".csv"), rows);

    json reports = json::object();
    for (const int bins : value<std::vector<int>>(pc, "bins", {10})) {
      const auto rm = percentile_histogram(mid, bins);
      const auto rr = percentile_histogram(randomized, bins);
      std::string hist = "bin_low_pct,bin_high_pct,mid_rank_count,randomized_count\n";
      for (int k = 0; k < bins; ++k) {
        hist += fmt(100.0 * k / bins) + "," + fmt(100.0 * (k + 1) / bins) + "," + fmt(rm.counts[k]) + "," +
                fmt(rr.counts[k]) + "\n";
      }
      io::write_text(o.out / ("percentile_histogram_" + name + "_" + std::to_string(bins) + ".csv"), hist);
      auto rep = [](const PercentileReport& r) {
        return json{{"chi_square", num(r.chi_square)}, {"dof", r.dof}, {"p_value", num(r.p_value)}};
      };
      reports[std::to_string(bins)] = {{"mid_rank", rep(rm)}, {"randomized", rep(rr)}};
      if (bins == value<std::vector<int>>(pc, "bins", {10}).front()) {
        reports["in_range"] = rm.in_range;
        reports["below_min"] = rm.below_min;
        reports["above_max"] = rm.above_max;
      }
    }
    reports["no_seed_delta_v"] = no_seed_dv;
    reports["no_generated_mass"] = no_mass;
    reports["no_response_fraction"] = f;
    percentiles[name] = reports;
  }
  io::write_json(o.out / "percentiles.json", percentiles);
  finish(man);
  return 0;
}

int cmd_assess_dms(const Options& o) {
  const auto c = load_config(o);
  prepare_out(o);
  Manifest man("assess-dms", o.out);
  man.config(o.config);

  const auto base_dir = path_at(c, "baseline");
  const auto baseline = load_campaign(base_dir);
  man.input_dir(base_dir);
  if (baseline.model != ResponseModel::kCbm) throw ValidationError("assess-dms: baseline must be a cbm campaign");
  if (!fs::exists(base_dir / "config.json")) throw ValidationError(base_dir.string() + ": missing config.json");
  const auto cfg = campaign_config_from_json(io::read_json(base_dir / "config.json"));

  const auto seeds_dir = path_at(c, "seeds");
  const auto glance_path = path_at(c, "glances");
  const auto decel_path = path_at(c, "decels");
  const auto seeds = load_seed_dir(seeds_dir);
  const auto glances = load_glance_distribution(glance_path);
  const auto decels = load_decel_distribution(decel_path);
  man.input_dir(seeds_dir);
  man.input(glance_path);
  man.input(decel_path);

  std::optional<TransferFunction> tf;
  if (c.doc.contains("transfer")) {
    const auto p = path_at(c, "transfer");
    tf = load_transfer(p);
    man.input(p);
  }
  std::vector<fs::path> curve_paths;
  const auto curves = load_curves(c, &curve_paths);
  for (const auto& p : curve_paths) man.input(p);

  const double f = cfg.cbm.no_response_fraction;
  const double bw = value<double>(c.doc, "bin_width", kDeltaVBinWidth);
  const auto [lo, hi] = trim_of(c.doc);

  std::string header = "cut_s,avoidance_rate,seeds_fully_avoided,mean_dv_kmh,mean_dv_transformed_kmh";
  for (const auto& cv : curves) header += ",risk_" + cv.level();
  std::string table = header + "\n";
  json rows = json::array();

  auto row = [&](const std::string& label, double rate, std::size_t avoided, const std::vector<OutcomeMatrix>& ms) {
    std::optional<DeltaVDistribution> h;
    try {
      h = weigh(ms, f, bw, lo, hi).mixed;
    } catch (const ValidationError&) {
      // every crash avoided; no distribution left to summarise
    }
    std::optional<DeltaVDistribution> ht;
    if (h && tf) ht = apply_transfer(*h, *tf);
    const auto& scored = ht ? ht : h;
    json r = {{"cut_s", label},
              {"avoidance_rate", rate},
              {"seeds_fully_avoided", avoided},
              {"mean_dv_kmh", h ? json(h->mean) : json(nullptr)},
              {"mean_dv_transformed_kmh", ht ? json(ht->mean) : json(nullptr)}};
    std::string line = label + "," + fmt(rate) + "," + std::to_string(avoided) + "," + (h ? fmt(h->mean) : "") + "," +
                       (ht ? fmt(ht->mean) : "");
    json risks = json::object();
    for (const auto& cv : curves) {
      const double v = scored ? injury_risk(*scored, cv) : 0.0;
      risks[cv.level()] = v;
      line += "," + fmt(v);
    }
    r["risk"] = risks;
    rows.push_back(r);
    table += line + "\n";
  };

  row("none", 0.0, 0, baseline.matrices);
  for (const auto& v : c.doc.value("cuts", json::array())) {
    const double cut = *parse_cut(v);
    CampaignConfig tc = cfg;
    tc.glance_cut = cut;
    const auto treat = run_campaign(seeds, tc, &glances, decels, o.workers);
    const auto av = crash_avoidance_rate(baseline.matrices, treat.matrices);
    std::size_t avoided = 0;
    std::string per_seed = "seed_id,p_base,p_treat,avoidance\n";
    for (const auto& s : av.seeds) {
      if (s.p_treat == 0.0) ++avoided;
      per_seed += s.seed_id + "," + fmt(s.p_base) + "," + fmt(s.p_treat) + "," + fmt(s.avoidance) + "\n";
    }
    io::write_text(o.out / ("avoidance_" + cut_label(cut) + ".csv"), per_seed);
    row(cut_label(cut), av.rate, avoided, treat.matrices);
  }
  io::write_text(o.out / "dms.csv", table);
  io::write_json(o.out / "dms.json", rows);
  finish(man);
  return 0;
}

int cmd_report(const Options& o) {
  const auto c = load_config(o);
  prepare_out(o);
  Manifest man("report", o.out);
  man.config(o.config);
  std::string index = "file,title\n";

  for (const auto& fig : c.doc.value("histograms", json::array())) {
    const std::string title = value<std::string>(fig, "title", "delta-v");
    const std::string file = value<std::string>(fig, "file", "histogram.svg");
    std::vector<Series> series;
    for (const auto& s : fig.value("series", json::array())) {
      const Config sc{s, c.base};
      const auto path = path_at(sc, "path");
      series.push_back({value<std::string>(s, "name", path.stem().string()), load_histogram(path)});
      man.input(path);
    }
    io::write_text(o.out / file, svg_histograms(title, series));
    index += file + "," + title + "\n";
  }

  for (const auto& fig : c.doc.value("bars", json::array())) {
    const Config fc{fig, c.base};
    const auto path = path_at(fc, "csv");
    man.input(path);
    const std::string title = value<std::string>(fig, "title", path.stem().string());
    const std::string file = value<std::string>(fig, "file", path.stem().string() + ".svg");
    const std::string label_col = value<std::string>(fig, "label", "");
    const std::string value_col = value<std::string>(fig, "value", "");
    const auto rows = io::read_csv(path);
    if (rows.empty()) throw ParseError(path.string() + ": empty table");
    const auto find = [&](const std::string& col) {
      const auto it = std::find(rows[0].begin(), rows[0].end(), col);
      if (it == rows[0].end()) throw ValidationError(path.string() + ": no column '" + col + "'");
      return static_cast<std::size_t>(it - rows[0].begin());
    };
    const auto li = find(label_col);
    const auto vi = find(value_col);
    std::vector<std::string> labels;
    std::vector<double> values;
    for (std::size_t r = 1; r < rows.size(); ++r) {
      if (rows[r].size() <= std::max(li, vi) || rows[r][vi].empty()) continue;
      labels.push_back(rows[r][li]);
      values.push_back(io::parse_double(rows[r][vi], path.string()));
    }
    io::write_text(o.out / file, svg_bars(title, labels, values, value<std::string>(fig, "y_label", value_col)));
    index += file + "," + title + "\n";
  }
  io::write_text(o.out / "figures.csv", index);
  finish(man);
  return 0;
}

int cmd_pipeline(const Options& o) {
  const auto c = load_config(o);
  prepare_out(o);
  const fs::path configs = o.out / "configs";
  fs::create_directories(configs);
  // External inputs are pinned as absolute paths; stage outputs are referenced
  // relative to the generated configs so the tree is relocatable.
  auto abs = [&](const std::string& key) { return fs::absolute(path_at(c, key)).lexically_normal().generic_string(); };
  auto stage = [&](const std::string& name, const json& doc) {
    const fs::path p = configs / (name + ".json");
    io::write_json(p, doc);
    return Options{p, o.out / name, o.workers, std::nullopt};
  };
  auto up = [](const std::string& name) { return "../" + name; };

  Manifest man("pipeline", o.out);
  man.config(o.config);
  json metrics = json::object();

  std::string seeds_ref;
  if (c.doc.contains("seeds")) {
    seeds_ref = abs("seeds");
  } else {
    json synth = c.doc.value("synth", json::object());
    if (o.seed) synth["rng_seed"] = *o.seed;
    cmd_synth(stage("seeds", synth));
    seeds_ref = up("seeds");
    metrics["seeds"] = io::read_json(o.out / "seeds" / "synth_summary.json").at("lead_behavior");
  }

  json campaign = c.doc.value("campaign", json::object());
  if (o.seed) campaign["rng_seed"] = *o.seed;
  const json bin_width = value<double>(c.doc, "bin_width", kDeltaVBinWidth);
  const json trim = value<std::vector<double>>(c.doc, "trim", {5.0, 95.0});
  std::vector<std::string> weighted;
  for (const auto& model : value<std::vector<std::string>>(c.doc, "models", {"cbm"})) {
    json camp = campaign;
    camp["model"] = model;
    json sim = {{"seeds", seeds_ref}, {"decels", abs("decels")}, {"campaign", camp}};
    if (response_model_from_string(model) == ResponseModel::kCbm) sim["glances"] = abs("glances");
    const int rc = cmd_simulate(stage(model, sim));
    const auto s = io::read_json(o.out / model / "summary.json");
    json m = {{"seeds", s["seeds"]},
              {"excluded", s["excluded"]},
              {"theoretical_cells", s["theoretical_cells"]},
              {"simulated_cells", s["simulated_cells"]},
              {"crash_cells", s["crash_cells"]}};
    if (rc != 0) {
      m["status"] = "all-seeds-excluded";
      metrics[model] = m;
      continue;
    }
    cmd_weight(stage(model + "_weight", {{"campaign", up(model)}, {"bin_width", bin_width}, {"trim", trim}}));
    const auto ws = io::read_json(o.out / (model + "_weight") / "summary.json");
    m["mean_kmh"] = ws["mean_kmh"];
    m["count"] = ws["count"];
    m["seeds_weighted"] = ws["seeds_weighted"];
    m["raw_span"] = ws["raw_span"];
    metrics[model] = m;
    weighted.push_back(model);
  }
  if (weighted.empty()) throw ModelUndefinedError("pipeline: no model produced a crash distribution");
  const bool have_cbm = std::find(weighted.begin(), weighted.end(), "cbm") != weighted.end();

  json fit = {{"occupants", abs("occupants")},
              {"injury_reference", abs("injury_reference")},
              {"injury_count", value<double>(c.doc, "injury_count", 0.0)},
              {"p_pdo", value<double>(c.doc, "p_pdo", kDefaultPdoShare)},
              {"fill_bins", value<int>(c.doc, "fill_bins", kDefaultFillBins)}};
  if (c.doc.contains("grid")) fit["grid"] = c.doc["grid"];
  if (c.doc.contains("sensitivity")) {
    json s = c.doc["sensitivity"];
    s["model_histogram"] = up(weighted.front() + "_weight/histogram.csv");
    fit["sensitivity"] = s;
  }
  cmd_fit_bias(stage("bias", fit));
  {
    const auto pdo = io::read_json(o.out / "bias" / "pdo.json");
    const auto tr = io::read_json(o.out / "bias" / "transfer.json");
    metrics["bias"] = {{"B1", pdo["B1"]},       {"B2", pdo["B2"]},       {"iterations", pdo["iterations"]},
                       {"C1", tr["C1"]},        {"C2", tr["C2"]},        {"cost", tr["cost"]},
                       {"degenerate", tr["degenerate"]}, {"on_boundary", tr["on_boundary"]}};
    if (fs::exists(o.out / "bias" / "sensitivity.json")) {
      metrics["bias"]["sensitivity_max_abs_shift_kmh"] =
          io::read_json(o.out / "bias" / "sensitivity.json")["max_abs_shift_kmh"];
    }
  }

  json models = json::array();
  json percentiles = json::array();
  const json pbins = value<std::vector<int>>(c.doc, "percentile_bins", {10, 20});
  for (const auto& m : weighted) {
    cmd_apply_bias(stage(m + "_transformed",
                         {{"histogram", up(m + "_weight/histogram.csv")}, {"transfer", up("bias/transfer.json")}}));
    metrics[m]["transformed_mean_kmh"] =
        io::read_json(o.out / (m + "_transformed") / "summary.json")["mean_after_kmh"];
    const json count = metrics[m]["count"];
    models.push_back({{"name", m}, {"histogram", up(m + "_weight/histogram.csv")}, {"count", count}});
    models.push_back(
        {{"name", m + "_transformed"}, {"histogram", up(m + "_transformed/transformed.csv")}, {"count", count}});
    percentiles.push_back({{"name", m}, {"campaign", up(m)}, {"bins", pbins}});
  }

  json curves = json::array();
  for (const auto& p : c.doc.value("risk_curves", json::array())) {
    curves.push_back(fs::absolute(resolve(c, p, "risk_curves")).lexically_normal().generic_string());
  }
  json val = {{"reference", abs("injury_reference")},
              {"reference_count", value<double>(c.doc, "injury_count", 0.0)},
              {"models", models},
              {"percentiles", percentiles},
              {"risk_curves", curves},
              {"rng_seed", value<std::uint64_t>(campaign, "rng_seed", 1)}};
  cmd_validate(stage("validation", val));
  metrics["validation"] = {{"comparison", io::read_json(o.out / "validation" / "comparison.json")},
                           {"percentiles", io::read_json(o.out / "validation" / "percentiles.json")}};

  const json cuts = c.doc.value("cuts", json::array());
  if (have_cbm && !cuts.empty()) {
    cmd_assess_dms(stage("dms", {{"baseline", up("cbm")},
                                 {"seeds", seeds_ref},
                                 {"glances", abs("glances")},
                                 {"decels", abs("decels")},
                                 {"cuts", cuts},
                                 {"transfer", up("bias/transfer.json")},
                                 {"risk_curves", curves},
                                 {"bin_width", bin_width},
                                 {"trim", trim}}));
    metrics["dms"] = io::read_json(o.out / "dms" / "dms.json");
  }

  json hist_series = json::array({{{"name", "reference"}, {"path", abs("injury_reference")}}});
  for (const auto& m : weighted) {
    hist_series.push_back({{"name", m}, {"path", up(m + "_weight/histogram.csv")}});
    hist_series.push_back({{"name", m + " transformed"}, {"path", up(m + "_transformed/transformed.csv")}});
  }
  json report = {{"histograms",
                  {{{"title", "Crash delta-v distributions"}, {"file", "delta_v.svg"}, {"series", hist_series}},
                   {{"title", "Reference with PDO component"},
                    {"file", "reference_with_pdo.svg"},
                    {"series",
                     {{{"name", "reference"}, {"path", abs("injury_reference")}},
                      {{"name", "with PDO"}, {"path", up("bias/reference_with_pdo.csv")}}}}}}},
                 {"bars", json::array()}};
  for (const auto& m : weighted) {
    const std::string pb = std::to_string(pbins.front().get<int>());
    report["bars"].push_back({{"title", "Seed delta-v percentiles (" + m + ")"},
                              {"file", "percentiles_" + m + ".svg"},
                              {"csv", up("validation/percentile_histogram_" + m + "_" + pb + ".csv")},
                              {"label", "bin_high_pct"},
                              {"value", "mid_rank_count"},
                              {"y_label", "seeds"}});
  }
  if (metrics.contains("dms")) {
    report["bars"].push_back({{"title", "Crash avoidance by glance cut"},
                              {"file", "dms_avoidance.svg"},
                              {"csv", up("dms/dms.csv")},
                              {"label", "cut_s"},
                              {"value", "avoidance_rate"},
                              {"y_label", "avoidance rate"}});
    report["bars"].push_back({{"title", "Mean delta-v of remaining crashes"},
                              {"file", "dms_mean_dv.svg"},
                              {"csv", up("dms/dms.csv")},
                              {"label", "cut_s"},
                              {"value", "mean_dv_kmh"},
                              {"y_label", "km/h"}});
  }
  cmd_report(stage("report", report));

  io::write_json(o.out / "metrics.json", metrics);
  finish(man);
  return 0;
}

int cmd_fixtures(const Options& o) {
  prepare_out(o);
  const fs::path& out = o.out;
  save_glance_distribution(fixtures::naturalistic_glances(), out / "glances_naturalistic.csv");
  save_glance_distribution(fixtures::test_track_glances(), out / "glances_test_track.csv");
  save_decel_distribution(fixtures::decel_distribution(), out / "decels.csv");
  save_occupants(fixtures::insurance_occupants(), out / "occupants.csv");
  save_histogram(fixtures::injury_reference(1000.0), out / "injury_reference.csv");
  json curves = json::array();
  for (int level = 1; level <= 3; ++level) {
    const auto p = fixtures::example_risk_parameters(level);
    const std::string file = "risk_mais" + std::to_string(level) + ".json";
    io::write_json(out / file, {{"level", p.level}, {"intercept", p.intercept}, {"slope", p.slope}});
    curves.push_back(file);
  }

  json synth = to_json(SynthConfig{});
  synth["rng_seed"] = 2024;
  io::write_json(out / "synth.json", synth);
  json standstill = to_json(SynthConfig{});
  standstill["n_seeds"] = 6;
  standstill["lead_mix"] = {{"braking", 0.0}, {"non_braking", 0.0}, {"standstill", 1.0}};
  standstill["rng_seed"] = 5;
  io::write_json(out / "synth_standstill.json", standstill);

  json pipeline = {{"synth", synth},
                   {"glances", "glances_naturalistic.csv"},
                   {"decels", "decels.csv"},
                   {"campaign", {{"rng_seed", 2024}}},
                   {"models", {"cbm", "blom"}},
                   {"occupants", "occupants.csv"},
                   {"injury_reference", "injury_reference.csv"},
                   {"injury_count", 1000},
                   {"p_pdo", kDefaultPdoShare},
                   {"fill_bins", kDefaultFillBins},
                   {"sensitivity", {{"variants", 18}, {"amplitude", 0.3}, {"seed", 7}}},
                   {"cuts", {3.0, 2.0}},
                   {"risk_curves", curves},
                   {"percentile_bins", {10, 20}}};
  io::write_json(out / "pipeline.json", pipeline);

  json small = pipeline;
  small["synth"] = to_json(fixtures::small_seed_config());
  small["synth"]["rng_seed"] = 11;
  small["campaign"]["rng_seed"] = 11;
  small["sensitivity"]["variants"] = 2;
  small["cuts"] = {2.0};
  small["percentile_bins"] = {5};
  io::write_json(out / "pipeline_small.json", small);

  Manifest man("fixtures", out);
  finish(man);
  return 0;
}

int run(int argc, char** argv) {
  CLI::App app{"Counterfactual rear-end crash generation and delta-v validation", "rearsim"};
  app.set_version_flag("--version", REARSIM_VERSION);
  app.require_subcommand(1);
  Options opts;

  struct Cmd {
    const char* name;
    const char* help;
    int (*fn)(const Options&);
    bool needs_config;
  };
  const Cmd cmds[] = {
      {"synth", "Synthesize reconstructed crash seeds", cmd_synth, true},
      {"simulate", "Run a counterfactual campaign (cbm or blom)", cmd_simulate, true},
      {"weight", "Prevalence-weight a campaign into a delta-v histogram", cmd_weight, true},
      {"fit-bias", "Fit the PDO completion and the selection-bias transfer function", cmd_fit_bias, true},
      {"apply-bias", "Apply a fitted transfer function to a histogram", cmd_apply_bias, true},
      {"validate", "Compare generated and reference distributions", cmd_validate, true},
      {"assess-dms", "Crash avoidance and severity under glance cuts", cmd_assess_dms, true},
      {"report", "Render SVG figures from command outputs", cmd_report, true},
      {"pipeline", "Run every stage from one config", cmd_pipeline, true},
      {"fixtures", "Write the bundled synthetic inputs", cmd_fixtures, false},
  };
  std::vector<std::pair<CLI::App*, const Cmd*>> subs;
  for (const auto& cmd : cmds) {
    auto* sub = app.add_subcommand(cmd.name, cmd.help);
    auto* cfg = sub->add_option("--config", opts.config, "JSON config; relative paths resolve against its directory");
    if (cmd.needs_config) cfg->required()->check(CLI::ExistingFile);
    sub->add_option("--out", opts.out, "Output directory")->required();
    sub->add_option("--workers", opts.workers, "Worker threads (0 = all cores)")->default_val(1);
    sub->add_option("--seed", opts.seed, "Overrides the config RNG seed");
    subs.emplace_back(sub, &cmd);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : static_cast<int>(ExitCode::kValidation);
  }
  if (opts.workers == 0) opts.workers = std::max(1u, std::thread::hardware_concurrency());

  auto fail = [](ExitCode code, const std::string& kind, const std::string& msg) {
    std::cerr << json{{"error", kind}, {"message", msg}, {"exit_code", static_cast<int>(code)}}.dump() << "\n";
    return static_cast<int>(code);
  };
  try {
    for (const auto& [sub, cmd] : subs) {
      if (sub->parsed()) return cmd->fn(opts);
    }
    return fail(ExitCode::kInternal, "internal", "no subcommand dispatched");
  } catch (const Error& e) {
    return fail(e.code(), e.kind(), e.what());
  } catch (const json::exception& e) {
    return fail(ExitCode::kValidation, "config", e.what());
  } catch (const fs::filesystem_error& e) {
    return fail(ExitCode::kValidation, "io", e.what());
  } catch (const std::exception& e) {
    return fail(ExitCode::kInternal, "internal", e.what());
  }
}

}  // namespace rearsim::cli
