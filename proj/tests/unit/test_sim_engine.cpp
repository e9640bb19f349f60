#include <doctest.h>

#include <cmath>

#include "rearsim/errors.hpp"
#include "rearsim/fixtures.hpp"
#include "rearsim/io.hpp"
#include "rearsim/looming.hpp"
#include "rearsim/sim_engine.hpp"
#include "support.hpp"

using namespace rearsim;

namespace {

// Distance covered by the semi-implicit Euler recurrence while braking from
// speed v at onset 0 until it stops.
double euler_stopping_distance(double v, double d_max, double jerk, double dt) {
  double x = 0.0;
  for (long n = 0; v > 0.0; ++n) {
    const double t = static_cast<double>(n) * dt;
    const double decel = t > 0.0 ? std::min(-jerk * t, d_max) : 0.0;
    v = std::max(0.0, v - decel * dt);
    x += v * dt;
  }
  return x;
}

// Continuous ramp-then-plateau stopping distance.
double closed_form_stopping_distance(double v, double d_max, double jerk) {
  const double j = -jerk;
  const double tr = d_max / j;
  const double ramp = v * tr - j * tr * tr * tr / 6.0;
  const double v_after = v - 0.5 * j * tr * tr;
  return ramp + v_after * v_after / (2.0 * d_max);
}

CounterfactualSeed stopped_lead_at(double gap, double speed) {
  auto cf = remove_evasive_maneuver(test::approach_seed("stop", 40.0, speed, 0.0));
  cf.scenario.lead.position.setConstant(gap);
  return cf;
}

DecelDistribution one_decel(double d) {
  DecelDistribution out;
  out.d_max = Vec::Constant(1, d);
  out.probabilities = Vec::Ones(1);
  return out;
}

double impact_speed(const SimOutcome& o) { return o.crashed ? o.v1 - o.v2 : 0.0; }

const std::vector<SeedCrash>& small_seeds() {
  static const auto seeds = synthesize_seeds(fixtures::small_seed_config(30), 5);
  return seeds;
}

CampaignResult small_campaign(bool exhaustive, unsigned workers = 1, ResponseModel model = ResponseModel::kCbm) {
  CampaignConfig cfg;
  cfg.model = model;
  cfg.exhaustive = exhaustive;
  cfg.rng_seed = 3;
  static const auto glances = fixtures::test_track_glances();
  return run_campaign(small_seeds(), cfg, &glances, fixtures::decel_distribution(), workers);
}

bool same_matrices(const std::vector<OutcomeMatrix>& a, const std::vector<OutcomeMatrix>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].seed_id != b[i].seed_id || a[i].cells != b[i].cells || !(a[i].no_response == b[i].no_response)) {
      return false;
    }
  }
  return true;
}

// outcomes.csv carries no per-cell impact time.
bool same_persisted(const std::vector<OutcomeMatrix>& a, const std::vector<OutcomeMatrix>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].seed_id != b[i].seed_id || a[i].cells.size() != b[i].cells.size()) return false;
    if (!(a[i].no_response == b[i].no_response) || a[i].seed_delta_v_kmh != b[i].seed_delta_v_kmh) return false;
    for (std::size_t k = 0; k < a[i].cells.size(); ++k) {
      const auto& x = a[i].cells[k];
      const auto& y = b[i].cells[k];
      if (x.crashed != y.crashed || x.v1 != y.v1 || x.v2 != y.v2 || x.max_severity != y.max_severity) return false;
    }
  }
  return true;
}

}  // namespace

TEST_CASE("no response into a stopped lead") {
  const auto cf = remove_evasive_maneuver(test::approach_seed("s", 30.0, 10.0, 0.0));
  const auto o = simulate(cf, kNever, 6.0);
  REQUIRE(o.crashed);
  CHECK(o.impact_time == doctest::Approx(3.0).epsilon(1e-9));
  CHECK(o.v1 == doctest::Approx(10.0));
  CHECK(o.v2 == 0.0);
  CHECK(o.max_severity);
}

TEST_CASE("early hard braking avoids the crash") {
  const auto cf = remove_evasive_maneuver(test::approach_seed("s", 30.0, 10.0, 0.0));
  const auto o = simulate(cf, 0.0, 50.0);
  CHECK_FALSE(o.crashed);
  CHECK(o == SimOutcome{});
}

TEST_CASE("kernel argument errors") {
  const auto cf = remove_evasive_maneuver(test::approach_seed("s", 30.0, 10.0, 0.0));
  CHECK_THROWS_AS(simulate(cf, 0.0, 0.0), DomainError);
  CHECK_THROWS_AS(simulate(cf, 0.0, 5.0, -23.04, 0.0), DomainError);
}

TEST_CASE("stopping-distance boundary") {
  const double v = 20.0;
  const double d = 9.0;
  const double disc = euler_stopping_distance(v, d, -23.04, 0.01);
  const double cont = closed_form_stopping_distance(v, d, -23.04);
  CHECK(std::abs(disc - cont) < v * 0.01);

  CHECK_FALSE(simulate(stopped_lead_at(disc + 1e-3, v), 0.0, d).crashed);
  const auto touch = simulate(stopped_lead_at(disc - 1e-3, v), 0.0, d);
  REQUIRE(touch.crashed);
  CHECK(touch.v1 < 0.5);
  CHECK_FALSE(touch.max_severity);
  const auto hard = simulate(stopped_lead_at(cont - 5.0, v), 0.0, d);
  REQUIRE(hard.crashed);
  CHECK(hard.v1 == doctest::Approx(std::sqrt(2.0 * d * 5.0)).epsilon(0.05));
}

TEST_CASE("grazing contact at equal speeds is not a crash") {
  auto cf = remove_evasive_maneuver(test::approach_seed("g", 20.0, 20.0, 10.0));
  cf.scenario.lead.speed.setConstant(20.0);
  cf.scenario.lead.position = cf.scenario.follower.position;
  const auto o = simulate(cf, kNever, 6.0);
  CHECK_FALSE(o.crashed);
  CHECK(o == SimOutcome{});
}

TEST_CASE("rows that never or always crash") {
  const auto cf = remove_evasive_maneuver(test::approach_seed("s", 30.0, 10.0, 0.0));
  const Eigen::Index na = 67;
  const Vec axis = Vec::LinSpaced(na, 0.0, 6.6);
  const Vec prob = Vec::Constant(na, 1.0 / static_cast<double>(na));

  SUBCASE("all avoided") {
    const auto m = sweep_seed(cf, Vec::Zero(na), axis, prob, one_decel(9.0), ResponseModel::kCbm, {});
    CHECK(m.crash_count() == 0);
    CHECK(m.crash_probability() == 0.0);
    // no-response run + binary search + one spot check
    CHECK(m.kernel_calls <= 1 + static_cast<std::size_t>(std::ceil(std::log2(na + 1))) + 1);
    CHECK(m.fallback_rows == 0);
  }
  SUBCASE("braking only after impact") {
    const auto m = sweep_seed(cf, Vec::Constant(na, 10.0), axis, prob, one_decel(9.0), ResponseModel::kCbm, {});
    CHECK(m.crash_count() == static_cast<std::size_t>(na));
    for (const auto& c : m.cells) {
      CHECK(c.max_severity);
      CHECK(c == m.no_response);
    }
    CHECK(m.crash_probability() == doctest::Approx(1.0));
  }
  SUBCASE("argument errors") {
    Vec bad = Vec::Zero(na);
    bad[3] = 1.0;
    CHECK_THROWS_AS(sweep_seed(cf, bad, axis, prob, one_decel(9.0), ResponseModel::kCbm, {}), ValidationError);
    CHECK_THROWS_AS(sweep_seed(cf, Vec::Zero(3), axis, prob, one_decel(9.0), ResponseModel::kCbm, {}),
                    ValidationError);
  }
}

TEST_CASE("reduced sweep equals exhaustive sweep") {
  for (auto model : {ResponseModel::kCbm, ResponseModel::kBlom}) {
    const auto reduced = small_campaign(false, 1, model);
    const auto full = small_campaign(true, 1, model);
    CHECK(same_matrices(reduced.matrices, full.matrices));
    CHECK(reduced.kernel_calls < full.kernel_calls);
  }
}

TEST_CASE("impact speed is monotone in onset and deceleration") {
  const auto full = small_campaign(true);
  const double tol = kImpactSpeedTolerance;
  for (const auto& m : full.matrices) {
    for (Eigen::Index d = 0; d < m.n_decel(); ++d) {
      for (Eigen::Index a = 1; a < m.n_axis1(); ++a) {
        CHECK(impact_speed(m.cell(a, d)) >= impact_speed(m.cell(a - 1, d)) - tol);
      }
    }
    for (Eigen::Index a = 0; a < m.n_axis1(); ++a) {
      for (Eigen::Index d = 1; d < m.n_decel(); ++d) {
        CHECK(impact_speed(m.cell(a, d)) <= impact_speed(m.cell(a, d - 1)) + tol);
      }
    }
  }
}

TEST_CASE("synthesized seeds collide without a driver response") {
  for (const auto& s : small_seeds()) {
    const auto o = simulate(remove_evasive_maneuver(s), kNever, 6.0);
    CHECK(o.crashed);
    CHECK(o.max_severity);
  }
}

TEST_CASE("campaign sizes and exclusions") {
  const auto cbm = small_campaign(false);
  const auto axis = campaign_overshoot(fixtures::test_track_glances(), std::nullopt).axis_values().size();
  CHECK(cbm.theoretical_cells == small_seeds().size() * static_cast<std::size_t>(axis) * 6);
  CHECK(cbm.exclusions.empty());

  const auto blom = small_campaign(false, 1, ResponseModel::kBlom);
  std::size_t ineligible = 0;
  for (const auto& s : small_seeds()) {
    ineligible += remove_evasive_maneuver(s).lead_behavior != LeadBehavior::kBraking;
  }
  CHECK(blom.exclusions.size() == ineligible);
  CHECK(blom.matrices.size() + blom.exclusions.size() == small_seeds().size());
  for (const auto& m : blom.matrices) CHECK(m.n_axis1() == 25);
}

TEST_CASE("campaign is deterministic and independent of worker count") {
  const auto a = small_campaign(false, 1);
  const auto b = small_campaign(false, 1);
  const auto c = small_campaign(false, 4);
  CHECK(same_matrices(a.matrices, b.matrices));
  CHECK(same_matrices(a.matrices, c.matrices));
  CHECK(a.kernel_calls == c.kernel_calls);

  const auto dir = test::scratch("sim_campaign");
  save_campaign(a, dir / "one");
  save_campaign(c, dir / "four");
  for (const char* f : {"outcomes.csv", "seeds.csv", "axes.json", "summary.json"}) {
    CHECK(io::read_text(dir / "one" / f) == io::read_text(dir / "four" / f));
  }
  const auto back = load_campaign(dir / "one");
  CHECK(same_persisted(back.matrices, a.matrices));
  CHECK(back.kernel_calls == a.kernel_calls);
}

TEST_CASE("campaign config parsing") {
  const auto cfg = campaign_config_from_json(nlohmann::json::parse(
      R"({"model": "blom", "response_delay": 0.8, "glance_cut": 2, "reaction_time": {"mean": 1.0}})"));
  CHECK(cfg.model == ResponseModel::kBlom);
  CHECK(cfg.cbm.response_delay == 0.8);
  CHECK(cfg.glance_cut == 2.0);
  CHECK(cfg.reaction_time_mean == 1.0);
  const auto back = campaign_config_from_json(to_json(cfg));
  CHECK(back.glance_cut == cfg.glance_cut);
  CHECK(back.model == cfg.model);
  CHECK_THROWS_AS(campaign_config_from_json(nlohmann::json::parse(R"({"dt": 0})")), ValidationError);
  CHECK_THROWS_AS(campaign_config_from_json(nlohmann::json::parse(R"({"glance_cut": -1})")), ValidationError);
  CHECK_THROWS_AS(campaign_config_from_json(nlohmann::json::parse(R"({"response_delay": "x"})")), ValidationError);
  CHECK_THROWS(response_model_from_string("aeb"));
}

TEST_CASE("CBM campaign requires glances") {
  CampaignConfig cfg;
  CHECK_THROWS_AS(run_campaign(small_seeds(), cfg, nullptr, fixtures::decel_distribution()), ValidationError);
}
