#include <doctest.h>

#include <cmath>
#include <vector>

#include "rearsim/bias_transform.hpp"
#include "rearsim/errors.hpp"
#include "rearsim/fixtures.hpp"
#include "rearsim/io.hpp"
#include "rearsim/rng.hpp"
#include "support.hpp"

using namespace rearsim;

namespace {

// MAIS0 counts per 2 km/h bin, placed at bin centres.
std::vector<OccupantRecord> records(const std::vector<int>& pdo_counts, int injured) {
  std::vector<OccupantRecord> out;
  for (std::size_t k = 0; k < pdo_counts.size(); ++k) {
    for (int i = 0; i < pdo_counts[k]; ++i) out.push_back({2.0 * static_cast<double>(k) + 1.0, 0});
  }
  for (int i = 0; i < injured; ++i) out.push_back({10.0 + 0.1 * i, 1 + i % 3});
  return out;
}

DeltaVDistribution hist(const Vec& w) {
  DeltaVDistribution h;
  h.weights = w;
  return h;
}

Vec random_weights(Rng& rng, Eigen::Index n) {
  Vec w(n);
  for (Eigen::Index k = 0; k < n; ++k) w[k] = rng.uniform();
  return w / w.sum();
}

double cost_oracle(const Vec& with_pdo, const Vec& original, const TransferFunction& tf) {
  Vec scaled(with_pdo.size());
  for (Eigen::Index k = 0; k < with_pdo.size(); ++k) scaled[k] = with_pdo[k] * tf(2.0 * k + 1.0);
  scaled *= original.sum() / scaled.sum();
  return (original - scaled).cwiseAbs().sum();
}

}  // namespace

TEST_CASE("no deficit means no fill") {
  const auto fit = build_pdo(records({64, 32, 16, 8, 4, 2}, 126), 0.5, 3);
  CHECK(fit.deficit == 0.0);
  CHECK(fit.fill.isZero());
  CHECK(fit.augmented == fit.observed);
  CHECK(fit.iterations == 0);
  // exact halving per 2 km/h bin
  CHECK(fit.model.B2 == doctest::Approx(std::log(2.0) / 2.0).epsilon(1e-12));
  CHECK(fit.model.mass(0.0, 2.0) * fit.complete_count() == doctest::Approx(64.0).epsilon(1e-9));
}

TEST_CASE("deficit accounting") {
  // 43 % MAIS0 among 100 records
  const auto fit = build_pdo(records({5, 20, 10, 5, 2, 1}, 57), 0.7, 6);
  CHECK(fit.n_pdo == 43.0);
  CHECK(fit.n_injured == 57.0);
  CHECK(fit.pdo_total == doctest::Approx(57.0 * 0.7 / 0.3));
  CHECK(fit.deficit == doctest::Approx(57.0 * 0.7 / 0.3 - 43.0));
  CHECK(fit.fill.sum() == doctest::Approx(fit.deficit));
  CHECK(fit.augmented.sum() == doctest::Approx(fit.pdo_total));
  // complete population = augmented PDO + injured
  CHECK(fit.complete_count() == doctest::Approx(57.0 * 0.7 / 0.3 + 57.0));
  CHECK(fit.mode_bin == 1);
}

TEST_CASE("fill stays within the configured bins") {
  for (int n_fill : {1, 3, 6}) {
    const auto fit = build_pdo(fixtures::insurance_occupants(), 0.7, n_fill);
    CHECK((fit.fill.array() >= 0.0).all());
    CHECK(fit.fill.tail(fit.fill.size() - n_fill).isZero());
    CHECK(fit.fill.sum() == doctest::Approx(fit.deficit));
    CHECK(fit.model.B2 > 0.0);
    CHECK(fit.residual_curve.size() == static_cast<std::size_t>(fit.iterations));
  }
}

TEST_CASE("censored exponential population is recovered") {
  const std::vector<double> keep = {0.15, 0.3, 0.45, 0.6, 0.75, 0.9};
  const double B1 = 0.7 * 0.27;
  const auto fit = build_pdo(fixtures::exponential_pdo_occupants(B1, 0.27, 5000.0, keep), 0.7, 6);
  CHECK(fit.model.B1 == doctest::Approx(B1).epsilon(0.05));
  CHECK(fit.model.B2 == doctest::Approx(0.27).epsilon(0.05));
  CHECK(fit.model.B1 / fit.model.B2 == doctest::Approx(0.7).epsilon(0.05));
}

TEST_CASE("PDO build error paths") {
  CHECK_THROWS_AS(build_pdo(records({80, 10}, 10), 0.7), ValidationError);  // MAIS0 share 0.9
  CHECK_THROWS_AS(build_pdo(records({10, 5}, 0), 0.7), ValidationError);
  CHECK_THROWS_AS(build_pdo(records({}, 10), 0.7), ValidationError);
  CHECK_THROWS_AS(build_pdo(records({5, 5}, 10), 1.0), ValidationError);
  CHECK_THROWS_AS(build_pdo(records({5, 5}, 10), 0.7, 0), ValidationError);
  CHECK_THROWS_AS(build_pdo(records({10}, 10), 0.5), FitError);          // a single populated bin
  CHECK_THROWS_AS(build_pdo(records({1, 2, 4, 8}, 15), 0.5), FitError);  // increasing counts
}

TEST_CASE("augmented reference") {
  const auto injury = fixtures::injury_reference();
  const PdoModel pdo{0.189, 0.27};
  SUBCASE("zero PDO share is the identity") {
    const auto a = augment_reference(injury, pdo, 0.0);
    CHECK(a.combined.weights.head(injury.bins()).isApprox(injury.weights, 1e-15));
    CHECK(a.combined.weights.tail(a.combined.bins() - injury.bins()).isZero());
  }
  SUBCASE("PDO share and mean") {
    for (double p : {0.3, 0.507, 0.7}) {
      const auto a = augment_reference(injury, pdo, p);
      CHECK(std::abs(a.pdo_component.sum() - p) < 1e-9);
      CHECK(a.combined.total() == doctest::Approx(1.0));
      CHECK(a.combined.binned_mean() < injury.binned_mean());
    }
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(augment_reference(injury, pdo, 1.0), ValidationError);
    CHECK_THROWS_AS(augment_reference(injury, PdoModel{0.1, 0.0}, 0.5), ValidationError);
  }
}

TEST_CASE("logistic transfer function") {
  const TransferFunction tf{-4.15, 0.388};
  CHECK(tf.midpoint() == doctest::Approx(4.15 / 0.388));
  CHECK(tf.midpoint() == doctest::Approx(10.7).epsilon(0.005));
  CHECK(tf(tf.midpoint()) == doctest::Approx(0.5));
  CHECK(tf(0.0) == doctest::Approx(std::exp(-4.15) / (1.0 + std::exp(-4.15))));
  CHECK(tf(0.0) == doctest::Approx(0.0155).epsilon(0.01));
  CHECK(TransferFunction{-800.0, 1.0}(0.0) == 0.0);
  CHECK(TransferFunction{800.0, 1.0}(0.0) == 1.0);
}

TEST_CASE("transfer cost matches a direct evaluation") {
  Rng rng(21);
  for (int i = 0; i < 50; ++i) {
    const Vec w = random_weights(rng, 20);
    const Vec o = random_weights(rng, 20) * 3.0;
    const TransferFunction tf{rng.uniform(-8.0, -0.5), rng.uniform(0.01, 1.0)};
    CHECK(transfer_cost(hist(w), hist(o), tf) == doctest::Approx(cost_oracle(w, o, tf)).epsilon(1e-12));
  }
}

TEST_CASE("uncensored reference gives a saturated, degenerate fit") {
  const auto ref = fixtures::injury_reference();
  const auto fit = fit_transfer(ref, ref);
  CHECK(fit.degenerate);
  CHECK(fit.on_boundary);
  CHECK(fit.c1_index == TransferGrid{}.c1_count - 1);
  // with C1 capped below zero the flattest P over the support is reached by
  // saturating it with the steepest slope
  for (Eigen::Index k = 0; k < ref.bins(); ++k) {
    if (ref.weights[k] > 0.0) CHECK(fit.tf(ref.centres()[k]) >= 0.99);
  }
  CHECK(fit.cost < 0.01 * ref.total());
}

TEST_CASE("a real censoring signal is not flagged degenerate") {
  const auto injury = fixtures::injury_reference();
  const auto with_pdo = augment_reference(injury, PdoModel{0.189, 0.27}, 0.7).combined;
  TransferGrid grid;
  grid.c2_count = 1000;
  const auto fit = fit_transfer(with_pdo, injury, grid, 2);
  CHECK_FALSE(fit.degenerate);
}

TEST_CASE("transfer fit is reproducible across worker counts") {
  const auto injury = fixtures::injury_reference();
  const auto with_pdo = augment_reference(injury, PdoModel{0.189, 0.27}, 0.7).combined;
  TransferGrid grid;
  grid.c2_count = 1000;
  const auto a = fit_transfer(with_pdo, injury, grid, 1);
  const auto b = fit_transfer(with_pdo, injury, grid, 3);
  CHECK(a.tf.C1 == b.tf.C1);
  CHECK(a.tf.C2 == b.tf.C2);
  CHECK(a.cost == b.cost);
  CHECK_FALSE(a.degenerate);
  // grid optimum is no worse than its neighbours
  for (int di = -1; di <= 1; ++di) {
    for (int dj = -1; dj <= 1; ++dj) {
      const TransferFunction n{grid.c1(a.c1_index + di), grid.c2(a.c2_index + dj)};
      CHECK(transfer_cost(with_pdo, injury, n) >= a.cost);
    }
  }
}

TEST_CASE("transfer fit error paths") {
  const auto ref = fixtures::injury_reference();
  TransferGrid empty;
  empty.c1_count = 0;
  CHECK_THROWS_AS(fit_transfer(ref, ref, empty), ValidationError);
  CHECK_THROWS_AS(fit_transfer(hist(Vec::Zero(4)), ref), FitError);
}

TEST_CASE("applying the transfer") {
  const auto ref = fixtures::injury_reference();
  SUBCASE("near-constant probability leaves the distribution unchanged") {
    DeltaVDistribution small = hist((Vec(3) << 0.2, 0.5, 0.3).finished());
    const auto out = apply_transfer(small, TransferFunction{0.0, 0.001});
    CHECK(out.weights.isApprox(small.weights, 2e-3));
  }
  SUBCASE("positive slope shifts mass upward") {
    Rng rng(5);
    for (int i = 0; i < 100; ++i) {
      const auto h = hist(random_weights(rng, 30));
      const TransferFunction tf{rng.uniform(-10.0, -0.1), rng.uniform(0.001, 2.0)};
      const auto out = apply_transfer(h, tf);
      CHECK(out.total() == doctest::Approx(1.0));
      CHECK(out.binned_mean() >= h.binned_mean() - 1e-12);
      double cin = 0.0;
      double cout = 0.0;
      for (Eigen::Index k = 0; k < h.bins(); ++k) {
        cin += h.weights[k];
        cout += out.weights[k];
        CHECK(cout <= cin + 1e-12);
      }
    }
  }
  SUBCASE("empty input") { CHECK_THROWS_AS(apply_transfer(hist(Vec::Zero(3)), {-4.0, 0.3}), ValidationError); }
}

TEST_CASE("sensitivity harness") {
  const auto injury = fixtures::injury_reference();
  const auto base = build_pdo(fixtures::insurance_occupants(), 0.7, 6);
  const auto model = fixtures::injury_reference(300.0);
  const auto none = fill_sensitivity(base, injury, model, 0.7, 2, 0.0, 1);
  REQUIRE(none.variant_means.size() == 2);
  for (double m : none.variant_means) CHECK(m == doctest::Approx(none.base_mean).epsilon(1e-9));
  CHECK(none.max_abs_shift < 1e-6);
  CHECK_THROWS_AS(fill_sensitivity(base, injury, model, 0.7, 1, 1.0, 1), ValidationError);
  CHECK_THROWS_AS(fill_sensitivity(base, injury, model, 0.7, -1, 0.3, 1), ValidationError);
}

TEST_CASE("occupant files") {
  const auto dir = test::scratch("occupants");
  const auto recs = fixtures::insurance_occupants();
  save_occupants(recs, dir / "o.csv");
  const auto back = load_occupants(dir / "o.csv");
  REQUIRE(back.size() == recs.size());
  for (std::size_t i = 0; i < recs.size(); ++i) {
    CHECK(back[i].delta_v == recs[i].delta_v);
    CHECK(back[i].mais == recs[i].mais);
    CHECK(back[i].role == recs[i].role);
  }
  io::write_text(dir / "bad.csv", "delta_v_kmh,mais,role\n3,0,pilot\n");
  CHECK_THROWS_AS(load_occupants(dir / "bad.csv"), ParseError);
  io::write_text(dir / "bad.csv", "delta_v_kmh,mais,role\n3,7,driver\n");
  CHECK_THROWS_AS(load_occupants(dir / "bad.csv"), ValidationError);
  io::write_text(dir / "bad.csv", "dv,mais\n");
  CHECK_THROWS_AS(load_occupants(dir / "bad.csv"), ParseError);
}
