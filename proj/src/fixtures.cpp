#include "rearsim/fixtures.hpp"

#include <algorithm>
#include <cmath>

#include <boost/math/distributions/gamma.hpp>
#include <boost/math/distributions/normal.hpp>

#include "rearsim/errors.hpp"
#include "rearsim/rng.hpp"

namespace rearsim::fixtures {

namespace {

double stratum(std::size_t i, std::size_t n) { return (static_cast<double>(i) + 0.5) / static_cast<double>(n); }

/// Log-normal quantiles, clipped to (0, cap].
std::vector<double> lognormal_sample(std::size_t n, double median, double sigma, double cap) {
  const boost::math::normal_distribution<double> z;
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = std::min(cap, median * std::exp(sigma * boost::math::quantile(z, stratum(i, n))));
  }
  return out;
}

/// One glance in the middle of every 0.1 s bin up to `bins`.
std::vector<double> coverage(int bins) {
  std::vector<double> out;
  for (int k = 1; k <= bins; ++k) out.push_back(0.1 * k - 0.05);
  return out;
}

std::vector<double> gamma_sample(std::size_t n, double shape, double scale) {
  const boost::math::gamma_distribution<double> g(shape, scale);
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = boost::math::quantile(g, stratum(i, n));
  return out;
}

int injury_level(double dv) { return dv < 20.0 ? 1 : (dv < 30.0 ? 2 : 3); }

OccupantRole role_of(std::size_t i) { return i % 3 == 2 ? OccupantRole::kPassenger : OccupantRole::kDriver; }

}  // namespace

std::vector<double> naturalistic_glance_durations() {
  auto out = coverage(66);
  const auto body = lognormal_sample(4604 - out.size(), 0.9, 0.55, 6.6);
  out.insert(out.end(), body.begin(), body.end());
  return out;
}

GlanceDistribution naturalistic_glances() {
  return bin_glances(naturalistic_glance_durations(), kNaturalisticOnRoad);
}

std::vector<double> test_track_glance_durations() {
  auto out = coverage(26);
  const auto body = lognormal_sample(200, 0.7, 0.45, 2.6);
  out.insert(out.end(), body.begin(), body.end());
  return out;
}

GlanceDistribution test_track_glances() {
  return bin_glances(test_track_glance_durations(), kNaturalisticOnRoad);
}

std::vector<double> max_decelerations() {
  // Triangular on [2, 10.4] with its mode at 7.5 m/s^2.
  constexpr double lo = 2.0;
  constexpr double span = 8.4;
  constexpr double c = (7.5 - lo) / span;
  std::vector<double> out(45);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double u = stratum(i, out.size());
    const double x = u < c ? std::sqrt(u * c) : 1.0 - std::sqrt((1.0 - u) * (1.0 - c));
    out[i] = lo + span * x;
  }
  return out;
}

DecelDistribution decel_distribution() { return bin_decels(max_decelerations()); }

std::vector<OccupantRecord> insurance_occupants() {
  // MAIS0 density: exp(-0.27 dv) thinned at low delta-v by a repair-cost threshold.
  constexpr double step = 0.01;
  constexpr double top = 60.0;
  const auto n_grid = static_cast<std::size_t>(top / step);
  std::vector<double> cdf(n_grid + 1, 0.0);
  auto dens = [](double v) { return std::exp(-0.27 * v) / (1.0 + std::exp(-(v - 10.0) / 1.2)); };
  for (std::size_t i = 1; i <= n_grid; ++i) {
    const double v = step * static_cast<double>(i);
    cdf[i] = cdf[i - 1] + 0.5 * step * (dens(v - step) + dens(v));
  }
  std::vector<OccupantRecord> out;
  constexpr std::size_t n_pdo = 430;
  for (std::size_t i = 0; i < n_pdo; ++i) {
    const double target = stratum(i, n_pdo) * cdf.back();
    const auto it = std::lower_bound(cdf.begin(), cdf.end(), target);
    const auto j = static_cast<std::size_t>(it - cdf.begin());
    const double f = (target - cdf[j - 1]) / (cdf[j] - cdf[j - 1]);
    out.push_back({step * (static_cast<double>(j - 1) + f), 0, role_of(i)});
  }
  const auto injured = gamma_sample(570, 3.0, 5.0);
  for (std::size_t i = 0; i < injured.size(); ++i) out.push_back({injured[i], injury_level(injured[i]), role_of(i)});
  return out;
}

std::vector<OccupantRecord> exponential_pdo_occupants(double B1, double B2, double n_complete,
                                                      const std::vector<double>& keep, double bin_width) {
  const PdoModel pdo{B1, B2};
  const double pdo_share = B1 / B2;
  if (!(pdo_share > 0.0 && pdo_share < 1.0)) throw ValidationError("exponential_pdo_occupants: B1/B2 must be in (0, 1)");
  std::vector<OccupantRecord> out;
  for (int k = 0;; ++k) {
    const double lo = bin_width * k;
    const auto full = static_cast<long long>(std::llround(n_complete * pdo.mass(lo, lo + bin_width)));
    if (full == 0) break;
    const double kept_share = static_cast<std::size_t>(k) < keep.size() ? keep[static_cast<std::size_t>(k)] : 1.0;
    const auto kept = static_cast<std::size_t>(std::llround(static_cast<double>(full) * kept_share));
    for (std::size_t j = 0; j < kept; ++j) out.push_back({lo + bin_width * stratum(j, kept), 0, role_of(j)});
  }
  const auto n_inj = static_cast<std::size_t>(std::llround(n_complete * (1.0 - pdo_share)));
  const auto injured = gamma_sample(n_inj, 4.0, 4.5);
  for (std::size_t i = 0; i < injured.size(); ++i) out.push_back({injured[i], injury_level(injured[i]), role_of(i)});
  return out;
}

DeltaVDistribution injury_reference(double n) {
  const auto dv = gamma_sample(static_cast<std::size_t>(n), 4.0, 4.5);
  std::vector<WeightedSample> samples;
  samples.reserve(dv.size());
  for (double v : dv) samples.push_back({v, 1.0});
  return normalize(build_histogram(std::move(samples)));
}

LogisticRisk example_risk_parameters(int mais_level) {
  switch (mais_level) {
    case 1: return {"MAIS1+", -2.5, 0.12};
    case 2: return {"MAIS2+", -6.0, 0.12};
    case 3: return {"MAIS3+", -8.5, 0.13};
    default: throw DomainError("example_risk_curve: level must be 1, 2 or 3");
  }
}

InjuryRiskCurve example_risk_curve(int mais_level) {
  const auto p = example_risk_parameters(mais_level);
  return InjuryRiskCurve::logistic(p.level, p.intercept, p.slope);
}

std::vector<OutcomeMatrix> weighting_stress_matrices(int n_seeds, double span) {
  if (n_seeds < 2 || !(span > 1.0)) throw DomainError("weighting_stress_matrices: need >= 2 seeds and span > 1");
  std::vector<OutcomeMatrix> out;
  for (int i = 0; i < n_seeds; ++i) {
    const double mass = std::pow(span, -static_cast<double>(i) / (n_seeds - 1));
    OutcomeMatrix m;
    m.seed_id = "stress_" + std::string(i < 10 ? "00" : (i < 100 ? "0" : "")) + std::to_string(i);
    m.axis1 = (Vec(2) << 0.0, 0.1).finished();
    m.axis1_prob = (Vec(2) << 1.0 - mass, mass).finished();
    m.decel = Vec::Constant(1, 6.75);
    m.decel_prob = Vec::Constant(1, 1.0);
    m.cells = {SimOutcome{}, SimOutcome{true, 1.0, 8.0 + 0.25 * i, 0.0, false}};
    m.no_response = SimOutcome{true, 1.5, 12.0 + 0.25 * i, 0.0, true};
    m.follower_mass = 1500.0;
    m.lead_mass = 1500.0;
    out.push_back(std::move(m));
  }
  return out;
}

SynthConfig small_seed_config(int n_seeds) {
  SynthConfig c;
  c.n_seeds = n_seeds;
  return c;
}

Vec multinomial_counts(const Vec& probabilities, int n, std::uint64_t seed) {
  Vec cdf(probabilities.size());
  double acc = 0.0;
  for (Eigen::Index k = 0; k < probabilities.size(); ++k) cdf[k] = (acc += probabilities[k]);
  Vec counts = Vec::Zero(probabilities.size());
  Rng rng(seed);
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform() * acc;
    const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    counts[std::min<Eigen::Index>(static_cast<Eigen::Index>(it - cdf.begin()), counts.size() - 1)] += 1.0;
  }
  return counts;
}

}  // namespace rearsim::fixtures
