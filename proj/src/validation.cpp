#include "rearsim/validation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include <boost/math/special_functions/gamma.hpp>

#include "rearsim/errors.hpp"
#include "rearsim/io.hpp"

namespace rearsim {

ComparisonStats compare(const DeltaVDistribution& p, const DeltaVDistribution& q) {
  if (p.bin_width != q.bin_width) throw ValidationError("compare: histograms must share the bin width");
  const Eigen::Index n = std::max(p.bins(), q.bins());
  if (n == 0) throw ValidationError("compare: empty histograms");
  const Arr a = normalize(pad_to(p, n)).weights.array();
  const Arr b = normalize(pad_to(q, n)).weights.array();
  const Arr diff = (a - b).abs();

  ComparisonStats s;
  s.abs_mean_diff = std::abs(p.mean - q.mean);
  s.mean_abs_diff = diff.mean();
  s.weighted_mean_abs_diff = (diff * 0.5 * (a + b)).sum() / (0.5 * (a + b)).sum();
  s.max_abs_diff = diff.maxCoeff();
  s.tv_distance = 0.5 * diff.sum();

  const double np = p.count > 0.0 ? p.count : static_cast<double>(n);
  const double nq = q.count > 0.0 ? q.count : static_cast<double>(n);
  const Arr ps = (a * np + 0.5) / (np + 0.5 * static_cast<double>(n));
  const Arr qs = (b * nq + 0.5) / (nq + 0.5 * static_cast<double>(n));
  s.kl_divergence = std::max(0.0, (ps * (ps / qs).log()).sum());

  double ca = 0.0;
  double cb = 0.0;
  for (Eigen::Index k = 0; k < n; ++k) {
    ca += a[k];
    cb += b[k];
    s.ks_distance = std::max(s.ks_distance, std::abs(ca - cb));
  }
  s.ks_distance = std::min(1.0, s.ks_distance);
  s.tv_distance = std::min(1.0, s.tv_distance);
  return s;
}

const char* to_string(PercentileMarker m) {
  switch (m) {
    case PercentileMarker::kInRange: return "in-range";
    case PercentileMarker::kBelowMin: return "below-min";
    case PercentileMarker::kAboveMax: return "above-max";
  }
  return "unknown";
}

SeedPercentile seed_percentile(double seed_dv, std::span<const WeightedSample> generated, double tie_share) {
  if (!(tie_share >= 0.0 && tie_share <= 1.0)) throw DomainError("seed_percentile: tie share must be in [0, 1]");
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  double total = 0.0;
  double below = 0.0;
  double equal = 0.0;
  for (const auto& g : generated) {
    if (!(g.weight > 0.0)) continue;
    lo = std::min(lo, g.delta_v);
    hi = std::max(hi, g.delta_v);
    total += g.weight;
    if (g.delta_v < seed_dv) below += g.weight;
    else if (g.delta_v == seed_dv) equal += g.weight;
  }
  if (!(total > 0.0)) throw ValidationError("seed_percentile: generated distribution is empty");
  SeedPercentile out;
  if (seed_dv < lo) {
    out.marker = PercentileMarker::kBelowMin;
  } else if (seed_dv > hi) {
    out.marker = PercentileMarker::kAboveMax;
  } else {
    out.percentile = std::clamp(100.0 * (below + tie_share * equal) / total, 0.0, 100.0);
  }
  return out;
}

double chi_square_sf(double chi2, int dof) {
  if (dof < 1) throw DomainError("chi_square_sf: dof must be >= 1");
  if (!(chi2 >= 0.0)) throw DomainError("chi_square_sf: statistic must be >= 0");
  return boost::math::gamma_q(0.5 * dof, 0.5 * chi2);
}

PercentileReport percentile_histogram(const std::vector<SeedPercentile>& seeds, int n_bins) {
  if (n_bins < 2) throw ValidationError("percentile_histogram: need at least 2 bins");
  PercentileReport r;
  r.counts = Vec::Zero(n_bins);
  r.dof = n_bins - 1;
  for (const auto& s : seeds) {
    switch (s.marker) {
      case PercentileMarker::kBelowMin: ++r.below_min; break;
      case PercentileMarker::kAboveMax: ++r.above_max; break;
      case PercentileMarker::kInRange: {
        const auto k = std::min<Eigen::Index>(n_bins - 1, static_cast<Eigen::Index>(s.percentile / 100.0 * n_bins));
        r.counts[k] += 1.0;
        ++r.in_range;
        break;
      }
    }
  }
  if (r.in_range == 0) {
    r.p_value = std::numeric_limits<double>::quiet_NaN();
    return r;
  }
  const double expected = static_cast<double>(r.in_range) / n_bins;
  r.chi_square = ((r.counts.array() - expected).square() / expected).sum();
  r.p_value = chi_square_sf(r.chi_square, r.dof);
  return r;
}

// ---------------------------------------------------------------------------
// Injury risk

InjuryRiskCurve InjuryRiskCurve::tabulated(std::string level, Vec delta_v, Vec risk) {
  if (delta_v.size() == 0 || delta_v.size() != risk.size()) throw ValidationError("risk curve: empty or ragged table");
  for (Eigen::Index i = 0; i < risk.size(); ++i) {
    if (!(risk[i] >= 0.0 && risk[i] <= 1.0)) throw ValidationError("risk curve: values must be in [0, 1]");
    if (i > 0 && !(delta_v[i] > delta_v[i - 1])) throw ValidationError("risk curve: delta-v must be ascending");
    if (i > 0 && risk[i] < risk[i - 1]) throw ValidationError("risk curve: risk must be nondecreasing");
  }
  InjuryRiskCurve c;
  c.level_ = std::move(level);
  c.dv_ = std::move(delta_v);
  c.risk_ = std::move(risk);
  return c;
}

InjuryRiskCurve InjuryRiskCurve::logistic(std::string level, double intercept, double slope) {
  if (!(slope >= 0.0)) throw ValidationError("risk curve: logistic slope must be >= 0");
  InjuryRiskCurve c;
  c.level_ = std::move(level);
  c.logistic_ = true;
  c.intercept_ = intercept;
  c.slope_ = slope;
  return c;
}

InjuryRiskCurve InjuryRiskCurve::constant(std::string level, double value) {
  return tabulated(std::move(level), Vec::Constant(1, 0.0), Vec::Constant(1, value));
}

InjuryRiskCurve InjuryRiskCurve::load(const std::filesystem::path& path) {
  if (path.extension() == ".json") {
    const auto doc = io::read_json(path);
    try {
      return logistic(doc.value("level", path.stem().string()), doc.at("intercept").get<double>(),
                      doc.at("slope").get<double>());
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path.filename().string() + ": " + e.what());
    }
  }
  const auto rows = io::read_csv(path);
  const std::string name = path.filename().string();
  if (rows.empty() || io::join_row(rows[0]) != "delta_v_kmh,risk") {
    throw ParseError(name + ": header must be 'delta_v_kmh,risk'");
  }
  const auto n = static_cast<Eigen::Index>(rows.size() - 1);
  Vec dv(n);
  Vec risk(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = rows[static_cast<std::size_t>(i) + 1];
    const std::string ctx = name + " line " + std::to_string(i + 2);
    if (r.size() != 2) throw ParseError(ctx + ": expected 2 fields");
    dv[i] = io::parse_double(r[0], ctx);
    risk[i] = io::parse_double(r[1], ctx);
  }
  return tabulated(path.stem().string(), std::move(dv), std::move(risk));
}

double InjuryRiskCurve::operator()(double dv) const {
  if (logistic_) {
    const double z = intercept_ + slope_ * dv;
    return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
  }
  const Eigen::Index n = dv_.size();
  if (dv <= dv_[0]) return risk_[0];
  if (dv >= dv_[n - 1]) return risk_[n - 1];
  const auto it = std::upper_bound(dv_.begin(), dv_.end(), dv);
  const auto i = static_cast<Eigen::Index>(it - dv_.begin());
  const double f = (dv - dv_[i - 1]) / (dv_[i] - dv_[i - 1]);
  return risk_[i - 1] + f * (risk_[i] - risk_[i - 1]);
}

double injury_risk(const DeltaVDistribution& h, const InjuryRiskCurve& curve) {
  const DeltaVDistribution n = normalize(h);
  double s = 0.0;
  for (Eigen::Index k = 0; k < n.bins(); ++k) s += curve(n.bin_centre(k)) * n.weights[k];
  return s;
}

// ---------------------------------------------------------------------------
// Avoidance

AvoidanceResult crash_avoidance_rate(const std::vector<OutcomeMatrix>& baseline,
                                     const std::vector<OutcomeMatrix>& treatment) {
  std::map<std::string, const OutcomeMatrix*> treat;
  for (const auto& m : treatment) treat[m.seed_id] = &m;
  AvoidanceResult out;
  double sum = 0.0;
  for (const auto& b : baseline) {
    const auto it = treat.find(b.seed_id);
    if (it == treat.end()) throw ValidationError("avoidance: seed '" + b.seed_id + "' missing from treatment");
    const double pb = b.crash_probability();
    if (!(pb > 0.0)) {
      ++out.skipped;
      continue;
    }
    const double pt = it->second->crash_probability();
    out.seeds.push_back({b.seed_id, pb, pt, 1.0 - pt / pb});
    sum += out.seeds.back().avoidance;
  }
  if (!out.seeds.empty()) out.rate = sum / static_cast<double>(out.seeds.size());
  return out;
}

}  // namespace rearsim
