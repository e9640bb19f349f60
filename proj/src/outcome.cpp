#include "rearsim/outcome.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "rearsim/errors.hpp"
#include "rearsim/io.hpp"

namespace rearsim {

double delta_v(double v1, double v2, double m1, double m2) {
  if (!(m1 > 0.0) || !(m2 > 0.0)) throw DomainError("delta_v: masses must be positive");
  if (v1 < v2) throw DomainError("delta_v: follower must be faster than the lead at impact");
  // Ratio first so that equal masses give exactly (v1 - v2) / 2.
  const double share = m2 / (m1 + m2);
  return share * (v1 - v2);
}

double delta_v_kmh(double v1, double v2, double m1, double m2) {
  return delta_v(v1, v2, m1, m2) * kMsToKmh;
}

Vec DeltaVDistribution::centres() const {
  Vec c(bins());
  for (Eigen::Index k = 0; k < bins(); ++k) c[k] = bin_centre(k);
  return c;
}

double DeltaVDistribution::binned_mean() const {
  const double t = total();
  return t > 0.0 ? centres().dot(weights) / t : 0.0;
}

DeltaVDistribution build_histogram(std::vector<WeightedSample> samples, double bin_width) {
  if (!(bin_width > 0.0)) throw DomainError("build_histogram: bin width must be positive");
  for (const auto& s : samples) {
    if (!(s.weight >= 0.0) || !std::isfinite(s.weight)) throw DomainError("build_histogram: weights must be >= 0");
    if (!(s.delta_v >= 0.0) || !std::isfinite(s.delta_v)) throw DomainError("build_histogram: delta-v must be >= 0");
  }
  std::sort(samples.begin(), samples.end(), [](const auto& a, const auto& b) {
    return a.delta_v < b.delta_v || (a.delta_v == b.delta_v && a.weight < b.weight);
  });

  DeltaVDistribution h;
  h.bin_width = bin_width;
  if (samples.empty()) {
    h.weights = Vec::Zero(0);
    return h;
  }
  const auto n_bins = static_cast<Eigen::Index>(std::floor(samples.back().delta_v / bin_width)) + 1;
  h.weights = Vec::Zero(n_bins);
  double wsum = 0.0;
  double wdv = 0.0;
  for (const auto& s : samples) {
    h.weights[static_cast<Eigen::Index>(std::floor(s.delta_v / bin_width))] += s.weight;
    wsum += s.weight;
    wdv += s.weight * s.delta_v;
    if (s.weight > 0.0) h.count += 1.0;
  }
  h.mean = wsum > 0.0 ? wdv / wsum : 0.0;
  return h;
}

DeltaVDistribution normalize(DeltaVDistribution h) {
  const double t = h.total();
  if (!(t > 0.0)) throw ValidationError("cannot normalise an empty delta-v distribution");
  h.weights /= t;
  return h;
}

DeltaVDistribution pad_to(DeltaVDistribution h, Eigen::Index bins) {
  if (bins > h.bins()) {
    Vec w = Vec::Zero(bins);
    w.head(h.bins()) = h.weights;
    h.weights = std::move(w);
  }
  return h;
}

DeltaVDistribution mix(const DeltaVDistribution& a, const DeltaVDistribution& b, double fraction) {
  if (!(fraction >= 0.0 && fraction <= 1.0)) throw DomainError("mix: fraction must be in [0, 1]");
  if (a.bin_width != b.bin_width) throw ValidationError("mix: histograms use different bin widths");
  const Eigen::Index n = std::max(a.bins(), b.bins());
  const auto pa = pad_to(a, n);
  const auto pb = pad_to(b, n);
  DeltaVDistribution out;
  out.bin_width = a.bin_width;
  out.weights = (1.0 - fraction) * pa.weights + fraction * pb.weights;
  out.mean = (1.0 - fraction) * a.mean + fraction * b.mean;
  out.count = a.count + b.count;
  out.no_response_mass = (1.0 - fraction) * a.no_response_mass + fraction * b.no_response_mass;
  return out;
}

DeltaVDistribution mix_no_response(const DeltaVDistribution& base, std::span<const double> no_resp_dvs,
                                   double fraction) {
  if (fraction > 0.0 && no_resp_dvs.empty()) throw ValidationError("mix_no_response: no no-response delta-v values");
  if (fraction == 0.0) return base;
  std::vector<WeightedSample> samples;
  samples.reserve(no_resp_dvs.size());
  for (double dv : no_resp_dvs) samples.push_back({dv, 1.0});
  auto nr = normalize(build_histogram(std::move(samples), base.bin_width));
  nr.no_response_mass = 1.0;
  if (base.bins() == 0) {
    if (fraction != 1.0) throw ValidationError("mix_no_response: empty base distribution");
    return nr;
  }
  return mix(base, nr, fraction);
}

double nearest_rank(std::vector<double> values, double p) {
  if (values.empty()) throw DomainError("nearest_rank: empty sample");
  if (!(p > 0.0 && p <= 100.0)) throw DomainError("nearest_rank: percentile must be in (0, 100]");
  std::sort(values.begin(), values.end());
  const auto n = values.size();
  auto rank = static_cast<std::size_t>(std::ceil(p / 100.0 * static_cast<double>(n) - 1e-9));
  rank = std::clamp<std::size_t>(rank, 1, n);
  return values[rank - 1];
}

PrevalenceWeighting prevalence_weights(const std::vector<OutcomeMatrix>& matrices, double trim_low_pct,
                                       double trim_high_pct) {
  if (!(trim_low_pct > 0.0 && trim_low_pct <= trim_high_pct && trim_high_pct <= 100.0)) {
    throw ValidationError("prevalence_weights: invalid trim percentiles");
  }
  PrevalenceWeighting out;
  double total = 0.0;
  for (const auto& m : matrices) {
    const double cm = m.crash_probability();
    if (cm > 0.0) {
      out.seeds.push_back({m.seed_id, cm, 0.0, 0.0, 0.0});
      total += cm;
    } else {
      out.excluded.push_back(m.seed_id);
    }
  }
  if (out.seeds.empty()) return out;

  std::vector<double> raw;
  raw.reserve(out.seeds.size());
  for (auto& s : out.seeds) {
    s.q = s.crash_mass / total;
    s.w_raw = 1.0 / s.q;
    raw.push_back(s.w_raw);
  }
  out.raw_span = *std::max_element(raw.begin(), raw.end()) / *std::min_element(raw.begin(), raw.end());
  out.trim_low = nearest_rank(raw, trim_low_pct);
  out.trim_high = nearest_rank(raw, trim_high_pct);
  out.norm = 0.0;
  for (auto& s : out.seeds) {
    s.w = std::clamp(s.w_raw, out.trim_low, out.trim_high);
    out.norm += s.w * s.crash_mass;
  }
  return out;
}

std::vector<WeightedSample> weighted_crash_samples(const std::vector<OutcomeMatrix>& matrices,
                                                   const PrevalenceWeighting& weighting) {
  std::map<std::string, double> w;
  for (const auto& s : weighting.seeds) w[s.seed_id] = s.w;
  std::vector<WeightedSample> out;
  for (const auto& m : matrices) {
    const auto it = w.find(m.seed_id);
    if (it == w.end()) continue;
    for (Eigen::Index d = 0; d < m.n_decel(); ++d) {
      for (Eigen::Index a = 0; a < m.n_axis1(); ++a) {
        const SimOutcome& c = m.cell(a, d);
        if (!c.crashed) continue;
        out.push_back({delta_v_kmh(c.v1, c.v2, m.follower_mass, m.lead_mass),
                       it->second * m.p_cell(a, d) / weighting.norm});
      }
    }
  }
  return out;
}

std::vector<double> no_response_delta_vs(const std::vector<OutcomeMatrix>& matrices) {
  std::vector<double> out;
  for (const auto& m : matrices) {
    if (m.no_response.crashed) {
      out.push_back(delta_v_kmh(m.no_response.v1, m.no_response.v2, m.follower_mass, m.lead_mass));
    }
  }
  return out;
}

std::vector<WeightedSample> seed_generated_samples(const OutcomeMatrix& m, double no_response_fraction) {
  std::vector<WeightedSample> out;
  const double cm = m.crash_probability();
  const double base_share = 1.0 - no_response_fraction;
  if (cm > 0.0 && base_share > 0.0) {
    for (Eigen::Index d = 0; d < m.n_decel(); ++d) {
      for (Eigen::Index a = 0; a < m.n_axis1(); ++a) {
        const SimOutcome& c = m.cell(a, d);
        if (!c.crashed) continue;
        out.push_back({delta_v_kmh(c.v1, c.v2, m.follower_mass, m.lead_mass), base_share * m.p_cell(a, d) / cm});
      }
    }
  }
  if (no_response_fraction > 0.0 && m.no_response.crashed) {
    out.push_back({delta_v_kmh(m.no_response.v1, m.no_response.v2, m.follower_mass, m.lead_mass),
                   no_response_fraction});
  }
  return out;
}

void save_histogram(const DeltaVDistribution& h, const std::filesystem::path& csv) {
  std::string out = "bin_low_kmh,bin_high_kmh,weight\n";
  for (Eigen::Index k = 0; k < h.bins(); ++k) {
    out += io::format_double(h.bin_low(k)) + "," + io::format_double(h.bin_high(k)) + "," +
           io::format_double(h.weights[k]) + "\n";
  }
  io::write_text(csv, out);
}

DeltaVDistribution load_histogram(const std::filesystem::path& csv) {
  const auto rows = io::read_csv(csv);
  const std::string name = csv.filename().string();
  if (rows.empty() || io::join_row(rows[0]) != "bin_low_kmh,bin_high_kmh,weight") {
    throw ParseError(name + ": header must be 'bin_low_kmh,bin_high_kmh,weight'");
  }
  if (rows.size() < 2) throw ParseError(name + ": no bins");
  DeltaVDistribution h;
  const auto n = static_cast<Eigen::Index>(rows.size() - 1);
  h.weights.resize(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const auto& r = rows[static_cast<std::size_t>(k) + 1];
    const std::string ctx = name + " line " + std::to_string(k + 2);
    if (r.size() != 3) throw ParseError(ctx + ": expected 3 fields");
    const double lo = io::parse_double(r[0], ctx);
    const double hi = io::parse_double(r[1], ctx);
    if (k == 0) h.bin_width = hi - lo;
    if (!(h.bin_width > 0.0) || std::abs(lo - h.bin_low(k)) > 1e-9 || std::abs(hi - h.bin_high(k)) > 1e-9) {
      throw ParseError(ctx + ": bins must be contiguous, equal width and start at 0");
    }
    h.weights[k] = io::parse_double(r[2], ctx);
    if (!(h.weights[k] >= 0.0)) throw ValidationError(ctx + ": negative weight");
  }
  h.mean = h.binned_mean();
  return h;
}

}  // namespace rearsim
