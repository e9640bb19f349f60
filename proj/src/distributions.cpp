#include "rearsim/distributions.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "rearsim/errors.hpp"
#include "rearsim/io.hpp"

namespace rearsim {

namespace {
constexpr double kMassTolerance = 1e-9;
}

Eigen::Index GlanceDistribution::occupied_bins() const {
  return (off_road.array() > 0.0).count();
}

double GlanceDistribution::max_duration() const {
  for (Eigen::Index k = off_road.size() - 1; k >= 0; --k) {
    if (off_road[k] > 0.0) return duration(k);
  }
  return 0.0;
}

Vec OvershootDistribution::axis_values() const {
  Vec v(off_road.size() + 1);
  v[0] = 0.0;
  for (Eigen::Index k = 0; k < off_road.size(); ++k) v[k + 1] = overshoot(k);
  return v;
}

Vec OvershootDistribution::axis_probabilities() const {
  Vec p(off_road.size() + 1);
  p[0] = on_road_mass;
  p.tail(off_road.size()) = off_road;
  return p;
}

Eigen::Index glance_bin(double duration) {
  if (!(duration > 0.0) || !std::isfinite(duration)) {
    throw DomainError("glance durations must be positive and finite");
  }
  const double j = std::ceil(duration / kGlanceBinWidth - 1e-9);
  return static_cast<Eigen::Index>(std::max(1.0, j)) - 1;
}

GlanceDistribution bin_glances(std::span<const double> durations, double on_road_fraction) {
  if (!(on_road_fraction >= 0.0 && on_road_fraction < 1.0)) {
    throw ValidationError("on_road_fraction must be in [0, 1)");
  }
  if (durations.empty()) throw ValidationError("no off-road glances but on_road_fraction < 1");

  std::vector<Eigen::Index> idx;
  idx.reserve(durations.size());
  for (double d : durations) idx.push_back(glance_bin(d));
  const Eigen::Index bins = *std::max_element(idx.begin(), idx.end()) + 1;

  GlanceDistribution g;
  g.on_road_mass = on_road_fraction;
  g.off_road = Vec::Zero(bins);
  for (auto k : idx) g.off_road[k] += 1.0;
  g.off_road *= (1.0 - on_road_fraction) / static_cast<double>(durations.size());
  return g;
}

OvershootDistribution overshoot_transform(const GlanceDistribution& g) {
  OvershootDistribution o;
  o.on_road_mass = g.on_road_mass;
  o.off_road = Vec::Zero(g.bins());
  double tail = 0.0;
  for (Eigen::Index k = g.bins() - 1; k >= 0; --k) {
    tail += g.off_road[k] / static_cast<double>(k + 1);
    o.off_road[k] = tail;
  }
  const double total = o.off_road.sum();
  if (total > 0.0) o.off_road *= (1.0 - g.on_road_mass) / total;
  return o;
}

GlanceDistribution cut_glances(const GlanceDistribution& g, double cut_at) {
  if (!(cut_at > 0.0)) throw DomainError("cut_glances: cut_at must be positive");
  if (std::isinf(cut_at)) return g;
  const auto keep = static_cast<Eigen::Index>(std::floor(cut_at / kGlanceBinWidth + 1e-9));
  if (keep >= g.bins()) return g;

  const double original = g.off_road_mass();
  GlanceDistribution out;
  out.on_road_mass = g.on_road_mass;
  out.off_road = g.off_road.head(keep);
  if (original == 0.0) return out;
  const double kept = out.off_road.sum();
  if (!(kept > 0.0)) {
    throw ValidationError("cut_glances: no off-road glances remain at or below " + io::format_double(cut_at) + " s");
  }
  out.off_road *= original / kept;
  return out;
}

DecelDistribution bin_decels(std::span<const double> d_values, double bin_width) {
  if (!(bin_width > 0.0)) throw DomainError("bin_decels: bin width must be positive");
  if (d_values.empty()) throw ValidationError("bin_decels: no deceleration values");
  std::map<long long, double> counts;
  for (double d : d_values) {
    if (!(d > 0.0) || !std::isfinite(d)) throw DomainError("bin_decels: decelerations must be positive");
    counts[static_cast<long long>(std::floor(d / bin_width))] += 1.0;
  }
  DecelDistribution out;
  out.bin_width = bin_width;
  out.d_max.resize(static_cast<Eigen::Index>(counts.size()));
  out.probabilities.resize(out.d_max.size());
  Eigen::Index i = 0;
  for (const auto& [b, c] : counts) {
    out.d_max[i] = (static_cast<double>(b) + 0.5) * bin_width;
    out.probabilities[i] = c / static_cast<double>(d_values.size());
    ++i;
  }
  return out;
}

void validate(const GlanceDistribution& g) {
  if (!(g.on_road_mass >= 0.0 && g.on_road_mass <= 1.0)) throw ValidationError("on_road_mass must be in [0, 1]");
  if ((g.off_road.array() < 0.0).any() || !g.off_road.allFinite()) {
    throw ValidationError("glance probabilities must be finite and non-negative");
  }
  if (std::abs(g.on_road_mass + g.off_road.sum() - 1.0) > kMassTolerance) {
    throw ValidationError("glance distribution does not sum to 1");
  }
}

void validate(const DecelDistribution& d) {
  if (d.d_max.size() == 0 || d.d_max.size() != d.probabilities.size()) {
    throw ValidationError("deceleration distribution is empty or ragged");
  }
  if ((d.d_max.array() <= 0.0).any()) throw ValidationError("deceleration bins must be positive");
  for (Eigen::Index i = 1; i < d.d_max.size(); ++i) {
    if (!(d.d_max[i] > d.d_max[i - 1])) throw ValidationError("deceleration bins must be ascending");
  }
  if ((d.probabilities.array() < 0.0).any()) throw ValidationError("deceleration probabilities must be >= 0");
  if (std::abs(d.probabilities.sum() - 1.0) > kMassTolerance) {
    throw ValidationError("deceleration distribution does not sum to 1");
  }
}

GlanceDistribution load_glance_distribution(const std::filesystem::path& csv) {
  const auto rows = io::read_csv(csv);
  const std::string name = csv.filename().string();
  if (rows.size() < 2 || rows[0].size() != 2 || rows[0][0] != "on_road_mass") {
    throw ParseError(name + ": first row must be 'on_road_mass,<value>'");
  }
  if (io::join_row(rows[1]) != "duration_s,probability") {
    throw ParseError(name + ": second row must be 'duration_s,probability'");
  }
  GlanceDistribution g;
  g.on_road_mass = io::parse_double(rows[0][1], name + " on_road_mass");
  std::map<Eigen::Index, double> bins;
  for (std::size_t r = 2; r < rows.size(); ++r) {
    const std::string ctx = name + " line " + std::to_string(r + 1);
    if (rows[r].size() != 2) throw ParseError(ctx + ": expected 2 fields");
    const double dur = io::parse_double(rows[r][0], ctx);
    const double p = io::parse_double(rows[r][1], ctx);
    const Eigen::Index k = glance_bin(dur);
    if (std::abs(dur - kGlanceBinWidth * static_cast<double>(k + 1)) > 1e-6) {
      throw ParseError(ctx + ": duration is not a multiple of 0.1 s");
    }
    bins[k] += p;
  }
  const Eigen::Index n = bins.empty() ? 0 : bins.rbegin()->first + 1;
  g.off_road = Vec::Zero(n);
  for (const auto& [k, p] : bins) g.off_road[k] = p;
  validate(g);
  return g;
}

void save_glance_distribution(const GlanceDistribution& g, const std::filesystem::path& csv) {
  std::string out = "on_road_mass," + io::format_double(g.on_road_mass) + "\nduration_s,probability\n";
  for (Eigen::Index k = 0; k < g.bins(); ++k) {
    out += io::format_double(g.duration(k)) + "," + io::format_double(g.off_road[k]) + "\n";
  }
  io::write_text(csv, out);
}

DecelDistribution load_decel_distribution(const std::filesystem::path& csv) {
  const auto rows = io::read_csv(csv);
  const std::string name = csv.filename().string();
  if (rows.empty() || io::join_row(rows[0]) != "d_max_ms2,probability") {
    throw ParseError(name + ": header must be 'd_max_ms2,probability'");
  }
  DecelDistribution d;
  const auto n = static_cast<Eigen::Index>(rows.size() - 1);
  d.d_max.resize(n);
  d.probabilities.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = rows[static_cast<std::size_t>(i) + 1];
    const std::string ctx = name + " line " + std::to_string(i + 2);
    if (r.size() != 2) throw ParseError(ctx + ": expected 2 fields");
    d.d_max[i] = io::parse_double(r[0], ctx);
    d.probabilities[i] = io::parse_double(r[1], ctx);
  }
  if (n >= 2) d.bin_width = (d.d_max.tail(n - 1) - d.d_max.head(n - 1)).minCoeff();
  validate(d);
  return d;
}

void save_decel_distribution(const DecelDistribution& d, const std::filesystem::path& csv) {
  std::string out = "d_max_ms2,probability\n";
  for (Eigen::Index i = 0; i < d.d_max.size(); ++i) {
    out += io::format_double(d.d_max[i]) + "," + io::format_double(d.probabilities[i]) + "\n";
  }
  io::write_text(csv, out);
}

}  // namespace rearsim
