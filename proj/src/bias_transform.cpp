#include "rearsim/bias_transform.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <thread>

#include <Eigen/Cholesky>

#include "rearsim/errors.hpp"
#include "rearsim/io.hpp"
#include "rearsim/rng.hpp"

namespace rearsim {

std::vector<OccupantRecord> load_occupants(const std::filesystem::path& csv) {
  const auto rows = io::read_csv(csv);
  const std::string name = csv.filename().string();
  if (rows.empty() || io::join_row(rows[0]) != "delta_v_kmh,mais,role") {
    throw ParseError(name + ": header must be 'delta_v_kmh,mais,role'");
  }
  std::vector<OccupantRecord> out;
  out.reserve(rows.size() - 1);
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const std::string ctx = name + " line " + std::to_string(r + 1);
    if (rows[r].size() != 3) throw ParseError(ctx + ": expected 3 fields");
    OccupantRecord rec;
    rec.delta_v = io::parse_double(rows[r][0], ctx);
    rec.mais = static_cast<int>(io::parse_int(rows[r][1], ctx));
    if (rows[r][2] == "driver") rec.role = OccupantRole::kDriver;
    else if (rows[r][2] == "passenger") rec.role = OccupantRole::kPassenger;
    else throw ParseError(ctx + ": role must be driver or passenger");
    if (rec.mais < 0 || rec.mais > 6) throw ValidationError(ctx + ": mais must be in 0..6");
    if (!(rec.delta_v >= 0.0)) throw ValidationError(ctx + ": delta-v must be >= 0");
    out.push_back(rec);
  }
  return out;
}

void save_occupants(const std::vector<OccupantRecord>& records, const std::filesystem::path& csv) {
  std::string out = "delta_v_kmh,mais,role\n";
  for (const auto& r : records) {
    out += io::format_double(r.delta_v) + "," + std::to_string(r.mais) + "," +
           (r.role == OccupantRole::kDriver ? "driver" : "passenger") + "\n";
  }
  io::write_text(csv, out);
}

double PdoModel::density(double dv) const { return B1 * std::exp(-B2 * dv); }

double PdoModel::mass(double lo, double hi) const {
  return B1 / B2 * (std::exp(-B2 * lo) - std::exp(-B2 * hi));
}

namespace {

double bin_centre(Eigen::Index k, double w) { return w * (static_cast<double>(k) + 0.5); }

struct LogLinear {
  double log_amplitude = 0.0;  // log of the fitted count at dv = 0
  double rate = 0.0;
  double residual = 0.0;  // count-weighted squared log error
};

LogLinear fit_log_linear(const Vec& counts, double w) {
  // Weighted least squares of log(count) on (1, -centre), weights = counts.
  Eigen::Matrix2d ata = Eigen::Matrix2d::Zero();
  Eigen::Vector2d atb = Eigen::Vector2d::Zero();
  int used = 0;
  for (Eigen::Index k = 0; k < counts.size(); ++k) {
    if (!(counts[k] > 0.0)) continue;
    const Eigen::Vector2d x(1.0, -bin_centre(k, w));
    ata += counts[k] * x * x.transpose();
    atb += counts[k] * std::log(counts[k]) * x;
    ++used;
  }
  if (used < 2) throw FitError("exponential fit needs at least two populated bins");
  const Eigen::Vector2d beta = ata.ldlt().solve(atb);
  LogLinear out{beta[0], beta[1], 0.0};
  for (Eigen::Index k = 0; k < counts.size(); ++k) {
    if (!(counts[k] > 0.0)) continue;
    const double e = std::log(counts[k]) - (out.log_amplitude - out.rate * bin_centre(k, w));
    out.residual += counts[k] * e * e;
  }
  return out;
}

PdoModel to_model(const LogLinear& f, double w, double complete_count) {
  if (!(f.rate > 0.0)) throw FitError("fitted PDO distribution does not decay with delta-v");
  // A count per bin of exp(a - B2 c) equals N * B1/B2 * exp(-B2 c) * 2 sinh(B2 w / 2).
  const double b1 = std::exp(f.log_amplitude) * f.rate / (complete_count * 2.0 * std::sinh(0.5 * f.rate * w));
  return {b1, f.rate};
}

/// Euclidean projection of y onto {a >= 0, sum(a) = total}.
Vec project_simplex(const Vec& y, double total) {
  if (total <= 0.0) return Vec::Zero(y.size());
  std::vector<double> s(y.begin(), y.end());
  std::sort(s.begin(), s.end(), std::greater<>());
  double cum = 0.0;
  double tau = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    cum += s[i];
    const double t = (cum - total) / static_cast<double>(i + 1);
    if (s[i] - t > 0.0) tau = t;
  }
  return (y.array() - tau).max(0.0).matrix();
}

}  // namespace

PdoModel fit_exponential(const Vec& counts, double bin_width, double complete_count) {
  return to_model(fit_log_linear(counts, bin_width), bin_width, complete_count);
}

PdoFit build_pdo(const std::vector<OccupantRecord>& records, double p_pdo, int n_fill_bins, double bin_width) {
  if (!(p_pdo > 0.0 && p_pdo < 1.0)) throw ValidationError("p_pdo must be in (0, 1)");
  if (n_fill_bins < 1) throw ValidationError("n_fill_bins must be >= 1");
  if (!(bin_width > 0.0)) throw ValidationError("bin width must be positive");

  PdoFit fit;
  fit.bin_width = bin_width;
  Eigen::Index n_bins = n_fill_bins;
  for (const auto& r : records) {
    if (r.mais == 0) {
      fit.n_pdo += 1.0;
      n_bins = std::max(n_bins, static_cast<Eigen::Index>(std::floor(r.delta_v / bin_width)) + 1);
    } else {
      fit.n_injured += 1.0;
    }
  }
  if (fit.n_pdo == 0.0 || fit.n_injured == 0.0) throw ValidationError("occupant records need both MAIS0 and MAIS1+ entries");
  fit.observed = Vec::Zero(n_bins);
  for (const auto& r : records) {
    if (r.mais == 0) fit.observed[static_cast<Eigen::Index>(std::floor(r.delta_v / bin_width))] += 1.0;
  }
  fit.observed.maxCoeff(&fit.mode_bin);
  fit.fill_bins = n_fill_bins;

  fit.pdo_total = fit.n_injured * p_pdo / (1.0 - p_pdo);
  fit.deficit = fit.pdo_total - fit.n_pdo;
  const double tol = 1e-9 * fit.pdo_total;
  if (fit.deficit < -tol) {
    throw ValidationError("MAIS0 share " + io::format_double(fit.n_pdo / (fit.n_pdo + fit.n_injured)) +
                          " already exceeds p_pdo " + io::format_double(p_pdo));
  }
  if (fit.deficit <= tol) fit.deficit = 0.0;
  const double complete = fit.complete_count();

  fit.fill = Vec::Zero(n_bins);
  if (fit.deficit == 0.0) {
    fit.augmented = fit.observed;
    const auto f = fit_log_linear(fit.augmented, bin_width);
    fit.model = to_model(f, bin_width, complete);
    fit.residual_curve.push_back(f.residual);
    return fit;
  }

  // Start from the uncensored tail where possible.
  Vec tail = fit.observed;
  tail.head(n_fill_bins).setZero();
  LogLinear f = (tail.array() > 0.0).count() >= 2 ? fit_log_linear(tail, bin_width)
                                                  : fit_log_linear(fit.observed, bin_width);
  constexpr int kMaxIterations = 500;
  double previous = std::numeric_limits<double>::infinity();
  for (int it = 1; it <= kMaxIterations; ++it) {
    Vec target(n_fill_bins);
    for (Eigen::Index k = 0; k < n_fill_bins; ++k) {
      target[k] = std::exp(f.log_amplitude - f.rate * bin_centre(k, bin_width)) - fit.observed[k];
    }
    fit.fill.head(n_fill_bins) = project_simplex(target, fit.deficit);
    fit.augmented = fit.observed + fit.fill;
    f = fit_log_linear(fit.augmented, bin_width);
    fit.residual_curve.push_back(f.residual);
    fit.iterations = it;
    if (std::abs(previous - f.residual) <= 1e-12 * std::max(1.0, f.residual)) {
      fit.model = to_model(f, bin_width, complete);
      return fit;
    }
    previous = f.residual;
  }
  throw FitError("PDO allocation did not settle after " + std::to_string(kMaxIterations) +
                 " iterations (residual " + io::format_double(f.residual) + ")");
}

AugmentedReference augment_reference(const DeltaVDistribution& injury, const PdoModel& pdo, double p_pdo) {
  if (!(p_pdo >= 0.0 && p_pdo < 1.0)) throw ValidationError("p_pdo must be in [0, 1)");
  if (!(pdo.B1 > 0.0 && pdo.B2 > 0.0)) throw ValidationError("PDO model parameters must be positive");
  const DeltaVDistribution inj = normalize(injury);
  const double w = inj.bin_width;
  // Cover the PDO tail until it is negligible.
  Eigen::Index n = inj.bins();
  while (std::exp(-pdo.B2 * w * static_cast<double>(n)) > 1e-12) ++n;

  Vec pdo_mass(n);
  for (Eigen::Index k = 0; k < n; ++k) pdo_mass[k] = pdo.mass(w * static_cast<double>(k), w * static_cast<double>(k + 1));
  pdo_mass /= pdo_mass.sum();

  AugmentedReference out;
  out.pdo_component = p_pdo * pdo_mass;
  out.combined = pad_to(inj, n);
  out.combined.weights = (1.0 - p_pdo) * out.combined.weights + out.pdo_component;
  out.combined.mean = out.combined.binned_mean();
  out.combined.no_response_mass = 0.0;
  return out;
}

double TransferFunction::operator()(double dv) const {
  const double z = C1 + C2 * dv;
  return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

namespace {

struct Aligned {
  Vec with_pdo;
  Vec original;
  Vec centres;
};

Aligned align(const DeltaVDistribution& with_pdo, const DeltaVDistribution& original) {
  if (with_pdo.bin_width != original.bin_width) throw ValidationError("transfer fit needs a common binning");
  const Eigen::Index n = std::max(with_pdo.bins(), original.bins());
  Aligned a;
  a.with_pdo = pad_to(with_pdo, n).weights;
  a.original = pad_to(original, n).weights;
  a.centres = pad_to(with_pdo, n).centres();
  return a;
}

double cost_of(const Aligned& a, double original_total, const TransferFunction& tf, Vec& scratch) {
  for (Eigen::Index k = 0; k < a.centres.size(); ++k) scratch[k] = a.with_pdo[k] * tf(a.centres[k]);
  const double t = scratch.sum();
  if (!(t > 0.0)) return std::numeric_limits<double>::infinity();
  return (a.original - (original_total / t) * scratch).cwiseAbs().sum();
}

}  // namespace

double transfer_cost(const DeltaVDistribution& with_pdo, const DeltaVDistribution& original,
                     const TransferFunction& tf) {
  const Aligned a = align(with_pdo, original);
  Vec scratch(a.centres.size());
  return cost_of(a, a.original.sum(), tf, scratch);
}

TransferFit fit_transfer(const DeltaVDistribution& with_pdo, const DeltaVDistribution& original,
                         const TransferGrid& grid, unsigned workers) {
  if (grid.c1_count < 1 || grid.c2_count < 1) throw ValidationError("transfer grid is empty");
  const Aligned a = align(with_pdo, original);
  const double total = a.original.sum();
  if (!(total > 0.0) || !(a.with_pdo.sum() > 0.0)) throw FitError("transfer fit needs non-empty histograms");

  struct RowBest {
    double cost = std::numeric_limits<double>::infinity();
    int j = 0;
  };
  std::vector<RowBest> rows(static_cast<std::size_t>(grid.c1_count));
  std::atomic<int> next{0};
  auto worker = [&] {
    Vec scratch(a.centres.size());
    for (int i = next++; i < grid.c1_count; i = next++) {
      RowBest best;
      for (int j = 0; j < grid.c2_count; ++j) {
        const double c = cost_of(a, total, {grid.c1(i), grid.c2(j)}, scratch);
        if (c < best.cost) best = {c, j};
      }
      rows[static_cast<std::size_t>(i)] = best;
    }
  };
  const unsigned n_threads = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(grid.c1_count)));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  TransferFit fit;
  fit.cost = std::numeric_limits<double>::infinity();
  for (int i = 0; i < grid.c1_count; ++i) {
    const auto& r = rows[static_cast<std::size_t>(i)];
    if (r.cost < fit.cost) {
      fit.cost = r.cost;
      fit.c1_index = i;
      fit.c2_index = r.j;
    }
  }
  if (!std::isfinite(fit.cost)) throw FitError("transfer grid search found no finite cost");
  fit.tf = {grid.c1(fit.c1_index), grid.c2(fit.c2_index)};
  fit.on_boundary = fit.c1_index == 0 || fit.c1_index == grid.c1_count - 1 || fit.c2_index == 0 ||
                    fit.c2_index == grid.c2_count - 1;
  // No censoring signal: either the flattest slope, or P saturated (flat to
  // within 1 %) over every occupied bin.
  double p_lo = 1.0;
  double p_hi = 0.0;
  for (Eigen::Index k = 0; k < a.centres.size(); ++k) {
    if (a.with_pdo[k] <= 0.0 && a.original[k] <= 0.0) continue;
    const double p = fit.tf(a.centres[k]);
    p_lo = std::min(p_lo, p);
    p_hi = std::max(p_hi, p);
  }
  fit.degenerate = fit.c2_index == 0 || (p_hi > 0.0 && p_lo >= 0.99 * p_hi);
  return fit;
}

DeltaVDistribution apply_transfer(const DeltaVDistribution& dist, const TransferFunction& tf) {
  DeltaVDistribution out = dist;
  for (Eigen::Index k = 0; k < out.bins(); ++k) out.weights[k] *= tf(out.bin_centre(k));
  out = normalize(std::move(out));
  out.mean = out.binned_mean();
  out.no_response_mass = 0.0;  // not tracked through the reweighting
  return out;
}

SensitivityResult fill_sensitivity(const PdoFit& base, const DeltaVDistribution& injury,
                                   const DeltaVDistribution& model, double p_pdo, int n_variants, double amplitude,
                                   std::uint64_t seed, unsigned workers) {
  if (n_variants < 0 || !(amplitude >= 0.0 && amplitude < 1.0)) {
    throw ValidationError("sensitivity: need n_variants >= 0 and amplitude in [0, 1)");
  }
  auto transformed_mean = [&](const PdoModel& pdo, TransferFunction* tf_out) {
    const auto ref = augment_reference(injury, pdo, p_pdo);
    const auto fit = fit_transfer(ref.combined, injury, {}, workers);
    if (tf_out) *tf_out = fit.tf;
    return apply_transfer(model, fit.tf).mean;
  };

  SensitivityResult out;
  out.base_mean = transformed_mean(base.model, nullptr);
  for (int v = 0; v < n_variants; ++v) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(v)));
    Vec fill = base.fill;
    for (Eigen::Index k = 0; k < fill.size(); ++k) fill[k] *= 1.0 + amplitude * (2.0 * rng.uniform() - 1.0);
    const Vec augmented = base.observed + fill;
    const PdoModel pdo = fit_exponential(augmented, base.bin_width, base.n_injured + augmented.sum());
    TransferFunction tf;
    const double mean = transformed_mean(pdo, &tf);
    out.variant_pdo.push_back(pdo);
    out.variant_tf.push_back(tf);
    out.variant_means.push_back(mean);
    out.max_abs_shift = std::max(out.max_abs_shift, std::abs(mean - out.base_mean));
  }
  return out;
}

}  // namespace rearsim
