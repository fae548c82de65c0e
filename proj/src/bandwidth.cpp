#include "quantband/bandwidth.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "quantband/error.hpp"
#include "quantband/parallel.hpp"

namespace quantband {
namespace {

constexpr double kPi = std::numbers::pi;

double mean_of(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sample_variance(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return ss / static_cast<double>(v.size() - 1);
}

double sample_covariance(std::span<const double> a, std::span<const double> b) {
  const double ma = mean_of(a);
  const double mb = mean_of(b);
  double ss = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) ss += (a[i] - ma) * (b[i] - mb);
  return ss / static_cast<double>(a.size() - 1);
}

std::vector<double> linspace(double lo, double hi, std::size_t count) {
  std::vector<double> out(count);
  const double step = (hi - lo) / static_cast<double>(count - 1);
  for (std::size_t i = 0; i < count; ++i) out[i] = lo + step * static_cast<double>(i);
  out.back() = hi;
  return out;
}

std::vector<std::size_t> complement(std::size_t n, std::span<const std::size_t> held_out) {
  std::vector<std::uint8_t> out_mask(n, 0);
  for (std::size_t i : held_out) out_mask[i] = 1;
  std::vector<std::size_t> keep;
  keep.reserve(n - held_out.size());
  for (std::size_t i = 0; i < n; ++i) {
    if (!out_mask[i]) keep.push_back(i);
  }
  return keep;
}

template <class T>
std::vector<double> gather(std::span<const T> values, std::span<const std::size_t> rows) {
  std::vector<double> out;
  out.reserve(rows.size());
  for (std::size_t r : rows) out.push_back(values[r]);
  return out;
}

}  // namespace

void TuningParams::validate() const {
  if (folds < 2) throw InputError("J (folds) must be >= 2");
  if (!(zeta > 1.0)) throw InputError("zeta must be > 1");
  if (levels < 2) throw InputError("L must be >= 2");
  if (!(rho > 1.0)) throw InputError("rho must be > 1");
  if (simex_reps < 1) throw InputError("D must be >= 1");
  for (double h : h_grid) {
    if (!(h > 0.0) || !std::isfinite(h)) throw InputError("h_grid entries must be positive");
  }
}

const char* pilot_name(PilotKind kind) {
  switch (kind) {
    case PilotKind::kCv:
      return "cv";
    case PilotKind::kSimex:
      return "simex";
    case PilotKind::kManual:
      return "manual";
  }
  return "unknown";
}

double check_loss(double tau, double u) { return u < 0.0 ? (tau - 1.0) * u : tau * u; }

std::vector<double> log_grid(double lo, double hi, std::size_t count) {
  if (count == 1) return {lo};
  std::vector<double> out(count);
  const double llo = std::log(lo);
  const double step = (std::log(hi) - llo) / static_cast<double>(count - 1);
  for (std::size_t i = 0; i < count; ++i) out[i] = std::exp(llo + step * static_cast<double>(i));
  return out;
}

std::vector<double> default_h_grid(const PrimarySample& sample) {
  const double sd = std::sqrt(sample_variance(sample.w()));
  const double scale = sd * std::pow(static_cast<double>(sample.n()), -1.0 / 9.0);
  return log_grid(0.05 * scale, 2.0 * scale, 32);
}

std::size_t argmin_finite(std::span<const double> values) {
  std::size_t best = values.size();
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) continue;
    if (best == values.size() || values[i] < values[best]) best = i;
  }
  if (best == values.size()) throw NoFiniteCandidate("every bandwidth candidate is non-finite");
  return best;
}

// --- weighting bandwidth -------------------------------------------------------

double weight_bandwidth_objective(const ErrorModel& model, double b, std::size_t n,
                                  double sigma_x) {
  const double kappa = kernel_moments().kappa21;
  const double variance =
      inverse_charfn_energy(model, b) / (2.0 * kPi * static_cast<double>(n) * b);
  const double roughness = 3.0 / (8.0 * std::sqrt(kPi) * std::pow(sigma_x, 5.0));
  return variance + kappa * kappa * std::pow(b, 4.0) / 4.0 * roughness;
}

double signal_sd_proxy(const PrimarySample& sample, const ErrorModel& model) {
  return std::sqrt(std::max(sample_variance(sample.w()) - model.variance(), 1e-6));
}

double weight_bandwidth_b(const PrimarySample& sample, const ErrorModel& model) {
  const double sigma_x = signal_sd_proxy(sample, model);
  const std::vector<double> grid = log_grid(0.05 * sigma_x, 5.0 * sigma_x, 64);
  std::vector<double> values(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    values[i] = weight_bandwidth_objective(model, grid[i], sample.n(), sigma_x);
  }
  return grid[argmin_finite(values)];
}

double weight_bandwidth_b(std::span<const double> aux, const PrimarySample& sample) {
  return weight_bandwidth_b(sample, ErrorModel::empirical({aux.begin(), aux.end()}));
}

// --- cross-validation pilot ----------------------------------------------------------

std::vector<std::vector<std::size_t>> make_folds(std::size_t n, std::size_t folds, Rng& rng) {
  if (folds < 1 || folds > n) throw InputError("fold count must lie in [1, n]");
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<std::vector<std::size_t>> out(folds);
  std::size_t start = 0;
  for (std::size_t j = 0; j < folds; ++j) {
    const std::size_t size = n / folds + (j < n % folds ? 1 : 0);
    out[j].assign(perm.begin() + static_cast<std::ptrdiff_t>(start),
                  perm.begin() + static_cast<std::ptrdiff_t>(start + size));
    start += size;
  }
  return out;
}

namespace {

struct CvWorkspace {
  std::vector<double> x;          // integration nodes
  std::vector<double> trapezoid;  // integration weights
  Matrix weight_b;                // (g, i) = K_{U,b}(x_g - W_i)
  std::vector<std::vector<std::size_t>> train_rows;
  std::vector<PrimarySample> train;
};

CvWorkspace make_workspace(const PrimarySample& sample, const ErrorModel& model,
                           const CvSetup& setup) {
  if (setup.x_points < 2) throw InputError("CV integration needs at least 2 points");
  CvWorkspace ws;
  ws.x = linspace(setup.x_lo, setup.x_hi, setup.x_points);
  const double dx = (setup.x_hi - setup.x_lo) / static_cast<double>(setup.x_points - 1);
  ws.trapezoid.assign(setup.x_points, dx);
  ws.trapezoid.front() = ws.trapezoid.back() = 0.5 * dx;

  const DeconvKernel kb(model, setup.b);
  ws.weight_b = Matrix(setup.x_points, sample.n());
  for (std::size_t g = 0; g < setup.x_points; ++g) kb.weights(ws.x[g], sample.w(), ws.weight_b.row(g));

  for (const auto& fold : setup.folds) {
    ws.train_rows.push_back(complement(sample.n(), fold));
    ws.train.push_back(sample.subset(ws.train_rows.back()));
  }
  return ws;
}

double cv_value(const PrimarySample& sample, const ErrorModel& model, double h,
                const CvSetup& setup, const CvWorkspace& ws) {
  const DeconvKernel kh(model, h);
  const std::size_t gcount = ws.x.size();
  Matrix weight_h(gcount, sample.n());
  for (std::size_t g = 0; g < gcount; ++g) kh.weights(ws.x[g], sample.w(), weight_h.row(g));

  double total = 0.0;
  std::vector<double> train_weights;
  for (std::size_t j = 0; j < setup.folds.size(); ++j) {
    const auto& rows = ws.train_rows[j];
    train_weights.resize(rows.size());
    for (std::size_t g = 0; g < gcount; ++g) {
      const auto wh = weight_h.row(g);
      for (std::size_t r = 0; r < rows.size(); ++r) train_weights[r] = wh[rows[r]];
      const auto theta = try_fit_point(train_weights, ws.train[j], setup.tau0);
      if (!theta) return std::numeric_limits<double>::quiet_NaN();
      for (std::size_t i : setup.folds[j]) {
        total += ws.trapezoid[g] * check_loss(setup.tau0, sample.y()[i] - *theta) *
                 ws.weight_b(g, i);
      }
    }
  }
  return total / static_cast<double>(sample.n());
}

}  // namespace

double cv_criterion(const PrimarySample& sample, const ErrorModel& model, double h,
                    const CvSetup& setup) {
  const CvWorkspace ws = make_workspace(sample, model, setup);
  return cv_value(sample, model, h, setup, ws);
}

std::vector<double> cv_curve(const PrimarySample& sample, const ErrorModel& model,
                             std::span<const double> h_grid, const CvSetup& setup) {
  const CvWorkspace ws = make_workspace(sample, model, setup);
  std::vector<double> values(h_grid.size());
  parallel_for(h_grid.size(),
               [&](std::size_t i) { values[i] = cv_value(sample, model, h_grid[i], setup, ws); });
  return values;
}

CvSetup default_cv_setup(const PrimarySample& sample, const ErrorModel& model,
                         const TuningParams& params, double tau0) {
  params.validate();
  const auto [lo, hi] = std::minmax_element(sample.w().begin(), sample.w().end());
  Rng rng = make_stream(params.seed, stream_tag::kFolds);
  CvSetup setup;
  setup.tau0 = tau0;
  setup.x_lo = *lo;
  setup.x_hi = *hi;
  setup.x_points = 64;
  setup.b = weight_bandwidth_b(sample, model);
  setup.folds = make_folds(sample.n(), params.folds, rng);
  return setup;
}

double cv_pilot(const PrimarySample& sample, const ErrorModel& model, const TuningParams& params,
                double tau0) {
  const CvSetup setup = default_cv_setup(sample, model, params, tau0);
  const std::vector<double> grid = params.h_grid.empty() ? default_h_grid(sample) : params.h_grid;
  const std::vector<double> values = cv_curve(sample, model, grid, setup);
  return grid[argmin_finite(values)];
}

// --- undersmoothing ------------------------------------------------------------------

std::size_t undersmooth_index(std::span<const double> diffs, double rho) {
  const std::size_t levels = diffs.size() - 1;
  const double reference = rho * diffs[levels];
  for (std::size_t k = levels; k >= 2; --k) {
    if (diffs[k] > reference) return k;
  }
  return 1;
}

double undersmooth_bandwidth(std::size_t k, std::size_t levels, std::size_t n, double oversmooth) {
  const double fraction = static_cast<double>(k) / static_cast<double>(levels);
  const double floor = 1.0 / std::log(static_cast<double>(n));
  return std::max(fraction, floor) * oversmooth;
}

UndersmoothResult undersmooth(const PrimarySample& sample, const ErrorModel& model, double h_opt,
                              const TuningParams& params, const EvalGrid& grid) {
  params.validate();
  if (!(h_opt > 0.0)) throw InputError("pilot bandwidth must be positive");
  const std::size_t levels = params.levels;
  const double oversmooth = params.zeta * h_opt;

  std::vector<QuantileGridFit> fits;
  fits.reserve(levels);
  for (std::size_t l = 1; l <= levels; ++l) {
    const double h = static_cast<double>(l) / static_cast<double>(levels) * oversmooth;
    fits.push_back(fit_grid(sample, model, h, grid));
  }

  std::vector<double> diffs(levels + 1, 0.0);
  for (std::size_t l = 2; l <= levels; ++l) {
    const auto& cur = fits[l - 1];
    const auto& prev = fits[l - 2];
    double sup = 0.0;
    for (std::size_t j = 0; j < grid.nx(); ++j) {
      for (std::size_t k = 0; k < grid.ntau(); ++k) {
        if (!cur.is_valid(j, k) || !prev.is_valid(j, k)) continue;
        sup = std::max(sup, std::abs(cur.theta_hat(j, k) - prev.theta_hat(j, k)));
      }
    }
    diffs[l] = sup;
  }
  const std::size_t k = undersmooth_index(diffs, params.rho);
  return {undersmooth_bandwidth(k, levels, sample.n(), oversmooth), k, std::move(diffs)};
}

// --- (h_W, h_Y) -------------------------------------------------------------------------

AmisePlugins amise_plugins(const PrimarySample& sample, double sigma_u2) {
  AmisePlugins p{};
  p.sigma_w2 = sample_variance(sample.w());
  p.sigma_y2 = sample_variance(sample.y());
  p.sigma_u2 = sigma_u2;
  p.sigma_wy = sample_covariance(sample.w(), sample.y());
  if (!(p.sigma_w2 > p.sigma_u2)) {
    throw NegativeSignalVariance(
        "sample variance of W does not exceed the error variance; supply h_W and h_Y manually");
  }
  p.sigma_x = std::sqrt(p.sigma_w2 - p.sigma_u2);
  p.sigma_y = std::sqrt(p.sigma_y2);
  const double rho = p.sigma_wy / (p.sigma_y * p.sigma_x);
  p.rho = std::clamp(rho, -0.99, 0.99);
  p.rho_clamped = p.rho != rho;
  return p;
}

double amise_objective(const AmisePlugins& p, const KernelMoments& moments, std::size_t n,
                       double energy_w, double h_w, double h_y) {
  const double kappa2 = moments.kappa21 * moments.kappa21;
  const double r2 = p.rho * p.rho;
  const double c = std::pow(1.0 - r2, 2.5);
  const double sx = p.sigma_x;
  const double sy = p.sigma_y;
  const double variance =
      moments.l2norm * energy_w / (2.0 * kPi * static_cast<double>(n) * h_y * h_w);
  const double bias_w = 3.0 * kappa2 / (64.0 * kPi * c * std::pow(sx, 5.0) * sy) * std::pow(h_w, 4.0);
  const double bias_y = 3.0 * kappa2 / (64.0 * kPi * c * std::pow(sy, 5.0) * sx) * std::pow(h_y, 4.0);
  const double cross = (1.0 + 2.0 * r2) * kappa2 /
                       (32.0 * kPi * c * std::pow(sx, 3.0) * std::pow(sy, 3.0)) * h_w * h_w *
                       h_y * h_y;
  return variance + bias_w + bias_y + cross;
}

AmiseResult amise_search(const PrimarySample& sample, const ErrorModel& model,
                         const KernelMoments& moments) {
  const AmisePlugins p = amise_plugins(sample, model.variance());
  const std::size_t n = sample.n();
  const double shrink = std::pow(static_cast<double>(n), -1.0 / 6.0);
  const std::vector<double> grid_w = log_grid(0.05 * p.sigma_x * shrink, 2.0 * p.sigma_x * shrink, 32);
  const std::vector<double> grid_y = log_grid(0.05 * p.sigma_y * shrink, 2.0 * p.sigma_y * shrink, 32);

  AmiseResult result{0.0, 0.0, std::numeric_limits<double>::infinity(), {}};
  auto consider = [&](double hw, double energy, double hy) {
    const double v = amise_objective(p, moments, n, energy, hw, hy);
    result.evaluated.push_back({hw, hy, v});
    if (std::isfinite(v) && v < result.value) {
      result.value = v;
      result.h_w = hw;
      result.h_y = hy;
    }
  };

  for (double hw : grid_w) {
    const double energy = inverse_charfn_energy(model, hw);
    for (double hy : grid_y) consider(hw, energy, hy);
  }
  if (!std::isfinite(result.value)) throw NoFiniteCandidate("AMISE is non-finite on the whole grid");

  // One refinement pass at half the log spacing around the grid minimum.
  const double step_w = std::log(grid_w[1] / grid_w[0]);
  const double step_y = std::log(grid_y[1] / grid_y[0]);
  const double best_w = result.h_w;
  const double best_y = result.h_y;
  for (int sw : {-1, 0, 1}) {
    const double hw = best_w * std::exp(0.5 * step_w * sw);
    const double energy = inverse_charfn_energy(model, hw);
    for (int sy : {-1, 0, 1}) {
      if (sw == 0 && sy == 0) continue;
      consider(hw, energy, best_y * std::exp(0.5 * step_y * sy));
    }
  }
  return result;
}

std::pair<double, double> amise_hw_hy(const PrimarySample& sample, const ErrorModel& model,
                                      const KernelMoments& moments) {
  const AmiseResult r = amise_search(sample, model, moments);
  return {r.h_w, r.h_y};
}

std::pair<double, double> amise_hw_hy(const PrimarySample& sample, std::span<const double> aux,
                                      const KernelMoments& moments) {
  return amise_hw_hy(sample, ErrorModel::empirical({aux.begin(), aux.end()}), moments);
}

// --- SIMEX pilot -----------------------------------------------------------------------------

SimexReplicate draw_simex_replicate(const PrimarySample& sample, std::span<const double> aux,
                                    std::size_t folds, std::uint64_t seed, std::size_t d) {
  if (aux.empty()) throw InputError("SIMEX needs a non-empty auxiliary error sample");
  Rng rng = make_stream(seed, stream_tag::kSimex, d);
  std::uniform_int_distribution<std::size_t> pick(0, aux.size() - 1);
  SimexReplicate rep;
  rep.w_star.resize(sample.n());
  rep.w_star2.resize(sample.n());
  for (std::size_t i = 0; i < sample.n(); ++i) rep.w_star[i] = sample.w()[i] + aux[pick(rng)];
  for (std::size_t i = 0; i < sample.n(); ++i) rep.w_star2[i] = rep.w_star[i] + aux[pick(rng)];
  rep.folds = make_folds(sample.n(), folds, rng);
  return rep;
}

SimexWeight::SimexWeight(std::span<const double> w) : w_(w.begin(), w.end()) {
  const double sd = std::sqrt(sample_variance(w));
  bw_ = 1.06 * sd * std::pow(static_cast<double>(w.size()), -0.2);
  if (!(bw_ > 0.0)) throw InputError("SIMEX weight needs a non-constant W sample");
}

double SimexWeight::operator()(double v) const {
  double acc = 0.0;
  for (double wi : w_) {
    const double z = (v - wi) / bw_;
    acc += std::exp(-0.5 * z * z);
  }
  return acc / (static_cast<double>(w_.size()) * bw_ * std::sqrt(2.0 * kPi));
}

namespace {

// sum_j sum_{i in I_j} L_tau0(Y_i - theta_{-I_j}(eval_i)) * weight(eval_i), with the
// estimator trained on (train_w, Y) outside fold j.
double simex_cv(const PrimarySample& sample, const DeconvKernel& kernel,
                std::span<const double> train_w, std::span<const double> eval_points,
                std::span<const double> eval_weight, const std::vector<PrimarySample>& train,
                const std::vector<std::vector<std::size_t>>& train_rows,
                const std::vector<std::vector<std::size_t>>& folds, double tau0) {
  double total = 0.0;
  std::vector<double> weights;
  for (std::size_t j = 0; j < folds.size(); ++j) {
    const auto& rows = train_rows[j];
    weights.resize(rows.size());
    for (std::size_t i : folds[j]) {
      for (std::size_t r = 0; r < rows.size(); ++r) {
        weights[r] = kernel(eval_points[i] - train_w[rows[r]]);
      }
      const auto theta = try_fit_point(weights, train[j], tau0);
      if (!theta) return std::numeric_limits<double>::quiet_NaN();
      total += check_loss(tau0, sample.y()[i] - *theta) * eval_weight[i];
    }
  }
  return total;
}

}  // namespace

SimexCurves simex_curves(const PrimarySample& sample, const ErrorModel& model,
                         std::span<const double> aux, const TuningParams& params, double tau0) {
  params.validate();
  const std::vector<double> grid = params.h_grid.empty() ? default_h_grid(sample) : params.h_grid;
  const SimexWeight weight(sample.w());
  const std::size_t reps = params.simex_reps;
  const std::size_t n = sample.n();

  std::vector<SimexCurves> per_rep(reps);
  parallel_for(reps, [&](std::size_t d) {
    const SimexReplicate rep = draw_simex_replicate(sample, aux, params.folds, params.seed, d);
    std::vector<std::vector<std::size_t>> train_rows;
    std::vector<PrimarySample> train_star;
    std::vector<PrimarySample> train_star2;
    for (const auto& fold : rep.folds) {
      train_rows.push_back(complement(n, fold));
      const auto y = gather<double>(sample.y(), train_rows.back());
      train_star.emplace_back(gather<double>(rep.w_star, train_rows.back()), y);
      train_star2.emplace_back(gather<double>(rep.w_star2, train_rows.back()), y);
    }
    std::vector<double> weight_w(n);
    std::vector<double> weight_star(n);
    for (std::size_t i = 0; i < n; ++i) {
      weight_w[i] = weight(sample.w()[i]);
      weight_star[i] = weight(rep.w_star[i]);
    }
    auto& out = per_rep[d];
    out.cv_star.resize(grid.size());
    out.cv_star2.resize(grid.size());
    for (std::size_t g = 0; g < grid.size(); ++g) {
      const DeconvKernel kernel(model, grid[g]);
      out.cv_star[g] = simex_cv(sample, kernel, rep.w_star, sample.w(), weight_w, train_star,
                                train_rows, rep.folds, tau0);
      out.cv_star2[g] = simex_cv(sample, kernel, rep.w_star2, rep.w_star, weight_star,
                                 train_star2, train_rows, rep.folds, tau0);
    }
  });

  SimexCurves total{std::vector<double>(grid.size(), 0.0), std::vector<double>(grid.size(), 0.0)};
  for (const auto& rep : per_rep) {
    for (std::size_t g = 0; g < grid.size(); ++g) {
      total.cv_star[g] += rep.cv_star[g];
      total.cv_star2[g] += rep.cv_star2[g];
    }
  }
  return total;
}

double simex_combine(double h_star, double h_star2) { return h_star2 * h_star2 / h_star; }

double simex_pilot(const PrimarySample& sample, std::span<const double> aux,
                   const ErrorModel& model, const TuningParams& params, double tau0) {
  const std::vector<double> grid = params.h_grid.empty() ? default_h_grid(sample) : params.h_grid;
  const SimexCurves curves = simex_curves(sample, model, aux, params, tau0);
  return simex_combine(grid[argmin_finite(curves.cv_star)], grid[argmin_finite(curves.cv_star2)]);
}

// --- full pipeline ---------------------------------------------------------------------------------

BandwidthPlan select_bandwidths(const PrimarySample& sample, const ErrorModel& model,
                                const TuningParams& params, const EvalGrid& grid,
                                const PlanRequest& request) {
  params.validate();
  BandwidthPlan plan;
  plan.levels = params.levels;
  plan.h_grid = params.h_grid.empty() ? default_h_grid(sample) : params.h_grid;
  TuningParams resolved = params;
  resolved.h_grid = plan.h_grid;
  const double tau0 = 0.5 * (grid.tau().front() + grid.tau().back());

  if (request.h) {
    if (!(*request.h > 0.0)) throw InputError("manual bandwidth must be positive");
    plan.provenance = PilotKind::kManual;
    plan.h = plan.h_opt = *request.h;
  } else {
    plan.provenance = request.pilot;
    if (request.pilot == PilotKind::kSimex) {
      plan.h_opt = simex_pilot(sample, request.aux, model, resolved, tau0);
    } else {
      const CvSetup setup = default_cv_setup(sample, model, resolved, tau0);
      plan.b = setup.b;
      plan.h_opt = plan.h_grid[argmin_finite(cv_curve(sample, model, plan.h_grid, setup))];
    }
    const UndersmoothResult us = undersmooth(sample, model, plan.h_opt, resolved, grid);
    plan.h = us.h;
    plan.k = us.k;
  }

  if (request.h_w && request.h_y) {
    plan.h_w = *request.h_w;
    plan.h_y = *request.h_y;
  } else {
    const auto [hw, hy] = amise_hw_hy(sample, model, kernel_moments());
    plan.h_w = request.h_w.value_or(hw);
    plan.h_y = request.h_y.value_or(hy);
  }
  return plan;
}

}  // namespace quantband
