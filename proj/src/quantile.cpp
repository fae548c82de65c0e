#include "quantband/quantile.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "quantband/error.hpp"
#include "quantband/parallel.hpp"

namespace quantband {

PrimarySample::PrimarySample(std::vector<double> w, std::vector<double> y)
    : w_(std::move(w)), y_(std::move(y)) {
  if (w_.size() != y_.size()) throw InputError("w and y must have the same length");
  if (y_.size() < 2) throw EmptyData("primary sample needs at least 2 observations");
  for (std::size_t i = 0; i < y_.size(); ++i) {
    if (!std::isfinite(w_[i]) || !std::isfinite(y_[i])) {
      throw InputError("primary sample row " + std::to_string(i) + " is not finite");
    }
  }
  order_.resize(y_.size());
  std::iota(order_.begin(), order_.end(), std::size_t{0});
  std::stable_sort(order_.begin(), order_.end(),
                   [this](std::size_t a, std::size_t b) { return y_[a] < y_[b]; });
}

PrimarySample PrimarySample::subset(std::span<const std::size_t> rows) const {
  std::vector<double> w;
  std::vector<double> y;
  w.reserve(rows.size());
  y.reserve(rows.size());
  for (std::size_t r : rows) {
    w.push_back(w_.at(r));
    y.push_back(y_.at(r));
  }
  return PrimarySample(std::move(w), std::move(y));
}

EvalGrid::EvalGrid(std::vector<double> x_points, std::vector<double> tau_points)
    : x_(std::move(x_points)), tau_(std::move(tau_points)) {
  if (x_.empty() || tau_.empty()) throw InputError("evaluation grid must be non-empty");
  for (std::size_t i = 1; i < x_.size(); ++i) {
    if (!(x_[i] > x_[i - 1])) throw InputError("grid x points must be strictly increasing");
  }
  for (std::size_t i = 0; i < tau_.size(); ++i) {
    if (!(tau_[i] > 0.0 && tau_[i] < 1.0)) throw InputError("grid tau points must lie in (0, 1)");
    if (i > 0 && !(tau_[i] > tau_[i - 1])) {
      throw InputError("grid tau points must be strictly increasing");
    }
  }
}

namespace {

std::vector<double> linspace(double lo, double hi, std::size_t count) {
  if (count == 1) return {0.5 * (lo + hi)};
  std::vector<double> out(count);
  const double step = (hi - lo) / static_cast<double>(count - 1);
  for (std::size_t i = 0; i < count; ++i) out[i] = lo + step * static_cast<double>(i);
  out.back() = hi;
  return out;
}

}  // namespace

EvalGrid EvalGrid::equispaced(double x_lo, double x_hi, std::size_t nx, double tau_lo,
                              double tau_hi, std::size_t ntau) {
  if (nx == 0 || ntau == 0) throw InputError("grid sizes must be positive");
  if (!(x_hi >= x_lo)) throw InputError("x region must satisfy lo <= hi");
  if (!(tau_hi >= tau_lo)) throw InputError("tau region must satisfy lo <= hi");
  std::vector<double> tau = tau_lo == tau_hi ? std::vector<double>{tau_lo}
                                             : linspace(tau_lo, tau_hi, ntau);
  return EvalGrid(linspace(x_lo, x_hi, nx), std::move(tau));
}

std::size_t QuantileGridFit::invalid_cells() const {
  return static_cast<std::size_t>(std::count(valid.begin(), valid.end(), std::uint8_t{0}));
}

double psi(double tau, double u) { return u < 0.0 ? tau - 1.0 : tau; }

double objective(double theta, std::span<const double> weights, std::span<const double> y,
                 double tau) {
  double acc = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) acc += weights[i] * psi(tau, y[i] - theta);
  return acc / static_cast<double>(y.size());
}

std::vector<double> candidate_thetas(const PrimarySample& sample) {
  const auto y = sample.y();
  const auto order = sample.y_sorted();
  const std::size_t n = sample.n();
  std::vector<double> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t next = std::min(k + 1, n - 1);
    out[k] = (y[order[k]] + y[order[next]]) / 2.0;
  }
  return out;
}

std::optional<double> try_fit_point(std::span<const double> weights, const PrimarySample& sample,
                                    double tau) {
  const auto y = sample.y();
  const auto order = sample.y_sorted();
  const std::size_t n = sample.n();

  double total = 0.0;
  double mass = 0.0;
  for (std::size_t i : order) {
    total += weights[i];
    mass += std::abs(weights[i]);
  }
  if (mass == 0.0) return std::nullopt;

  // n * M(theta) = tau * sum(w) - sum_{y_i < theta} w_i; the 1/n factor
  // does not move the argmin.
  const double target = tau * total;
  double below = 0.0;
  std::size_t idx = 0;
  double best = std::numeric_limits<double>::infinity();
  double best_theta = y[order[0]];
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t next = std::min(k + 1, n - 1);
    const double theta = (y[order[k]] + y[order[next]]) / 2.0;
    while (idx < n && y[order[idx]] < theta) {
      below += weights[order[idx]];
      ++idx;
    }
    const double value = std::abs(target - below);
    if (value < best) {
      best = value;
      best_theta = theta;
    }
  }
  return best_theta;
}

double fit_point(std::span<const double> weights, const PrimarySample& sample, double tau) {
  if (auto theta = try_fit_point(weights, sample, tau)) return *theta;
  throw DegenerateWeights("kernel weights vanish at this evaluation point");
}

QuantileGridFit fit_grid(const PrimarySample& sample, const DeconvKernel& kernel,
                         const EvalGrid& grid) {
  const std::size_t nx = grid.nx();
  const std::size_t nt = grid.ntau();
  QuantileGridFit fit{grid,
                      kernel.h(),
                      Matrix(nx, nt),
                      Matrix(nx, nt),
                      Matrix(nx, sample.n()),
                      CellMask(nx * nt, 1),
                      0};
  parallel_for(nx, [&](std::size_t j) {
    auto row = fit.weight_cache.row(j);
    kernel.weights(grid.x()[j], sample.w(), row);
    for (double v : row) {
      if (!std::isfinite(v)) throw NonFiniteResult("non-finite kernel weight");
    }
    for (std::size_t k = 0; k < nt; ++k) {
      if (auto theta = try_fit_point(row, sample, grid.tau()[k])) {
        fit.theta_hat(j, k) = *theta;
      } else {
        fit.theta_hat(j, k) = std::numeric_limits<double>::quiet_NaN();
        fit.valid[j * nt + k] = 0;
      }
    }
  });
  fit.clamped_nodes = kernel.clamped_nodes();
  return fit;
}

QuantileGridFit fit_grid(const PrimarySample& sample, const ErrorModel& model, double h,
                         const EvalGrid& grid) {
  const DeconvKernel kernel(model, h);
  return fit_grid(sample, kernel, grid);
}

}  // namespace quantband
