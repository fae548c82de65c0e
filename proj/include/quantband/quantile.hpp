#pragma once

// Deconvolution-kernel conditional quantile estimator
//
//   theta_hat_tau(x) = argmin_theta | n^-1 sum_i psi_tau(Y_i - theta) K_{U,h}(x - W_i) |
//
// searched over midpoints of consecutive order statistics of Y.

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "quantband/deconv.hpp"
#include "quantband/matrix.hpp"

namespace quantband {

class PrimarySample {
 public:
  // Requires |w| == |y| >= 2 and finite entries.
  PrimarySample(std::vector<double> w, std::vector<double> y);

  std::size_t n() const noexcept { return y_.size(); }
  std::span<const double> w() const noexcept { return w_; }
  std::span<const double> y() const noexcept { return y_; }
  // Indices ordering y ascending; ties keep input order.
  std::span<const std::size_t> y_sorted() const noexcept { return order_; }

  // Sub-sample with the given row indices (in that order).
  PrimarySample subset(std::span<const std::size_t> rows) const;

 private:
  std::vector<double> w_;
  std::vector<double> y_;
  std::vector<std::size_t> order_;
};

class EvalGrid {
 public:
  EvalGrid(std::vector<double> x_points, std::vector<double> tau_points);
  // nx equispaced points on [x_lo, x_hi]; ntau on [tau_lo, tau_hi], or the
  // single point tau_lo when tau_lo == tau_hi.
  static EvalGrid equispaced(double x_lo, double x_hi, std::size_t nx, double tau_lo,
                             double tau_hi, std::size_t ntau);

  std::span<const double> x() const noexcept { return x_; }
  std::span<const double> tau() const noexcept { return tau_; }
  std::size_t nx() const noexcept { return x_.size(); }
  std::size_t ntau() const noexcept { return tau_.size(); }
  std::size_t cells() const noexcept { return nx() * ntau(); }

 private:
  std::vector<double> x_;
  std::vector<double> tau_;
};

// Cell validity mask, row-major over (x, tau).
using CellMask = std::vector<std::uint8_t>;

struct QuantileGridFit {
  EvalGrid grid;
  double h = 0.0;
  Matrix theta_hat;     // nx x ntau
  Matrix sigma_hat;     // nx x ntau, zero until estimate_sigma runs
  Matrix weight_cache;  // nx x n, entry (j, i) = K_{U,h}(x_j - W_i)
  CellMask valid;       // 0 where the kernel mass vanished
  std::size_t clamped_nodes = 0;

  bool is_valid(std::size_t j, std::size_t k) const { return valid[j * grid.ntau() + k] != 0; }
  std::size_t invalid_cells() const;
};

// tau - 1{u < 0}
double psi(double tau, double u);

// n^-1 sum_i weights[i] * psi(tau, y[i] - theta)
double objective(double theta, std::span<const double> weights, std::span<const double> y,
                 double tau);

// (Y_(k) + Y_(k+1)) / 2 for k = 1..n with Y_(n+1) = Y_(n).
std::vector<double> candidate_thetas(const PrimarySample& sample);

// Candidate minimizing |objective|, smallest theta among ties. O(n) sweep over
// the cached sort order. Throws DegenerateWeights when sum |weights| == 0.
double fit_point(std::span<const double> weights, const PrimarySample& sample, double tau);

// As fit_point, returning nullopt instead of throwing.
std::optional<double> try_fit_point(std::span<const double> weights, const PrimarySample& sample,
                                    double tau);

// Fits every (x, tau) cell. Degenerate cells are marked invalid.
QuantileGridFit fit_grid(const PrimarySample& sample, const ErrorModel& model, double h,
                         const EvalGrid& grid);
QuantileGridFit fit_grid(const PrimarySample& sample, const DeconvKernel& kernel,
                         const EvalGrid& grid);

}  // namespace quantband
