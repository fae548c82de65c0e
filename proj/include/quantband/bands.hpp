#pragma once

// Multiplier-bootstrap uniform confidence bands over an (x, tau) grid.
//
// Each replicate b perturbs the summands of the estimating equation with
// i.i.d. multipliers chi_i ~ 1 + N(0, 1), re-solves every cell using the
// cached kernel weights, and records the supremum of the standardized
// deviation. Replicate b draws from the stream keyed by (seed, b), so the
// first B replicates do not depend on the total B or on the thread count.

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "quantband/matrix.hpp"
#include "quantband/quantile.hpp"
#include "quantband/rng.hpp"

namespace quantband {

struct BootstrapConfig {
  std::size_t replicates = 1000;  // B
  std::vector<double> alpha{0.10, 0.05};
  std::uint64_t seed = 0;

  void validate() const;
};

std::vector<double> draw_multipliers(std::size_t n, Rng& rng);

// B x nx x ntau bootstrap estimates.
class BootTensor {
 public:
  BootTensor() = default;
  BootTensor(std::size_t replicates, std::size_t nx, std::size_t ntau)
      : b_(replicates), nx_(nx), nt_(ntau), data_(replicates * nx * ntau) {}

  std::size_t replicates() const noexcept { return b_; }
  std::size_t nx() const noexcept { return nx_; }
  std::size_t ntau() const noexcept { return nt_; }

  double& operator()(std::size_t b, std::size_t j, std::size_t k) {
    return data_[(b * nx_ + j) * nt_ + k];
  }
  double operator()(std::size_t b, std::size_t j, std::size_t k) const {
    return data_[(b * nx_ + j) * nt_ + k];
  }
  friend bool operator==(const BootTensor&, const BootTensor&) = default;

 private:
  std::size_t b_ = 0, nx_ = 0, nt_ = 0;
  std::vector<double> data_;
};

// Multiplier vector of length n for replicate b.
using MultiplierSource = std::function<std::vector<double>(std::size_t b, std::size_t n)>;

BootTensor bootstrap_thetas(const QuantileGridFit& fit, const PrimarySample& sample,
                            const BootstrapConfig& cfg);
BootTensor bootstrap_thetas(const QuantileGridFit& fit, const PrimarySample& sample,
                            std::size_t replicates, const MultiplierSource& multipliers);

struct SupStat {
  double one_sided;  // sup (theta_b - theta_hat) / sigma_hat
  double two_sided;  // sup |theta_b - theta_hat| / sigma_hat
};

// Suprema over valid cells. Throws EmptyGrid when no cell is valid.
std::vector<SupStat> sup_stats(const BootTensor& boot, const QuantileGridFit& fit);

// ceil((1 - alpha) B)-th order statistic (1-indexed).
double critical_value(std::span<const double> stats, double alpha);

struct BandLevel {
  double alpha = 0.0;
  double c1 = 0.0;  // one-sided critical value
  double c2 = 0.0;  // two-sided critical value
  Matrix lower_two, upper_two;   // I_2
  Matrix lower_left;             // I_L = (lower_left, inf)
  Matrix upper_right;            // I_R = (-inf, upper_right)
  Matrix pointwise_c2;           // per-cell two-sided critical value
  Matrix pointwise_lower, pointwise_upper;
};

struct UniformBand {
  EvalGrid grid;
  std::vector<BandLevel> levels;  // one per alpha, in config order
};

UniformBand build_bands(const QuantileGridFit& fit, const BootTensor& boot,
                        const BootstrapConfig& cfg);

}  // namespace quantband
