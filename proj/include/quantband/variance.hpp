#pragma once

#include <cstddef>

#include "quantband/deconv.hpp"
#include "quantband/quantile.hpp"

namespace quantband {

struct VarianceConfig {
  double h_w = 0.0;  // bandwidth of the deconvolution kernel in the x direction
  double h_y = 0.0;  // bandwidth of K in the y direction
  double density_floor = 1e-3;
  double sigma_floor = 1e-12;

  void validate() const;
};

// f_{X,Y}(x, y) ~ n^-1 sum_i K_{h_Y}(y - Y_i) K_{U,h_W}(x - W_i), by direct
// quadrature. May be negative.
double joint_density(const PrimarySample& sample, const ErrorModel& model,
                     const VarianceConfig& cfg, double x, double yv,
                     const QuadratureRule& quad = gauss_legendre(kDefaultQuadratureOrder));

struct SigmaSummary {
  std::size_t density_floor_hits = 0;  // cells where f_hat was raised to the floor
  std::size_t sigma_floor_hits = 0;    // cells where sigma_hat was raised to the floor
};

// sigma_hat^2(x, tau) = sum_i K_{U,h}^2(x - W_i) psi_tau^2(Y_i - theta_hat)
//                       / [n f_hat(x, theta_hat)]^2
// using the fit's cached K_{U,h} weights. Fills fit.sigma_hat with the
// square root; invalid cells stay at zero.
SigmaSummary sigma_hat(const PrimarySample& sample, const ErrorModel& model, QuantileGridFit& fit,
                       const VarianceConfig& cfg);

}  // namespace quantband
