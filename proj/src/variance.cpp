#include "quantband/variance.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>

#include "quantband/error.hpp"
#include "quantband/parallel.hpp"

namespace quantband {

void VarianceConfig::validate() const {
  if (!(h_w > 0.0) || !(h_y > 0.0)) throw InputError("h_W and h_Y must be positive");
  if (!(density_floor > 0.0)) throw InputError("density floor must be positive");
  if (!(sigma_floor >= 0.0)) throw InputError("sigma floor must be non-negative");
}

double joint_density(const PrimarySample& sample, const ErrorModel& model,
                     const VarianceConfig& cfg, double x, double yv, const QuadratureRule& quad) {
  cfg.validate();
  double acc = 0.0;
  for (std::size_t i = 0; i < sample.n(); ++i) {
    const double ky = base_kernel((yv - sample.y()[i]) / cfg.h_y, quad) / cfg.h_y;
    acc += ky * deconv_kernel(model, cfg.h_w, x - sample.w()[i], quad);
  }
  return acc / static_cast<double>(sample.n());
}

SigmaSummary sigma_hat(const PrimarySample& sample, const ErrorModel& model, QuantileGridFit& fit,
                       const VarianceConfig& cfg) {
  cfg.validate();
  const DeconvKernel density_x(model, cfg.h_w);
  const DeconvKernel density_y(ErrorModel::none(), cfg.h_y);
  const std::size_t n = sample.n();
  const std::size_t nt = fit.grid.ntau();
  const double nd = static_cast<double>(n);

  std::atomic<std::size_t> density_hits{0};
  std::atomic<std::size_t> sigma_hits{0};
  parallel_for(fit.grid.nx(), [&](std::size_t j) {
    const std::vector<double> kx = density_x.weights(fit.grid.x()[j], sample.w());
    const auto kh = fit.weight_cache.row(j);
    for (std::size_t k = 0; k < nt; ++k) {
      if (!fit.is_valid(j, k)) {
        fit.sigma_hat(j, k) = 0.0;
        continue;
      }
      const double theta = fit.theta_hat(j, k);
      const double tau = fit.grid.tau()[k];
      double density = 0.0;
      double numerator = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double yi = sample.y()[i];
        density += density_y(theta - yi) * kx[i];
        const double p = psi(tau, yi - theta);
        numerator += kh[i] * kh[i] * p * p;
      }
      density /= nd;
      if (!std::isfinite(density) || !std::isfinite(numerator)) {
        throw NonFiniteResult("variance estimate is not finite at x = " +
                              std::to_string(fit.grid.x()[j]) + ", tau = " + std::to_string(tau));
      }
      if (density < cfg.density_floor) {
        density = cfg.density_floor;
        density_hits.fetch_add(1);
      }
      double sigma = std::sqrt(numerator) / (nd * density);
      if (sigma < cfg.sigma_floor) {
        sigma = cfg.sigma_floor;
        sigma_hits.fetch_add(1);
      }
      fit.sigma_hat(j, k) = sigma;
    }
  });
  return {density_hits.load(), sigma_hits.load()};
}

}  // namespace quantband
