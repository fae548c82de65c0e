#include "quantband/quadrature.hpp"

#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <stdexcept>

namespace quantband {

QuadratureRule::QuadratureRule(std::size_t order) : nodes_(order), weights_(order) {
  if (order < 2 || order % 2 != 0) {
    throw std::invalid_argument("quadrature order must be even and >= 2");
  }
  const std::size_t half = order / 2;
  const double n = static_cast<double>(order);
  for (std::size_t i = 0; i < half; ++i) {
    // Tricomi initial guess for the i-th largest root, then Newton.
    double z = std::cos(std::numbers::pi * (static_cast<double>(i) + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0;
      double p1 = z;
      for (std::size_t k = 2; k <= order; ++k) {
        const double kk = static_cast<double>(k);
        const double p2 = ((2.0 * kk - 1.0) * z * p1 - (kk - 1.0) * p0) / kk;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (z * p1 - p0) / (z * z - 1.0);
      const double dz = p1 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    const double w = 2.0 / ((1.0 - z * z) * dp * dp);
    nodes_[order - 1 - i] = z;
    nodes_[i] = -z;
    weights_[order - 1 - i] = w;
    weights_[i] = w;
  }
}

const QuadratureRule& gauss_legendre(std::size_t order) {
  static std::mutex mu;
  static std::map<std::size_t, std::unique_ptr<QuadratureRule>> cache;
  std::lock_guard lock(mu);
  auto& slot = cache[order];
  if (!slot) slot = std::make_unique<QuadratureRule>(order);
  return *slot;
}

}  // namespace quantband
