#include "quantband/bands.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "quantband/error.hpp"
#include "quantband/parallel.hpp"

namespace quantband {

void BootstrapConfig::validate() const {
  if (replicates < 1) throw InputError("bootstrap replicates must be >= 1");
  if (alpha.empty()) throw InputError("at least one alpha is required");
  for (double a : alpha) {
    if (!(a > 0.0 && a < 1.0)) throw InputError("alpha must lie in (0, 1)");
  }
}

std::vector<double> draw_multipliers(std::size_t n, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> chi(n);
  for (double& c : chi) c = 1.0 + normal(rng);
  return chi;
}

BootTensor bootstrap_thetas(const QuantileGridFit& fit, const PrimarySample& sample,
                            std::size_t replicates, const MultiplierSource& multipliers) {
  const std::size_t nx = fit.grid.nx();
  const std::size_t nt = fit.grid.ntau();
  const std::size_t n = sample.n();
  BootTensor boot(replicates, nx, nt);
  parallel_for(replicates, [&](std::size_t b) {
    const std::vector<double> chi = multipliers(b, n);
    std::vector<double> perturbed(n);
    for (std::size_t j = 0; j < nx; ++j) {
      const auto w = fit.weight_cache.row(j);
      for (std::size_t i = 0; i < n; ++i) perturbed[i] = chi[i] * w[i];
      for (std::size_t k = 0; k < nt; ++k) {
        if (!fit.is_valid(j, k)) {
          boot(b, j, k) = std::numeric_limits<double>::quiet_NaN();
          continue;
        }
        const auto theta = try_fit_point(perturbed, sample, fit.grid.tau()[k]);
        boot(b, j, k) = theta ? *theta : std::numeric_limits<double>::quiet_NaN();
      }
    }
  });
  return boot;
}

BootTensor bootstrap_thetas(const QuantileGridFit& fit, const PrimarySample& sample,
                            const BootstrapConfig& cfg) {
  cfg.validate();
  const std::uint64_t seed = cfg.seed;
  return bootstrap_thetas(fit, sample, cfg.replicates, [seed](std::size_t b, std::size_t n) {
    Rng rng = make_stream(seed, stream_tag::kBootstrap, b);
    return draw_multipliers(n, rng);
  });
}

std::vector<SupStat> sup_stats(const BootTensor& boot, const QuantileGridFit& fit) {
  const std::size_t nx = fit.grid.nx();
  const std::size_t nt = fit.grid.ntau();
  std::vector<SupStat> out(boot.replicates());
  bool any_valid = false;
  for (std::size_t b = 0; b < boot.replicates(); ++b) {
    double one = -std::numeric_limits<double>::infinity();
    double two = 0.0;
    bool seen = false;
    for (std::size_t j = 0; j < nx; ++j) {
      for (std::size_t k = 0; k < nt; ++k) {
        const double tb = boot(b, j, k);
        if (!fit.is_valid(j, k) || std::isnan(tb)) continue;
        const double z = (tb - fit.theta_hat(j, k)) / fit.sigma_hat(j, k);
        one = std::max(one, z);
        two = std::max(two, std::abs(z));
        seen = true;
      }
    }
    if (!seen) throw EmptyGrid("no valid grid cell for bootstrap replicate");
    any_valid = true;
    out[b] = {one, two};
  }
  if (!any_valid && boot.replicates() > 0) throw EmptyGrid("no valid grid cell");
  return out;
}

double critical_value(std::span<const double> stats, double alpha) {
  if (stats.empty()) throw InputError("critical value needs at least one statistic");
  std::vector<double> sorted(stats.begin(), stats.end());
  std::sort(sorted.begin(), sorted.end());
  const double b = static_cast<double>(sorted.size());
  // The 1e-9 guard keeps (1 - alpha) * B from rounding up past an integer.
  auto rank = static_cast<std::size_t>(std::ceil((1.0 - alpha) * b - 1e-9));
  rank = std::clamp<std::size_t>(rank, 1, sorted.size());
  return sorted[rank - 1];
}

UniformBand build_bands(const QuantileGridFit& fit, const BootTensor& boot,
                        const BootstrapConfig& cfg) {
  cfg.validate();
  const std::vector<SupStat> stats = sup_stats(boot, fit);
  std::vector<double> one(stats.size());
  std::vector<double> two(stats.size());
  for (std::size_t b = 0; b < stats.size(); ++b) {
    one[b] = stats[b].one_sided;
    two[b] = stats[b].two_sided;
  }

  const std::size_t nx = fit.grid.nx();
  const std::size_t nt = fit.grid.ntau();
  const double nan = std::numeric_limits<double>::quiet_NaN();

  // Per-cell standardized deviations, shared by every alpha.
  std::vector<std::vector<double>> cell_stats(nx * nt);
  for (std::size_t j = 0; j < nx; ++j) {
    for (std::size_t k = 0; k < nt; ++k) {
      if (!fit.is_valid(j, k)) continue;
      auto& s = cell_stats[j * nt + k];
      s.reserve(boot.replicates());
      for (std::size_t b = 0; b < boot.replicates(); ++b) {
        const double tb = boot(b, j, k);
        if (std::isnan(tb)) continue;
        s.push_back(std::abs(tb - fit.theta_hat(j, k)) / fit.sigma_hat(j, k));
      }
    }
  }

  UniformBand band{fit.grid, {}};
  for (double alpha : cfg.alpha) {
    BandLevel level;
    level.alpha = alpha;
    level.c1 = critical_value(one, alpha);
    level.c2 = critical_value(two, alpha);
    level.lower_two = Matrix(nx, nt, nan);
    level.upper_two = Matrix(nx, nt, nan);
    level.lower_left = Matrix(nx, nt, nan);
    level.upper_right = Matrix(nx, nt, nan);
    level.pointwise_c2 = Matrix(nx, nt, nan);
    level.pointwise_lower = Matrix(nx, nt, nan);
    level.pointwise_upper = Matrix(nx, nt, nan);
    for (std::size_t j = 0; j < nx; ++j) {
      for (std::size_t k = 0; k < nt; ++k) {
        const auto& s = cell_stats[j * nt + k];
        if (!fit.is_valid(j, k) || s.empty()) continue;
        const double theta = fit.theta_hat(j, k);
        const double sigma = fit.sigma_hat(j, k);
        level.lower_two(j, k) = theta - level.c2 * sigma;
        level.upper_two(j, k) = theta + level.c2 * sigma;
        level.lower_left(j, k) = theta - level.c1 * sigma;
        level.upper_right(j, k) = theta + level.c1 * sigma;
        const double pc = critical_value(s, alpha);
        level.pointwise_c2(j, k) = pc;
        level.pointwise_lower(j, k) = theta - pc * sigma;
        level.pointwise_upper(j, k) = theta + pc * sigma;
      }
    }
    band.levels.push_back(std::move(level));
  }
  return band;
}

}  // namespace quantband
