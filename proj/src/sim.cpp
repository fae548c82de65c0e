#include "quantband/sim.hpp"

#include <boost/math/distributions/normal.hpp>

#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <random>

#include "quantband/error.hpp"
#include "quantband/parallel.hpp"
#include "quantband/rng.hpp"
#include "quantband/variance.hpp"

namespace quantband {
namespace {

constexpr std::uint64_t kTuningTag = 0x7E57;

std::uint64_t derived_seed(std::uint64_t master, std::uint64_t tag, std::size_t rep) {
  Rng rng = make_stream(master, tag, rep);
  return rng();
}

double draw_laplace(Rng& rng, double scale) {
  std::uniform_real_distribution<double> unit(-0.5, 0.5);
  double v = unit(rng);
  while (v == -0.5) v = unit(rng);
  const double mag = -scale * std::log1p(-2.0 * std::abs(v));
  return v < 0.0 ? -mag : mag;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

const char* dgp_name(Dgp dgp) {
  switch (dgp) {
    case Dgp::kLinear:
      return "linear";
    case Dgp::kQuadratic:
      return "quadratic";
    case Dgp::kSine:
      return "sine";
  }
  return "unknown";
}

const char* error_law_name(ErrorLaw law) {
  return law == ErrorLaw::kLaplace ? "laplace" : "gaussian";
}

EvalGrid SimConfig::grid() const {
  return EvalGrid::equispaced(x_lo, x_hi, nx, tau_lo, tau_hi, tau_lo == tau_hi ? 1 : ntau);
}

void SimConfig::validate() const {
  if (!(ratio > 0.0) || !std::isfinite(ratio)) throw ConfigError("ratio", "must be > 0");
  if (n < 2) throw ConfigError("n", "must be >= 2");
  if (m == 1) throw ConfigError("m", "must be >= 2");
  if (reps < 1) throw ConfigError("reps", "must be >= 1");
  if (!(x_lo < x_hi)) throw ConfigError("x_region", "needs lo < hi");
  if (!(tau_lo > 0.0 && tau_hi < 1.0 && tau_lo <= tau_hi)) {
    throw ConfigError("tau_region", "needs 0 < lo <= hi < 1");
  }
  if (nx < 2) throw ConfigError("nx", "must be >= 2");
  if (tau_lo != tau_hi && ntau < 2) throw ConfigError("ntau", "must be >= 2 for an interval");
  try {
    boot.validate();
  } catch (const InputError& e) {
    throw ConfigError("boot", e.what());
  }
  try {
    tuning.validate();
  } catch (const InputError& e) {
    throw ConfigError("tuning", e.what());
  }
}

double error_scale(ErrorLaw law, double ratio) {
  return law == ErrorLaw::kLaplace ? std::sqrt(ratio / 2.0) : std::sqrt(ratio);
}

double true_quantile(Dgp dgp, double tau, double x) {
  const double z = boost::math::quantile(boost::math::normal_distribution<double>(), tau);
  switch (dgp) {
    case Dgp::kLinear:
      return x + z;
    case Dgp::kQuadratic:
      return x * x + z;
    case Dgp::kSine:
      return std::sin(x) + 0.5 * z;
  }
  return std::numeric_limits<double>::quiet_NaN();
}

Replication gen_replication(const SimConfig& cfg, std::size_t rep) {
  Rng rng = make_stream(cfg.master_seed, stream_tag::kData, rep);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double scale = error_scale(cfg.error, cfg.ratio);
  auto draw_error = [&] {
    return cfg.error == ErrorLaw::kLaplace ? draw_laplace(rng, scale) : scale * normal(rng);
  };

  const std::size_t n = cfg.n;
  std::vector<double> w(n);
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = normal(rng);
    const double e = normal(rng);
    switch (cfg.dgp) {
      case Dgp::kLinear:
        y[i] = x + e;
        break;
      case Dgp::kQuadratic:
        y[i] = x * x + e;
        break;
      case Dgp::kSine:
        y[i] = std::sin(x) + 0.5 * e;
        break;
    }
    w[i] = x + draw_error();
  }
  std::vector<double> aux(cfg.aux_size());
  for (double& u : aux) u = draw_error();
  return {PrimarySample(std::move(w), std::move(y)), std::move(aux)};
}

double band_size(const Matrix& lower, const Matrix& upper, double x_range) {
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < lower.flat().size(); ++i) {
    const double width = upper.flat()[i] - lower.flat()[i];
    if (std::isnan(width)) continue;
    sum += width;
    ++count;
  }
  if (count == 0) return std::numeric_limits<double>::quiet_NaN();
  return sum / static_cast<double>(count) * x_range;
}

bool band_covers(const Matrix& lower, const Matrix& upper, const Matrix& truth) {
  for (std::size_t i = 0; i < truth.flat().size(); ++i) {
    const double t = truth.flat()[i];
    if (!(lower.flat()[i] <= t && t <= upper.flat()[i])) return false;
  }
  return true;
}

ReplicationRecord run_replication(const SimConfig& cfg, std::size_t rep) {
  ReplicationRecord record;
  record.rep = rep;
  try {
    const Replication data = gen_replication(cfg, rep);
    const ErrorModel model = ErrorModel::empirical(data.aux);
    const EvalGrid grid = cfg.grid();

    TuningParams tuning = cfg.tuning;
    tuning.seed = derived_seed(cfg.master_seed, kTuningTag, rep);
    record.plan = select_bandwidths(data.sample, model, tuning, grid);

    const DeconvKernel kernel(model, record.plan.h);
    QuantileGridFit fit = fit_grid(data.sample, kernel, grid);
    sigma_hat(data.sample, model, fit, VarianceConfig{record.plan.h_w, record.plan.h_y});
    record.invalid_cells = fit.invalid_cells();

    BootstrapConfig boot = cfg.boot;
    boot.seed = derived_seed(cfg.master_seed, stream_tag::kBootstrap, rep);
    const BootTensor tensor = bootstrap_thetas(fit, data.sample, boot);
    const UniformBand band = build_bands(fit, tensor, boot);

    Matrix truth(grid.nx(), grid.ntau());
    for (std::size_t j = 0; j < grid.nx(); ++j) {
      for (std::size_t k = 0; k < grid.ntau(); ++k) {
        truth(j, k) = true_quantile(cfg.dgp, grid.tau()[k], grid.x()[j]);
      }
    }
    const double x_range = cfg.x_hi - cfg.x_lo;
    for (const BandLevel& level : band.levels) {
      LevelRecord lr;
      lr.alpha = level.alpha;
      lr.covered_uniform = band_covers(level.lower_two, level.upper_two, truth);
      lr.size_uniform = band_size(level.lower_two, level.upper_two, x_range);
      lr.covered_pointwise = band_covers(level.pointwise_lower, level.pointwise_upper, truth);
      lr.size_pointwise = band_size(level.pointwise_lower, level.pointwise_upper, x_range);
      for (double c : level.pointwise_c2.flat()) {
        if (c > level.c2) ++lr.pointwise_violations;
      }
      record.levels.push_back(lr);
    }
    record.ok = true;
  } catch (const Error& e) {
    record.ok = false;
    record.failure = e.what();
    record.levels.clear();
  }
  return record;
}

SimReport run_study(const SimConfig& cfg) {
  cfg.validate();
  SimReport report;
  report.config = cfg;
  report.replications.resize(cfg.reps);
  parallel_for(cfg.reps, [&](std::size_t r) { report.replications[r] = run_replication(cfg, r); });

  for (std::size_t a = 0; a < cfg.boot.alpha.size(); ++a) {
    StudyRow row;
    row.alpha = cfg.boot.alpha[a];
    std::size_t covered_u = 0, covered_p = 0, finite_u = 0, finite_p = 0;
    double sum_u = 0.0, sum_p = 0.0;
    for (const ReplicationRecord& rec : report.replications) {
      if (!rec.ok) {
        ++row.failures;
        continue;
      }
      ++row.reps_completed;
      row.invalid_cells_total += rec.invalid_cells;
      const LevelRecord& lr = rec.levels[a];
      covered_u += lr.covered_uniform;
      covered_p += lr.covered_pointwise;
      if (std::isfinite(lr.size_uniform)) {
        sum_u += lr.size_uniform;
        ++finite_u;
      }
      if (std::isfinite(lr.size_pointwise)) {
        sum_p += lr.size_pointwise;
        ++finite_p;
      }
    }
    const double nan = std::numeric_limits<double>::quiet_NaN();
    const auto done = static_cast<double>(row.reps_completed);
    row.ecp_uniform = row.reps_completed ? static_cast<double>(covered_u) / done : nan;
    row.ecp_pointwise = row.reps_completed ? static_cast<double>(covered_p) / done : nan;
    row.size_uniform = finite_u ? sum_u / static_cast<double>(finite_u) : nan;
    row.size_pointwise = finite_p ? sum_p / static_cast<double>(finite_p) : nan;
    report.rows.push_back(row);
  }
  return report;
}

void write_study_csv(const SimReport& report, std::ostream& out) {
  const SimConfig& cfg = report.config;
  out << "dgp,error,n,alpha,tau_lo,tau_hi,ecp_uniform,size_uniform,ecp_pointwise,size_pointwise,"
         "reps,failures\n";
  for (const StudyRow& row : report.rows) {
    out << dgp_name(cfg.dgp) << ',' << error_law_name(cfg.error) << ',' << cfg.n << ','
        << format_double(row.alpha) << ',' << format_double(cfg.tau_lo) << ','
        << format_double(cfg.tau_hi) << ',' << format_double(row.ecp_uniform) << ','
        << format_double(row.size_uniform) << ',' << format_double(row.ecp_pointwise) << ','
        << format_double(row.size_pointwise) << ',' << row.reps_completed << ',' << row.failures
        << '\n';
  }
}

}  // namespace quantband
