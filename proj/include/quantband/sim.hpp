#pragma once

// Monte Carlo coverage study for the uniform bands.
//
//   DGP1  Y = X + e        DGP2  Y = X^2 + e        DGP3  Y = sin X + 0.5 e
//
// with X, e ~ N(0, 1) and W = X + U. Every replication draws from its own
// stream keyed by (master_seed, rep), so results do not depend on the thread
// count or on which replications ran before.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "quantband/bands.hpp"
#include "quantband/bandwidth.hpp"
#include "quantband/quantile.hpp"

namespace quantband {

enum class Dgp { kLinear, kQuadratic, kSine };
enum class ErrorLaw { kLaplace, kGaussian };

const char* dgp_name(Dgp dgp);
const char* error_law_name(ErrorLaw law);

struct SimConfig {
  Dgp dgp = Dgp::kLinear;
  ErrorLaw error = ErrorLaw::kLaplace;
  double ratio = 0.25;  // var(U) / var(X)
  std::size_t n = 250;
  std::size_t m = 0;    // auxiliary error sample size; 0 means m = n
  std::size_t reps = 200;
  BootstrapConfig boot{200, {0.10}, 0};
  TuningParams tuning;
  double x_lo = -0.8, x_hi = 0.8;
  double tau_lo = 0.2, tau_hi = 0.3;  // tau_lo == tau_hi: a single quantile level
  std::size_t nx = 41;
  std::size_t ntau = 6;
  std::uint64_t master_seed = 0;

  std::size_t aux_size() const { return m == 0 ? n : m; }
  EvalGrid grid() const;
  void validate() const;
};

// Error-law parameter for the configured ratio: Laplace scale b with
// 2 b^2 = ratio, or the Gaussian standard deviation sqrt(ratio).
double error_scale(ErrorLaw law, double ratio);

double true_quantile(Dgp dgp, double tau, double x);

struct Replication {
  PrimarySample sample;
  std::vector<double> aux;
};

Replication gen_replication(const SimConfig& cfg, std::size_t rep);

struct LevelRecord {
  double alpha = 0.0;
  bool covered_uniform = false;
  double size_uniform = 0.0;
  bool covered_pointwise = false;
  double size_pointwise = 0.0;
  std::size_t pointwise_violations = 0;  // cells with a pointwise critical value above c2
};

struct ReplicationRecord {
  std::size_t rep = 0;
  bool ok = false;
  std::string failure;  // error message when !ok
  BandwidthPlan plan;
  std::size_t invalid_cells = 0;
  std::vector<LevelRecord> levels;  // one per alpha
};

// Band size: mean two-sided width over the grid times the x-range. Infinite
// when any width is infinite; cells without an estimate are skipped.
double band_size(const Matrix& lower, const Matrix& upper, double x_range);

// Whether truth(j, k) lies in [lower, upper] at every cell. Cells without an
// estimate count as not covered.
bool band_covers(const Matrix& lower, const Matrix& upper, const Matrix& truth);

ReplicationRecord run_replication(const SimConfig& cfg, std::size_t rep);

struct StudyRow {
  double alpha = 0.0;
  double ecp_uniform = 0.0;
  double size_uniform = 0.0;
  double ecp_pointwise = 0.0;
  double size_pointwise = 0.0;
  std::size_t reps_completed = 0;
  std::size_t failures = 0;
  std::size_t invalid_cells_total = 0;
};

struct SimReport {
  SimConfig config;
  std::vector<StudyRow> rows;  // one per alpha
  std::vector<ReplicationRecord> replications;
};

SimReport run_study(const SimConfig& cfg);

void write_study_csv(const SimReport& report, std::ostream& out);

}  // namespace quantband
