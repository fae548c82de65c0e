#pragma once

// Bandwidth selection for the quantile estimator and its variance estimate:
//
//   * weight_bandwidth_b  - plug-in bandwidth for the CV weighting kernel
//   * cv_pilot            - J-fold check-loss cross-validation pilot h_opt
//   * simex_pilot         - SIMEX alternative to cv_pilot
//   * undersmooth         - shrink zeta * h_opt until the sup-difference kink
//   * amise_hw_hy         - (h_W, h_Y) minimizing the bivariate AMISE surrogate

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "quantband/deconv.hpp"
#include "quantband/quantile.hpp"
#include "quantband/rng.hpp"

namespace quantband {

struct TuningParams {
  std::size_t folds = 5;         // J
  double zeta = 1.3;
  std::size_t levels = 20;       // L
  double rho = 3.0;
  std::size_t simex_reps = 30;   // D
  std::vector<double> h_grid;    // empty: default_h_grid()
  std::uint64_t seed = 0;        // fold shuffles and SIMEX resampling

  void validate() const;
};

enum class PilotKind { kCv, kSimex, kManual };
const char* pilot_name(PilotKind kind);

struct BandwidthPlan {
  double h = 0.0;      // undersmoothed estimation bandwidth
  double h_opt = 0.0;  // pilot
  double h_w = 0.0;
  double h_y = 0.0;
  double b = 0.0;      // CV weighting bandwidth (0 when not used)
  PilotKind provenance = PilotKind::kCv;
  std::size_t k = 0;   // undersmoothing index actually used, h = max(k/L, 1/log n) * zeta * h_opt
  std::size_t levels = 0;
  std::vector<double> h_grid;
};

// tau * u for u >= 0, (tau - 1) * u for u < 0.
double check_loss(double tau, double u);

// 32 log-spaced points on [0.05, 2] * sd(W) * n^(-1/9).
std::vector<double> default_h_grid(const PrimarySample& sample);

std::vector<double> log_grid(double lo, double hi, std::size_t count);

// --- weighting bandwidth -----------------------------------------------------

// (2 pi n b)^-1 int phi_K^2(t) / |phi_U(t/b)|^2 dt + (kappa^2 b^4 / 4) * 3 / (8 sqrt(pi) sigma_X^5)
double weight_bandwidth_objective(const ErrorModel& model, double b, std::size_t n,
                                  double sigma_x);
// sqrt(max(var(W) - var(U), 1e-6))
double signal_sd_proxy(const PrimarySample& sample, const ErrorModel& model);
// Grid argmin over 64 log-spaced points on [0.05, 5] * sigma_X proxy.
double weight_bandwidth_b(const PrimarySample& sample, const ErrorModel& model);
double weight_bandwidth_b(std::span<const double> aux, const PrimarySample& sample);

// --- cross-validation pilot ---------------------------------------------------

// Seeded shuffle of 0..n-1 cut into `folds` contiguous blocks.
std::vector<std::vector<std::size_t>> make_folds(std::size_t n, std::size_t folds, Rng& rng);

struct CvSetup {
  double tau0;
  double x_lo, x_hi;                              // integration region
  std::size_t x_points = 64;                      // trapezoid nodes
  double b;                                       // weighting bandwidth
  std::vector<std::vector<std::size_t>> folds;
};

// CV(h) = n^-1 sum_j sum_{i in I_j} int L_tau0(Y_i - theta_{-I_j,h}(x)) K_{U,b}(x - W_i) dx
// NaN when some held-out fit is degenerate.
double cv_criterion(const PrimarySample& sample, const ErrorModel& model, double h,
                    const CvSetup& setup);
std::vector<double> cv_curve(const PrimarySample& sample, const ErrorModel& model,
                             std::span<const double> h_grid, const CvSetup& setup);

// Index of the smallest finite value (first among ties). Throws NoFiniteCandidate.
std::size_t argmin_finite(std::span<const double> values);

CvSetup default_cv_setup(const PrimarySample& sample, const ErrorModel& model,
                         const TuningParams& params, double tau0);

// h_grid element minimizing CV. Region defaults to [min W, max W].
double cv_pilot(const PrimarySample& sample, const ErrorModel& model, const TuningParams& params,
                double tau0);

// --- undersmoothing -----------------------------------------------------------

struct UndersmoothResult {
  double h;
  std::size_t k;
  std::vector<double> sup_diffs;  // sup_diffs[l] = sup |theta_l - theta_{l-1}|, l = 2..L (0 and 1 unused)
};

UndersmoothResult undersmooth(const PrimarySample& sample, const ErrorModel& model, double h_opt,
                              const TuningParams& params, const EvalGrid& grid);

// Largest k in [2, L] with diffs[k] > rho * diffs[L], else 1. diffs is
// indexed by level (entries 0 and 1 unused).
std::size_t undersmooth_index(std::span<const double> diffs, double rho);
double undersmooth_bandwidth(std::size_t k, std::size_t levels, std::size_t n, double oversmooth);

// --- (h_W, h_Y) -------------------------------------------------------------------

struct AmisePlugins {
  double sigma_w2, sigma_y2, sigma_u2, sigma_wy;
  double sigma_x;  // sqrt(sigma_w2 - sigma_u2)
  double sigma_y;
  double rho;      // clamped to [-0.99, 0.99]
  bool rho_clamped;
};

AmisePlugins amise_plugins(const PrimarySample& sample, double sigma_u2);

double amise_objective(const AmisePlugins& p, const KernelMoments& moments, std::size_t n,
                       double energy_w, double h_w, double h_y);

struct AmiseResult {
  double h_w;
  double h_y;
  double value;
  // Every evaluated (h_W, h_Y, value); the returned point is their minimum.
  std::vector<std::array<double, 3>> evaluated;
};

AmiseResult amise_search(const PrimarySample& sample, const ErrorModel& model,
                         const KernelMoments& moments);
std::pair<double, double> amise_hw_hy(const PrimarySample& sample, const ErrorModel& model,
                                      const KernelMoments& moments);
std::pair<double, double> amise_hw_hy(const PrimarySample& sample, std::span<const double> aux,
                                      const KernelMoments& moments);

// --- SIMEX pilot ------------------------------------------------------------------

struct SimexReplicate {
  std::vector<double> w_star;   // W + U*
  std::vector<double> w_star2;  // W* + U**
  std::vector<std::vector<std::size_t>> folds;
};

SimexReplicate draw_simex_replicate(const PrimarySample& sample, std::span<const double> aux,
                                    std::size_t folds, std::uint64_t seed, std::size_t d);

// Gaussian KDE of W with bandwidth 1.06 sd(W) n^(-1/5).
class SimexWeight {
 public:
  explicit SimexWeight(std::span<const double> w);
  double operator()(double v) const;

 private:
  std::vector<double> w_;
  double bw_;
};

struct SimexCurves {
  std::vector<double> cv_star;   // summed over d
  std::vector<double> cv_star2;
};

SimexCurves simex_curves(const PrimarySample& sample, const ErrorModel& model,
                         std::span<const double> aux, const TuningParams& params, double tau0);

// (h**)^2 / h*
double simex_combine(double h_star, double h_star2);

double simex_pilot(const PrimarySample& sample, std::span<const double> aux,
                   const ErrorModel& model, const TuningParams& params, double tau0);

// --- full pipeline ----------------------------------------------------------------

struct PlanRequest {
  PilotKind pilot = PilotKind::kCv;
  std::vector<double> aux;        // required for SIMEX
  std::optional<double> h;        // manual overrides
  std::optional<double> h_w;
  std::optional<double> h_y;
};

BandwidthPlan select_bandwidths(const PrimarySample& sample, const ErrorModel& model,
                                const TuningParams& params, const EvalGrid& grid,
                                const PlanRequest& request = {});

}  // namespace quantband
