#pragma once

// Characteristic functions, the base kernel K with Fourier transform
// phi_K(t) = (1 - t^2)^3 on [-1, 1], and the deconvolution kernel
//
//   K_{U,h}(x) = 1/(2 pi h) * int exp(-i t x / h) phi_K(t) / phi_U(t / h) dt
//
// with phi_U known (Laplace, Gaussian) or replaced by the empirical
// characteristic function of an auxiliary error sample.

#include <atomic>
#include <complex>
#include <cstddef>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "quantband/quadrature.hpp"

namespace quantband {

struct KnownLaplace {
  double scale;  // b; variance 2 b^2
};
struct KnownGaussian {
  double sd;  // variance sd^2
};
struct Empirical {
  std::vector<double> aux;
};

struct OrdinarySmooth {
  double order;
};
struct Supersmooth {
  double order;
  double beta0;
};
using SmoothnessTag = std::variant<OrdinarySmooth, Supersmooth>;

class ErrorModel {
 public:
  using Kind = std::variant<KnownLaplace, KnownGaussian, Empirical>;

  static ErrorModel laplace(double scale);
  static ErrorModel gaussian(double sd);
  // Requires at least two finite observations.
  static ErrorModel empirical(std::vector<double> aux);
  // Empirical({0}): phi_U == 1 exactly, i.e. no measurement error.
  static ErrorModel none();

  const Kind& kind() const noexcept { return kind_; }
  bool is_empirical() const noexcept { return std::holds_alternative<Empirical>(kind_); }
  // True when phi_U is real and even, so the kernel is a pure cosine series.
  bool real_charfn() const noexcept { return !is_empirical(); }

  // Magnitude floor applied to phi_U in kernel denominators.
  double clamp_floor() const noexcept { return clamp_floor_; }
  ErrorModel with_clamp_floor(double floor) const;

  const std::optional<SmoothnessTag>& smoothness() const noexcept { return smoothness_; }
  double variance() const;
  std::string describe() const;

  std::complex<double> charfn(double t) const;

 private:
  explicit ErrorModel(Kind kind);

  Kind kind_;
  double clamp_floor_ = 0.0;
  std::optional<SmoothnessTag> smoothness_;
};

struct KernelMoments {
  double kappa21;  // int x^2 K(x) dx
  double l2norm;   // int K(x)^2 dx
};

// phi_K(t) = (1 - t^2)^3 for |t| <= 1, else 0.
double fourier_kernel(double t);
// phi_K''(t) on [-1, 1].
double fourier_kernel_second_derivative(double t);

double base_kernel(double x, const QuadratureRule& quad = gauss_legendre(kDefaultQuadratureOrder));

KernelMoments kernel_moments(const QuadratureRule& quad = gauss_legendre(kDefaultQuadratureOrder));

// int_{-1}^{1} phi_K(t)^2 / |phi_U(t / h)|^2 dt, with the model's clamp.
double inverse_charfn_energy(const ErrorModel& model, double h,
                             const QuadratureRule& quad = gauss_legendre(kDefaultQuadratureOrder));

std::complex<double> charfn(const ErrorModel& model, double t);

struct KernelValue {
  double real;
  double imag;  // quadrature residual; zero in exact arithmetic
  std::size_t clamped_nodes;
};

enum class Clamp { kApply, kSkip };

// Direct complex quadrature over the full rule. Rules are doubled
// automatically while |x / h| exceeds 60 * order / 256.
KernelValue deconv_kernel_value(const ErrorModel& model, double h, double x,
                                const QuadratureRule& quad, Clamp clamp = Clamp::kApply);

// Real part of deconv_kernel_value. Throws NonFiniteResult on non-finite
// output and ImaginaryResidual if |imag| > 1e-8 (1 + |real|).
double deconv_kernel(const ErrorModel& model, double h, double x,
                     const QuadratureRule& quad = gauss_legendre(kDefaultQuadratureOrder));

std::vector<double> deconv_weights(const ErrorModel& model, double h, double x,
                                   std::span<const double> w_obs,
                                   const QuadratureRule& quad = gauss_legendre(kDefaultQuadratureOrder));

// Tabulated K_{U,h} for repeated evaluation at a fixed (model, h).
//
// Folds the quadrature onto the positive nodes, so each evaluation is a
// cosine (known models) or cosine/sine (empirical) series of order/2 terms
// run through the dispatched SIMD kernel. Agrees with deconv_kernel to
// rounding. Thread-safe; tables for doubled rules are built on demand.
class DeconvKernel {
 public:
  DeconvKernel(const ErrorModel& model, double h, std::size_t base_order = kDefaultQuadratureOrder);
  ~DeconvKernel();
  DeconvKernel(const DeconvKernel&) = delete;
  DeconvKernel& operator=(const DeconvKernel&) = delete;

  double h() const noexcept { return h_; }
  const ErrorModel& model() const noexcept { return model_; }

  double operator()(double u) const;
  // out[i] = K_{U,h}(x - w[i])
  void weights(double x, std::span<const double> w, std::span<double> out) const;
  std::vector<double> weights(double x, std::span<const double> w) const;

  // Number of clamped nodes across all tables built so far.
  std::size_t clamped_nodes() const noexcept;

 private:
  struct Table;
  const Table& table_for(double u) const;
  const Table& build_level(std::size_t level) const;

  static constexpr std::size_t kMaxLevels = 6;  // up to 256 * 2^5 nodes

  ErrorModel model_;
  double h_;
  std::size_t base_order_;
  mutable std::once_flag once_[kMaxLevels];
  mutable std::unique_ptr<Table> tables_[kMaxLevels];
  mutable std::atomic<std::size_t> clamped_{0};
};

}  // namespace quantband
