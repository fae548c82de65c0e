#include "quantband/deconv.hpp"

#include <algorithm>
#include <limits>
#include <cmath>
#include <numbers>
#include <sstream>

#include "quantband/error.hpp"
#include "quantband/simd/trig.hpp"

namespace quantband {
namespace {

constexpr double kPi = std::numbers::pi;
// |x / h| resolved by a 256-node rule; larger arguments double the rule.
constexpr double kResolvedPerNode = 60.0 / 256.0;
constexpr std::size_t kMaxOrder = 8192;
constexpr double kImagTolerance = 1e-8;

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

std::size_t resolved_order(std::size_t order, double scaled_x) {
  while (std::abs(scaled_x) > kResolvedPerNode * static_cast<double>(order) && order < kMaxOrder) {
    order *= 2;
  }
  return order;
}

// Magnitude floor with the phase preserved.
std::complex<double> clamp_denominator(std::complex<double> d, double floor, bool& clamped) {
  clamped = false;
  if (floor <= 0.0) return d;
  const double mag = std::abs(d);
  if (mag >= floor) return d;
  clamped = true;
  if (mag == 0.0) return {floor, 0.0};
  return d * (floor / mag);
}

}  // namespace

ErrorModel::ErrorModel(Kind kind) : kind_(std::move(kind)) {}

ErrorModel ErrorModel::laplace(double scale) {
  if (!(scale > 0.0) || !std::isfinite(scale)) {
    throw InputError("Laplace scale must be positive and finite");
  }
  ErrorModel m(KnownLaplace{scale});
  m.smoothness_ = OrdinarySmooth{2.0};
  return m;
}

ErrorModel ErrorModel::gaussian(double sd) {
  if (!(sd > 0.0) || !std::isfinite(sd)) {
    throw InputError("Gaussian sd must be positive and finite");
  }
  ErrorModel m(KnownGaussian{sd});
  m.smoothness_ = Supersmooth{2.0, 0.0};
  return m;
}

ErrorModel ErrorModel::empirical(std::vector<double> aux) {
  if (aux.size() < 2) throw InputError("empirical error model needs at least 2 observations");
  for (double u : aux) {
    if (!std::isfinite(u)) throw InputError("empirical error sample contains a non-finite value");
  }
  const double floor = 1.0 / std::sqrt(static_cast<double>(aux.size()));
  ErrorModel m(Empirical{std::move(aux)});
  m.clamp_floor_ = floor;
  return m;
}

ErrorModel ErrorModel::none() { return ErrorModel(Empirical{{0.0}}); }

ErrorModel ErrorModel::with_clamp_floor(double floor) const {
  if (!(floor >= 0.0)) throw InputError("clamp floor must be non-negative");
  ErrorModel copy = *this;
  copy.clamp_floor_ = floor;
  return copy;
}

double ErrorModel::variance() const {
  return std::visit(
      Overloaded{[](const KnownLaplace& l) { return 2.0 * l.scale * l.scale; },
                 [](const KnownGaussian& g) { return g.sd * g.sd; },
                 [](const Empirical& e) {
                   const std::size_t m = e.aux.size();
                   if (m < 2) return 0.0;
                   double mean = 0.0;
                   for (double u : e.aux) mean += u;
                   mean /= static_cast<double>(m);
                   double ss = 0.0;
                   for (double u : e.aux) ss += (u - mean) * (u - mean);
                   return ss / static_cast<double>(m - 1);
                 }},
      kind_);
}

std::string ErrorModel::describe() const {
  std::ostringstream os;
  os.precision(17);
  std::visit(Overloaded{[&](const KnownLaplace& l) { os << "laplace:" << l.scale; },
                        [&](const KnownGaussian& g) { os << "gaussian:" << g.sd; },
                        [&](const Empirical& e) {
                          if (e.aux.size() == 1 && e.aux[0] == 0.0) {
                            os << "none";
                          } else {
                            os << "empirical:m=" << e.aux.size();
                          }
                        }},
             kind_);
  return os.str();
}

std::complex<double> ErrorModel::charfn(double t) const {
  return std::visit(
      Overloaded{[t](const KnownLaplace& l) {
                   return std::complex<double>(1.0 / (1.0 + l.scale * l.scale * t * t), 0.0);
                 },
                 [t](const KnownGaussian& g) {
                   return std::complex<double>(std::exp(-0.5 * g.sd * g.sd * t * t), 0.0);
                 },
                 [t](const Empirical& e) {
                   double c = 0.0;
                   double s = 0.0;
                   for (double u : e.aux) {
                     c += std::cos(t * u);
                     s += std::sin(t * u);
                   }
                   const double m = static_cast<double>(e.aux.size());
                   return std::complex<double>(c / m, s / m);
                 }},
      kind_);
}

std::complex<double> charfn(const ErrorModel& model, double t) { return model.charfn(t); }

double fourier_kernel(double t) {
  if (std::abs(t) > 1.0) return 0.0;
  const double v = 1.0 - t * t;
  return v * v * v;
}

double fourier_kernel_second_derivative(double t) {
  if (std::abs(t) > 1.0) return 0.0;
  const double v = 1.0 - t * t;
  return -6.0 * v * v + 24.0 * t * t * v;
}

double base_kernel(double x, const QuadratureRule& quad) {
  const std::size_t order = resolved_order(quad.order(), x);
  const QuadratureRule& rule = order == quad.order() ? quad : gauss_legendre(order);
  const auto nodes = rule.nodes();
  const auto weights = rule.weights();
  double acc = 0.0;
  for (std::size_t k = 0; k < rule.order(); ++k) {
    acc += weights[k] * std::cos(nodes[k] * x) * fourier_kernel(nodes[k]);
  }
  return acc / (2.0 * kPi);
}

KernelMoments kernel_moments(const QuadratureRule& quad) {
  double energy = 0.0;
  for (std::size_t k = 0; k < quad.order(); ++k) {
    const double phi = fourier_kernel(quad.nodes()[k]);
    energy += quad.weights()[k] * phi * phi;
  }
  return {-fourier_kernel_second_derivative(0.0), energy / (2.0 * kPi)};
}

double inverse_charfn_energy(const ErrorModel& model, double h, const QuadratureRule& quad) {
  double acc = 0.0;
  for (std::size_t k = 0; k < quad.order(); ++k) {
    const double t = quad.nodes()[k];
    bool clamped = false;
    const auto d = clamp_denominator(model.charfn(t / h), model.clamp_floor(), clamped);
    const double phi = fourier_kernel(t);
    acc += quad.weights()[k] * phi * phi / std::norm(d);
  }
  return acc;
}

KernelValue deconv_kernel_value(const ErrorModel& model, double h, double x,
                                const QuadratureRule& quad, Clamp clamp) {
  const std::size_t order = resolved_order(quad.order(), x / h);
  const QuadratureRule& rule = order == quad.order() ? quad : gauss_legendre(order);
  const double floor = clamp == Clamp::kApply ? model.clamp_floor() : 0.0;

  std::complex<double> acc{0.0, 0.0};
  std::size_t clamped_nodes = 0;
  for (std::size_t k = 0; k < rule.order(); ++k) {
    const double t = rule.nodes()[k];
    bool clamped = false;
    const auto d = clamp_denominator(model.charfn(t / h), floor, clamped);
    clamped_nodes += clamped ? 1 : 0;
    const std::complex<double> phase(std::cos(t * x / h), -std::sin(t * x / h));
    acc += rule.weights()[k] * phase * (fourier_kernel(t) / d);
  }
  acc /= 2.0 * kPi * h;
  return {acc.real(), acc.imag(), clamped_nodes};
}

double deconv_kernel(const ErrorModel& model, double h, double x, const QuadratureRule& quad) {
  const KernelValue v = deconv_kernel_value(model, h, x, quad);
  if (!std::isfinite(v.real) || !std::isfinite(v.imag)) {
    throw NonFiniteResult("deconvolution kernel is not finite at x/h = " + std::to_string(x / h) +
                          " (bandwidth too small for the error model?)");
  }
  if (std::abs(v.imag) > kImagTolerance * (1.0 + std::abs(v.real))) {
    throw ImaginaryResidual("deconvolution kernel has imaginary residual " +
                            std::to_string(v.imag));
  }
  return v.real;
}

std::vector<double> deconv_weights(const ErrorModel& model, double h, double x,
                                   std::span<const double> w_obs, const QuadratureRule& quad) {
  std::vector<double> out(w_obs.size());
  for (std::size_t i = 0; i < w_obs.size(); ++i) {
    out[i] = deconv_kernel(model, h, x - w_obs[i], quad);
  }
  return out;
}

// ---------------------------------------------------------------------------

struct DeconvKernel::Table {
  std::vector<double> freq;
  std::vector<double> cos_coef;
  std::vector<double> sin_coef;
  double max_scaled_u;  // largest |u| / h this table resolves
};

DeconvKernel::DeconvKernel(const ErrorModel& model, double h, std::size_t base_order)
    : model_(model), h_(h), base_order_(base_order) {
  if (!(h > 0.0) || !std::isfinite(h)) throw InputError("bandwidth must be positive and finite");
  build_level(0);
}

DeconvKernel::~DeconvKernel() = default;

const DeconvKernel::Table& DeconvKernel::build_level(std::size_t level) const {
  std::call_once(once_[level], [&] {
    const std::size_t order = base_order_ << level;
    const QuadratureRule& rule = gauss_legendre(order);
    const auto nodes = rule.positive_nodes();
    const auto weights = rule.positive_weights();
    const std::size_t half = nodes.size();

    auto table = std::make_unique<Table>();
    table->freq.resize(half);
    table->cos_coef.resize(half);
    table->sin_coef.assign(model_.real_charfn() ? 0 : half, 0.0);
    table->max_scaled_u = level + 1 == kMaxLevels
                              ? std::numeric_limits<double>::infinity()
                              : kResolvedPerNode * static_cast<double>(order);

    const auto* empirical = std::get_if<Empirical>(&model_.kind());
    const auto& trig = simd::kernels();
    const double scale = 1.0 / (kPi * h_);
    std::size_t clamped_count = 0;
    for (std::size_t k = 0; k < half; ++k) {
      const double t = nodes[k];
      table->freq[k] = t / h_;
      std::complex<double> d;
      if (empirical) {
        const auto sums = trig.cos_sin_sums(t / h_, empirical->aux.data(), empirical->aux.size());
        const double m = static_cast<double>(empirical->aux.size());
        d = {sums.cos_sum / m, sums.sin_sum / m};
      } else {
        d = model_.charfn(t / h_);
      }
      bool clamped = false;
      d = clamp_denominator(d, model_.clamp_floor(), clamped);
      clamped_count += clamped ? 2 : 0;  // the mirrored node clamps too
      const std::complex<double> ratio = fourier_kernel(t) / d;
      table->cos_coef[k] = weights[k] * ratio.real() * scale;
      if (!model_.real_charfn()) table->sin_coef[k] = weights[k] * ratio.imag() * scale;
      if (!std::isfinite(table->cos_coef[k]) ||
          (!model_.real_charfn() && !std::isfinite(table->sin_coef[k]))) {
        throw NonFiniteResult("deconvolution kernel table is not finite at h = " +
                              std::to_string(h_) + " (bandwidth too small for the error model?)");
      }
    }
    clamped_.fetch_add(clamped_count);
    tables_[level] = std::move(table);
  });
  return *tables_[level];
}

const DeconvKernel::Table& DeconvKernel::table_for(double u) const {
  const double scaled = std::abs(u) / h_;
  std::size_t level = 0;
  while (level + 1 < kMaxLevels &&
         scaled > kResolvedPerNode * static_cast<double>(base_order_ << level)) {
    ++level;
  }
  return build_level(level);
}

double DeconvKernel::operator()(double u) const {
  const Table& t = table_for(u);
  const auto& trig = simd::kernels();
  if (t.sin_coef.empty()) return trig.cos_series(t.freq.data(), t.cos_coef.data(), t.freq.size(), u);
  return trig.cos_sin_series(t.freq.data(), t.cos_coef.data(), t.sin_coef.data(), t.freq.size(), u);
}

void DeconvKernel::weights(double x, std::span<const double> w, std::span<double> out) const {
  for (std::size_t i = 0; i < w.size(); ++i) out[i] = (*this)(x - w[i]);
}

std::vector<double> DeconvKernel::weights(double x, std::span<const double> w) const {
  std::vector<double> out(w.size());
  weights(x, w, out);
  return out;
}

std::size_t DeconvKernel::clamped_nodes() const noexcept { return clamped_.load(); }

}  // namespace quantband
