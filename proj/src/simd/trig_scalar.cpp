#include <cmath>

#include "quantband/simd/trig.hpp"

namespace quantband::simd::scalar {

double cos_series(const double* freq, const double* a, std::size_t n, double u) {
  double acc = 0.0;
  for (std::size_t k = 0; k < n; ++k) acc += a[k] * std::cos(freq[k] * u);
  return acc;
}

double cos_sin_series(const double* freq, const double* a, const double* b, std::size_t n,
                      double u) {
  double acc = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double arg = freq[k] * u;
    acc += a[k] * std::cos(arg) + b[k] * std::sin(arg);
  }
  return acc;
}

CosSinSums cos_sin_sums(double t, const double* v, std::size_t n) {
  CosSinSums out{0.0, 0.0};
  for (std::size_t j = 0; j < n; ++j) {
    const double arg = t * v[j];
    out.cos_sum += std::cos(arg);
    out.sin_sum += std::sin(arg);
  }
  return out;
}

}  // namespace quantband::simd::scalar
