#pragma once

// Trigonometric series kernels behind every deconvolution-kernel evaluation.
// Each kernel has a scalar reference implementation (std::cos / std::sin)
// and, on x86-64, an AVX2+FMA variant selected at runtime. The variants agree
// to a few ulps of the series magnitude, not bitwise.

#include <cstddef>
#include <span>

namespace quantband::simd {

enum class Isa { kScalar, kAvx2 };

// Best ISA supported by the CPU, unless QUANTBAND_SIMD=scalar forces the
// reference path. Resolved once per process.
Isa active_isa();
const char* isa_name(Isa isa);
bool isa_available(Isa isa);

struct CosSinSums {
  double cos_sum;
  double sin_sum;
};

// sum_k a[k] * cos(freq[k] * u)
using CosSeriesFn = double (*)(const double* freq, const double* a, std::size_t n, double u);
// sum_k a[k] * cos(freq[k] * u) + b[k] * sin(freq[k] * u)
using CosSinSeriesFn = double (*)(const double* freq, const double* a, const double* b,
                                  std::size_t n, double u);
// (sum_j cos(t * v[j]), sum_j sin(t * v[j]))
using CosSinSumsFn = CosSinSums (*)(double t, const double* v, std::size_t n);

struct TrigKernels {
  CosSeriesFn cos_series;
  CosSinSeriesFn cos_sin_series;
  CosSinSumsFn cos_sin_sums;
};

const TrigKernels& kernels(Isa isa);
inline const TrigKernels& kernels() { return kernels(active_isa()); }

namespace scalar {
double cos_series(const double* freq, const double* a, std::size_t n, double u);
double cos_sin_series(const double* freq, const double* a, const double* b, std::size_t n,
                      double u);
CosSinSums cos_sin_sums(double t, const double* v, std::size_t n);
}  // namespace scalar

#if defined(__x86_64__) || defined(_M_X64)
namespace avx2 {
double cos_series(const double* freq, const double* a, std::size_t n, double u);
double cos_sin_series(const double* freq, const double* a, const double* b, std::size_t n,
                      double u);
CosSinSums cos_sin_sums(double t, const double* v, std::size_t n);
// Lane-wise sin and cos of x[0..n); exposed for accuracy tests.
void sincos(const double* x, double* s, double* c, std::size_t n);
}  // namespace avx2
#endif

}  // namespace quantband::simd
