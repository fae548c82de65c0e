// AVX2 + FMA variants of the trigonometric series kernels. This translation
// unit is compiled with -mavx2 -mfma and only entered after a CPUID check.

#if defined(__x86_64__) || defined(_M_X64)

#include <immintrin.h>

#include <cmath>

#include "quantband/simd/trig.hpp"

namespace quantband::simd::avx2 {
namespace {

// Arguments beyond this magnitude lose accuracy in the three-part
// Cody-Waite reduction; callers fall back to the scalar kernel.
constexpr double kMaxArgument = 1e7;

// pi/2 split into three parts (fdlibm), the first two with 33 significant bits.
constexpr double kPio2Hi = 1.57079632673412561417e+00;
constexpr double kPio2Mid = 6.07710050630396597660e-11;
constexpr double kPio2Lo = 2.02226624879595063154e-21;
constexpr double kTwoOverPi = 0.63661977236758134308;

// Minimax coefficients on [-pi/4, pi/4] (Cephes sin.c), highest degree first.
constexpr double kSin[6] = {1.58962301576546568060e-10, -2.50507477628578072866e-8,
                            2.75573136213857245213e-6,  -1.98412698295895385996e-4,
                            8.33333333332211858878e-3,  -1.66666666666666307295e-1};
constexpr double kCos[6] = {-1.13585365213876817300e-11, 2.08757008419747316778e-9,
                            -2.75573141792967388112e-7,  2.48015872888517045348e-5,
                            -1.38888888888730564116e-3,  4.16666666666665929218e-2};

inline __m256d horner(__m256d z, const double (&c)[6]) {
  __m256d p = _mm256_set1_pd(c[0]);
  for (int i = 1; i < 6; ++i) p = _mm256_fmadd_pd(p, z, _mm256_set1_pd(c[i]));
  return p;
}

inline void sincos_pd(__m256d x, __m256d& s, __m256d& c) {
  const __m256d q = _mm256_round_pd(_mm256_mul_pd(x, _mm256_set1_pd(kTwoOverPi)),
                                    _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
  __m256d r = _mm256_fnmadd_pd(q, _mm256_set1_pd(kPio2Hi), x);
  r = _mm256_fnmadd_pd(q, _mm256_set1_pd(kPio2Mid), r);
  r = _mm256_fnmadd_pd(q, _mm256_set1_pd(kPio2Lo), r);

  const __m256d z = _mm256_mul_pd(r, r);
  const __m256d rz = _mm256_mul_pd(r, z);
  const __m256d sp = _mm256_fmadd_pd(rz, horner(z, kSin), r);
  const __m256d half_z = _mm256_mul_pd(z, _mm256_set1_pd(0.5));
  const __m256d cp = _mm256_fmadd_pd(_mm256_mul_pd(z, z), horner(z, kCos),
                                     _mm256_sub_pd(_mm256_set1_pd(1.0), half_z));

  const __m256i quadrant = _mm256_cvtepi32_epi64(_mm256_cvtpd_epi32(q));
  const __m256i one = _mm256_set1_epi64x(1);
  const __m256i two = _mm256_set1_epi64x(2);
  const __m256d swap =
      _mm256_castsi256_pd(_mm256_cmpeq_epi64(_mm256_and_si256(quadrant, one), one));
  const __m256d sin_abs = _mm256_blendv_pd(sp, cp, swap);
  const __m256d cos_abs = _mm256_blendv_pd(cp, sp, swap);
  const __m256i sin_sign = _mm256_slli_epi64(_mm256_and_si256(quadrant, two), 62);
  const __m256i cos_sign =
      _mm256_slli_epi64(_mm256_and_si256(_mm256_add_epi64(quadrant, one), two), 62);
  s = _mm256_xor_pd(sin_abs, _mm256_castsi256_pd(sin_sign));
  c = _mm256_xor_pd(cos_abs, _mm256_castsi256_pd(cos_sign));
}

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

inline __m256i tail_mask(std::size_t remaining) {
  const __m256i lanes = _mm256_set_epi64x(3, 2, 1, 0);
  return _mm256_cmpgt_epi64(_mm256_set1_epi64x(static_cast<long long>(remaining)), lanes);
}

double max_abs(const double* v, std::size_t n) {
  double m = 0.0;
  for (std::size_t i = 0; i < n; ++i) m = std::fmax(m, std::fabs(v[i]));
  return m;
}

}  // namespace

void sincos(const double* x, double* s, double* c, std::size_t n) {
  std::size_t k = 0;
  for (; k + 4 <= n; k += 4) {
    __m256d vs, vc;
    sincos_pd(_mm256_loadu_pd(x + k), vs, vc);
    _mm256_storeu_pd(s + k, vs);
    _mm256_storeu_pd(c + k, vc);
  }
  if (k < n) {
    const __m256i mask = tail_mask(n - k);
    __m256d vs, vc;
    sincos_pd(_mm256_maskload_pd(x + k, mask), vs, vc);
    _mm256_maskstore_pd(s + k, mask, vs);
    _mm256_maskstore_pd(c + k, mask, vc);
  }
}

double cos_series(const double* freq, const double* a, std::size_t n, double u) {
  if (std::fabs(u) * max_abs(freq, n) > kMaxArgument) return scalar::cos_series(freq, a, n, u);
  const __m256d vu = _mm256_set1_pd(u);
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t k = 0;
  for (; k + 8 <= n; k += 8) {
    __m256d s0, c0, s1, c1;
    sincos_pd(_mm256_mul_pd(_mm256_loadu_pd(freq + k), vu), s0, c0);
    sincos_pd(_mm256_mul_pd(_mm256_loadu_pd(freq + k + 4), vu), s1, c1);
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + k), c0, acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + k + 4), c1, acc1);
  }
  for (; k < n; k += 4) {
    const __m256i mask = tail_mask(n - k);
    __m256d s, c;
    sincos_pd(_mm256_mul_pd(_mm256_maskload_pd(freq + k, mask), vu), s, c);
    acc0 = _mm256_fmadd_pd(_mm256_maskload_pd(a + k, mask), c, acc0);
  }
  return hsum(_mm256_add_pd(acc0, acc1));
}

double cos_sin_series(const double* freq, const double* a, const double* b, std::size_t n,
                      double u) {
  if (std::fabs(u) * max_abs(freq, n) > kMaxArgument) {
    return scalar::cos_sin_series(freq, a, b, n, u);
  }
  const __m256d vu = _mm256_set1_pd(u);
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t k = 0;
  for (; k + 4 <= n; k += 4) {
    __m256d s, c;
    sincos_pd(_mm256_mul_pd(_mm256_loadu_pd(freq + k), vu), s, c);
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + k), c, acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(b + k), s, acc1);
  }
  if (k < n) {
    const __m256i mask = tail_mask(n - k);
    __m256d s, c;
    sincos_pd(_mm256_mul_pd(_mm256_maskload_pd(freq + k, mask), vu), s, c);
    acc0 = _mm256_fmadd_pd(_mm256_maskload_pd(a + k, mask), c, acc0);
    acc1 = _mm256_fmadd_pd(_mm256_maskload_pd(b + k, mask), s, acc1);
  }
  return hsum(_mm256_add_pd(acc0, acc1));
}

CosSinSums cos_sin_sums(double t, const double* v, std::size_t n) {
  if (std::fabs(t) * max_abs(v, n) > kMaxArgument) return scalar::cos_sin_sums(t, v, n);
  const __m256d vt = _mm256_set1_pd(t);
  __m256d cs = _mm256_setzero_pd();
  __m256d ss = _mm256_setzero_pd();
  std::size_t j = 0;
  for (; j + 4 <= n; j += 4) {
    __m256d s, c;
    sincos_pd(_mm256_mul_pd(_mm256_loadu_pd(v + j), vt), s, c);
    cs = _mm256_add_pd(cs, c);
    ss = _mm256_add_pd(ss, s);
  }
  if (j < n) {
    const __m256i mask = tail_mask(n - j);
    const __m256d mpd = _mm256_castsi256_pd(mask);
    __m256d s, c;
    sincos_pd(_mm256_mul_pd(_mm256_maskload_pd(v + j, mask), vt), s, c);
    cs = _mm256_add_pd(cs, _mm256_and_pd(c, mpd));
    ss = _mm256_add_pd(ss, _mm256_and_pd(s, mpd));
  }
  return {hsum(cs), hsum(ss)};
}

}  // namespace quantband::simd::avx2

#endif
