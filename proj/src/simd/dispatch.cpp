#include <cstdlib>
#include <cstring>

#include "quantband/simd/trig.hpp"

namespace quantband::simd {
namespace {

constexpr TrigKernels kScalar{&scalar::cos_series, &scalar::cos_sin_series,
                              &scalar::cos_sin_sums};
#if defined(__x86_64__) || defined(_M_X64)
constexpr TrigKernels kAvx2{&avx2::cos_series, &avx2::cos_sin_series, &avx2::cos_sin_sums};
#endif

Isa detect() {
  if (const char* env = std::getenv("QUANTBAND_SIMD")) {
    if (std::strcmp(env, "scalar") == 0) return Isa::kScalar;
  }
  return isa_available(Isa::kAvx2) ? Isa::kAvx2 : Isa::kScalar;
}

}  // namespace

bool isa_available(Isa isa) {
  switch (isa) {
    case Isa::kScalar:
      return true;
    case Isa::kAvx2:
#if (defined(__x86_64__) || defined(_M_X64)) && (defined(__GNUC__) || defined(__clang__))
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
      return false;
#endif
  }
  return false;
}

Isa active_isa() {
  static const Isa isa = detect();
  return isa;
}

const char* isa_name(Isa isa) { return isa == Isa::kAvx2 ? "avx2" : "scalar"; }

const TrigKernels& kernels(Isa isa) {
#if defined(__x86_64__) || defined(_M_X64)
  if (isa == Isa::kAvx2 && isa_available(Isa::kAvx2)) return kAvx2;
#endif
  return kScalar;
}

}  // namespace quantband::simd
