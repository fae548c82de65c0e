#include "quantband/rng.hpp"

namespace quantband {
namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

Rng make_stream(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  const std::uint64_t key = splitmix64(splitmix64(splitmix64(seed) ^ a) ^ b);
  return Rng(key);
}

}  // namespace quantband
