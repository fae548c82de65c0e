#pragma once

#include <cstdint>
#include <random>

namespace quantband {

using Rng = std::mt19937_64;

// Independent generator keyed by (seed, a, b). Streams for different keys
// do not overlap in practice; the same key always yields the same stream.
Rng make_stream(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0);

// Stream purposes used by the library so that derived seeds never collide.
namespace stream_tag {
inline constexpr std::uint64_t kBootstrap = 0xB001;
inline constexpr std::uint64_t kFolds = 0xF01D;
inline constexpr std::uint64_t kSimex = 0x51E7;
inline constexpr std::uint64_t kData = 0xDA7A;
}  // namespace stream_tag

}  // namespace quantband
