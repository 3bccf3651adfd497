#pragma once

#include <cstdint>
#include <random>

namespace curefit {

/// Salts separating the independent uses of one user seed.
enum class StreamPurpose : std::uint32_t { simulation = 0x51u, bootstrap = 0xB0u };

/// Independent generator for (seed, key, purpose). Streams never depend on
/// which thread consumes them.
inline std::mt19937_64 substream(std::uint64_t seed, std::uint64_t key, StreamPurpose purpose) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(key), static_cast<std::uint32_t>(key >> 32),
                    static_cast<std::uint32_t>(purpose)};
  return std::mt19937_64(seq);
}

}  // namespace curefit
