#pragma once

#include <cstdint>
#include <random>

namespace wocar {

/// Independent generator for one concern (exploration, replay, ...) derived
/// from a master seed, so adding draws in one stream never shifts another.
inline std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  return std::mt19937_64(seq);
}

}  // namespace wocar
