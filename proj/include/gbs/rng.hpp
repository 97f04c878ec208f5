#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace gbs {

// Independent generator for a named stream ("data", "sampler", "init", ...)
// derived from one root seed. Same (root, name) always yields the same stream.
inline std::mt19937_64 substream(std::uint64_t root_seed, std::string_view name) {
  std::uint64_t h = 1469598103934665603ULL;  // FNV-1a
  for (char ch : name) {
    h ^= static_cast<unsigned char>(ch);
    h *= 1099511628211ULL;
  }
  std::seed_seq seq{static_cast<std::uint32_t>(root_seed), static_cast<std::uint32_t>(root_seed >> 32),
                    static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(h >> 32)};
  return std::mt19937_64(seq);
}

}  // namespace gbs
