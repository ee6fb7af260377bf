#pragma once

#include <array>
#include <cstdint>
#include <random>

namespace qsm {

// Derives an independent stream seed for sub-task `index` of a run seeded with `seed`.
inline std::uint64_t splitSeed(std::uint64_t seed, std::uint64_t index)
{
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  std::array<std::uint32_t, 2> out;
  seq.generate(out.begin(), out.end());
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

} // namespace qsm
