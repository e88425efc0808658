#ifndef GIBBSFLOW_RNG_HPP
#define GIBBSFLOW_RNG_HPP

// Seeded random streams. A stream is identified by (seed, replica, tag);
// the engine is std::mt19937_64 seeded through std::seed_seq with the words
// {seed_lo, seed_hi, replica_lo, replica_hi, tag}. Uniform variates use the
// top 53 bits of one engine output.

#include <cmath>
#include <cstdint>
#include <random>

namespace gibbsflow {

using Engine = std::mt19937_64;

inline Engine make_engine(std::uint64_t seed, std::uint64_t replica = 0, std::uint32_t tag = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(replica), static_cast<std::uint32_t>(replica >> 32), tag};
  return Engine(seq);
}

/// Uniform on [0,1).
inline double uniform01(Engine& g) { return static_cast<double>(g() >> 11) * 0x1.0p-53; }

/// Exponential with the given rate.
inline double exponential(Engine& g, double rate) { return -std::log1p(-uniform01(g)) / rate; }

/// Small stable hash used to derive stream tags from cell keys.
inline std::uint32_t mix_tag(std::uint64_t a, std::uint64_t b = 0) {
  std::uint64_t z = a * 0x9E3779B97F4A7C15ULL + b + 0x632BE59BD9B4E019ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return static_cast<std::uint32_t>(z ^ (z >> 31));
}

}  // namespace gibbsflow

#endif  // GIBBSFLOW_RNG_HPP
