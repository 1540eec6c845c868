#pragma once

#include <cstdint>
#include <random>
#include <string_view>

#include "outlierlab/core.hpp"

namespace outlierlab {

using Rng = std::mt19937_64;

std::uint64_t splitmix64(std::uint64_t x);

// Seed of the stream identified by (master, n, trial, purpose). Distinct
// purposes never share a stream, so adding a new draw site does not shift the
// others.
std::uint64_t stream_seed(std::uint64_t master, std::uint64_t n, std::uint64_t trial,
                          std::string_view purpose);

inline Rng make_stream(std::uint64_t master, std::uint64_t n, std::uint64_t trial,
                       std::string_view purpose) {
  return Rng(stream_seed(master, n, trial, purpose));
}

inline double standard_normal(Rng& rng) {
  return std::normal_distribution<double>(0.0, 1.0)(rng);
}

// Circular complex Gaussian with E|z|^2 = variance.
inline cd complex_normal(Rng& rng, double variance = 1.0) {
  const double s = std::sqrt(variance / 2.0);
  const double re = standard_normal(rng);
  const double im = standard_normal(rng);
  return {s * re, s * im};
}

inline double uniform01(Rng& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

}  // namespace outlierlab
