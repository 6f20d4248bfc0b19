#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "grouprec/matrix.hpp"

namespace grouprec {

/// xoshiro256** seeded through splitmix64. Every draw is defined bit-for-bit
/// here rather than through <random> distributions, whose output is
/// implementation-defined, so streams agree across standard libraries.
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed = 0);

  std::uint64_t next_u64();
  /// Uniform in [0, 1) with 53 bits of precision.
  double uniform();
  double uniform(double lo, double hi);
  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n);
  /// Standard normal via Box-Muller (no cached second draw).
  double normal();

  /// Independent child stream; the parent advances by one draw.
  SeededRng split();

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::array<std::uint64_t, 4> s_{};
};

/// Deterministic seed derivation, e.g. per-epoch streams from a run seed.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

/// rows x cols matrix of i.i.d. uniform draws in [lo, hi). Throws
/// ArgumentError unless lo < hi.
Matrix rng_matrix(SeededRng& rng, std::size_t rows, std::size_t cols, double lo, double hi);

}  // namespace grouprec
