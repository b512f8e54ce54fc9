#pragma once

#include <cstdint>

#include "solar/matrix.hpp"

namespace solar {

// Counter-based pseudo-random generator (splitmix-style output function over
// a seed + draw counter). Identical seed gives an identical stream, and the
// state is two integers, so streams are cheap to fork and replay.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = seed_ + 0x9e3779b97f4a7c15ULL * ++counter_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform in (0, 1]; avoids log(0) in Box-Muller.
  double uniform_pos() {
    return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
  }

  // Standard normal via Box-Muller; second value of each pair is cached.
  double gaussian();

  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) { return next_u64() % n; }

  Matrix gaussian_matrix(std::size_t rows, std::size_t cols);
  Matrix uniform_matrix(std::size_t rows, std::size_t cols, double lo, double hi);

  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Stable seed derivation for sub-streams (e.g. one stream per benchmark cell).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t salt);

}  // namespace solar
