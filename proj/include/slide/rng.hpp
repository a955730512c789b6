#pragma once

// Seedable generator whose output is identical on every platform:
// mt19937_64 bits with hand-written uniform and Gaussian transforms (the
// standard distributions are implementation-defined).

#include "slide/types.hpp"

#include <cstdint>
#include <random>
#include <vector>

namespace slide {

/// SplitMix64 finalizer; used to derive independent child seeds.
std::uint64_t mix_seed(std::uint64_t x) noexcept;

/// Seed for stream `index` under `master`.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) noexcept;

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(mix_seed(seed)) {}

  std::uint64_t bits() { return engine_(); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform();

  /// Standard normal via Box-Muller.
  double normal();

  /// Uniform integer in [0, bound).
  std::uint64_t below(std::uint64_t bound);

  Eigen::MatrixXd uniform_matrix(Index rows, Index cols);
  Eigen::MatrixXd normal_matrix(Index rows, Index cols);

  /// Fisher-Yates permutation of 0..n-1.
  std::vector<Index> permutation(Index n);

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace slide
