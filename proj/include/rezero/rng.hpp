#pragma once

#include <cstdint>
#include <random>

namespace rezero {

/// Deterministic random source. Two instances built from the same seed emit
/// the same sample stream bit for bit.
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed = 0);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t draws() const { return draws_; }

  double normal(double mean, double stddev);
  double uniform(double lo, double hi);
  bool bernoulli(double p_true);
  std::uint64_t uniform_index(std::uint64_t n);

  /// Independent stream derived from this one, for components that need
  /// their own sequence (dropout masks, data sampling).
  SeededRng split();

 private:
  std::uint64_t seed_;
  std::uint64_t draws_ = 0;
  std::mt19937_64 engine_;
};

}  // namespace rezero
