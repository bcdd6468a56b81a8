#include "rezero/rng.hpp"

#include <cmath>
#include <numbers>

namespace rezero {

SeededRng::SeededRng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

namespace {

// 53 random bits mapped onto [0, 1).
double unit(std::mt19937_64& engine) {
  return static_cast<double>(engine() >> 11) * 0x1.0p-53;
}

}  // namespace

// Box-Muller without caching the second variate, so the stream position is a
// pure function of the draw count.
double SeededRng::normal(double mean, double stddev) {
  ++draws_;
  double u1 = unit(engine_);
  double u2 = unit(engine_);
  while (u1 <= 0.0) u1 = unit(engine_);
  const double r = std::sqrt(-2.0 * std::log(u1));
  return mean + stddev * r * std::cos(2.0 * std::numbers::pi * u2);
}

double SeededRng::uniform(double lo, double hi) {
  ++draws_;
  return lo + (hi - lo) * unit(engine_);
}

bool SeededRng::bernoulli(double p_true) {
  ++draws_;
  return unit(engine_) < p_true;
}

std::uint64_t SeededRng::uniform_index(std::uint64_t n) {
  ++draws_;
  std::uniform_int_distribution<std::uint64_t> dist(0, n - 1);
  return dist(engine_);
}

SeededRng SeededRng::split() {
  ++draws_;
  return SeededRng(engine_() ^ 0x9e3779b97f4a7c15ULL);
}

}  // namespace rezero
