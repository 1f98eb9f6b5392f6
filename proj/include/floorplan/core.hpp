#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace floorplan {

// Error taxonomy, mapped to CLI exit codes by the tool layer.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
// Mismatched tensor/map extents or violated call contracts.
struct ShapeError : Error {
  using Error::Error;
};
// Bad files, palettes, configs, or infeasible generator specs.
struct DataError : Error {
  using Error::Error;
};
// Non-finite values where finite math is required.
struct NumericError : Error {
  using Error::Error;
};

// fused multiply-add; single instruction on FMA hardware, exact fallback otherwise.
// Both the engine and the test oracles go through this so results stay bit-comparable.
template <typename S>
inline S mul_add(S a, S b, S c) {
#if defined(__FMA__) || defined(__ARM_FEATURE_FMA)
  return std::fma(a, b, c);
#else
  return a * b + c;
#endif
}

// Deterministic RNG. mt19937_64 output is pinned by the standard and all value
// mapping is done here by hand, so streams are reproducible across platforms.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  // uniform in [0,1), 53 usable bits
  double next_unit() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * next_unit(); }

  // inclusive bounds
  int uniform_int(int lo, int hi) {
    if (hi < lo) throw ShapeError("uniform_int: empty range");
    const std::uint64_t span = static_cast<std::uint64_t>(hi) - static_cast<std::uint64_t>(lo) + 1;
    return lo + static_cast<int>(next_u64() % span);
  }

  bool bernoulli(double p) { return next_unit() < p; }

 private:
  std::mt19937_64 gen_;
};

}  // namespace floorplan
