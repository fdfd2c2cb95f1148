#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace rdkin {

/// mt19937_64 engine with explicit uniform/normal transforms. The standard
/// distribution classes are not bit-stable across library implementations;
/// these transforms are, which keeps seeded runs reproducible everywhere.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform on [0, 1) with 53-bit resolution.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller (two uniforms per draw, no caching).
  double normal() {
    double u1 = uniform();
    while (u1 == 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * 3.141592653589793238462643383279502884 * u2);
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace rdkin
