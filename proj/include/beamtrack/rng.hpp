#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "beamtrack/math.hpp"

namespace beamtrack {

/// Seeded random source with a fixed mapping from engine output to uniform
/// and normal variates, so that seeded runs reproduce bit-exactly regardless
/// of the standard library's distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 1) : gen_(seed) {}

  void seed(std::uint64_t s) {
    gen_.seed(s);
    has_spare_ = false;
  }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  /// Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = 1.0 - uniform();  // (0, 1]
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 2.0 * kPi * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  Vec3 normal3() {
    double a = normal();
    double b = normal();
    double c = normal();
    return {a, b, c};
  }

  std::uint64_t raw() { return gen_(); }

 private:
  std::mt19937_64 gen_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace beamtrack
