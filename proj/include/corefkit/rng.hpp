#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace coref {

// Deterministic random stream. Wraps mt19937_64 but derives ints, reals and
// normals by hand so that sequences are identical across platforms and
// standard-library versions (std::uniform_int_distribution et al. are not
// guaranteed to produce the same values everywhere).
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t bits() { return gen_(); }

  // Uniform integer in [0, n). n must be > 0.
  std::uint64_t uniform_int(std::uint64_t n) { return gen_() % n; }

  // Uniform real in [0, 1).
  double uniform() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via Box-Muller. Two uniforms per draw, no cached spare,
  // so the consumed-bits count per call is fixed.
  double normal() {
    double u = 1.0 - uniform();  // (0, 1]
    double v = uniform();
    return std::sqrt(-2.0 * std::log(u)) * std::cos(2.0 * M_PI * v);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  bool bernoulli(double p) { return uniform() < p; }

 private:
  std::mt19937_64 gen_;
};

}  // namespace coref
