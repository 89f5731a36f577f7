#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>

namespace bee {

/// Seeded random stream. All distributions are implemented on top of the
/// raw engine output so that a given seed produces the same draw sequence
/// on every platform and build.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1).
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n).
  int uniform_int(int n) {
    if (n <= 0) throw std::invalid_argument("uniform_int: n must be positive");
    const std::uint64_t un = static_cast<std::uint64_t>(n);
    const std::uint64_t bound = UINT64_MAX - UINT64_MAX % un;
    std::uint64_t v = next_u64();
    while (v >= bound) v = next_u64();
    return static_cast<int>(v % un);
  }

  /// Standard normal via Box-Muller; the spare draw is cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    constexpr double two_pi = 6.283185307179586476925286766559;
    spare_ = r * std::sin(two_pi * u2);
    has_spare_ = true;
    return r * std::cos(two_pi * u2);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  /// Symmetric Beta(alpha, alpha) on [0, 1]. alpha == 1 is uniform.
  double beta(double alpha) {
    if (alpha <= 0.0) throw std::invalid_argument("beta: alpha must be > 0");
    if (alpha == 1.0) return uniform();
    const double x = gamma(alpha);
    const double y = gamma(alpha);
    const double s = x + y;
    if (s <= 0.0) return 0.5;
    return x / s;
  }

  /// Independent child stream derived from a base draw and an index.
  /// stream(b, i) is stable in i, so work items can be fanned out across
  /// threads and still reproduce the serial draw-for-draw.
  static Rng stream(std::uint64_t base, std::uint64_t index) {
    return Rng(splitmix64(base ^ splitmix64(index + 0x9e3779b97f4a7c15ULL)));
  }

  /// Child stream keyed off the current engine state; advances this stream.
  Rng fork() { return Rng(splitmix64(next_u64())); }

  static std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  }

 private:
  // Marsaglia-Tsang for shape >= 1, boosted for shape < 1.
  double gamma(double shape) {
    if (shape < 1.0) {
      const double u = uniform();
      return gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x = normal();
      double v = 1.0 + c * x;
      if (v <= 0.0) continue;
      v = v * v * v;
      const double u = uniform();
      if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
      if (u > 0.0 && std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
    }
  }

  std::uint64_t seed_;
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace bee
