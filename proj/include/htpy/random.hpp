#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>

namespace htpy {

/// SplitMix64 finaliser, used to derive independent seeds for chains,
/// replicates and paths from one user seed.
[[nodiscard]] constexpr std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) noexcept {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Seeded random source passed explicitly to every sampler.
///
/// Wraps a 64-bit Mersenne twister. The variate helpers are thin layers over
/// <random>; gamma and beta variates additionally offer log-scale versions so
/// that shapes far below one do not underflow to exactly zero.
class Rng {
 public:
  using engine_type = std::mt19937_64;

  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  engine_type& engine() noexcept { return engine_; }

  /// Uniform on the open interval (0, 1).
  double uniform() {
    double u;
    do {
      u = std::generate_canonical<double, 53>(engine_);
    } while (u <= 0.0 || u >= 1.0);
    return u;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double exponential() { return -std::log(uniform()); }

  double normal() { return std::normal_distribution<double>(0.0, 1.0)(engine_); }

  /// Gamma(shape, unit scale).
  double gamma(double shape) { return std::exp(log_gamma_variate(shape)); }

  /// log of a Gamma(shape, 1) variate; exact for any shape > 0.
  double log_gamma_variate(double shape) {
    if (shape >= 1.0) {
      return std::log(std::gamma_distribution<double>(shape, 1.0)(engine_));
    }
    // G(a) = G(a + 1) U^{1/a}
    const double g = std::gamma_distribution<double>(shape + 1.0, 1.0)(engine_);
    return std::log(g) + std::log(uniform()) / shape;
  }

  /// Beta(a, b), computed from two log-gamma variates so small shapes keep
  /// resolution near 0 and 1.
  double beta(double a, double b) {
    const double la = log_gamma_variate(a);
    const double lb = log_gamma_variate(b);
    // 1 / (1 + exp(lb - la))
    const double d = lb - la;
    if (d > 0) {
      const double e = std::exp(-d);
      return e / (1.0 + e);
    }
    return 1.0 / (1.0 + std::exp(d));
  }

  /// Index drawn with probability proportional to weights[i].
  template <class Range>
  std::size_t categorical(const Range& weights, double total) {
    double target = uniform() * total;
    std::size_t i = 0;
    std::size_t last = 0;
    for (double w : weights) {
      if (w > 0) {
        last = i;
        if (target < w) return i;
        target -= w;
      }
      ++i;
    }
    return last;
  }

 private:
  engine_type engine_;
};

}  // namespace htpy
