#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>

namespace avec {

/// Derives an independent stream seed from a master seed and a stream tag.
std::uint64_t derive_seed(std::uint64_t master, std::string_view tag);

/// Seeded generator with explicitly implemented distributions so that the
/// whole state is the engine state. That keeps replay and checkpoint resume
/// exact: no distribution-internal caches survive outside `state()`.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1) with 53 random mantissa bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller; the paired draw is discarded so the
  /// generator stays cacheless.
  double normal() {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
  }
  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  /// Normal truncated to [-cut, cut] standard deviations (resampling).
  double truncated_normal(double stddev, double cut = 2.0) {
    double v = normal();
    while (v < -cut || v > cut) v = normal();
    return v * stddev;
  }

  /// Uniform integer in [0, n).
  std::uint64_t uniform_index(std::uint64_t n);
  /// Uniform integer in [lo, hi] inclusive.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);

  bool bernoulli(double p) { return uniform() < p; }

  template <typename It>
  void shuffle(It first, It last) {
    const auto n = static_cast<std::uint64_t>(last - first);
    for (std::uint64_t i = n; i > 1; --i) {
      const std::uint64_t j = uniform_index(i);
      std::swap(first[i - 1], first[j]);
    }
  }

  std::string state() const;
  void set_state(const std::string& s);

 private:
  std::mt19937_64 engine_;
};

}  // namespace avec
