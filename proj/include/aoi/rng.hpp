#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

namespace aoi {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seeded random stream. Substreams are derived from the base seed alone
/// (not from consumption state), so fork(tag) is reproducible no matter how
/// much the parent stream has been used.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : seed_(seed), engine_(splitmix64(seed)) {}

  std::uint64_t seed() const { return seed_; }

  RngStream fork(std::uint64_t tag) const {
    return RngStream(splitmix64(seed_ ^ splitmix64(tag)));
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  bool bernoulli(double p) { return uniform() < p; }

  /// Uniform integer in [0, n). Rejection sampling, no modulo bias.
  std::uint64_t uniform_int(std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("uniform_int: empty range");
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t v;
    do {
      v = engine_();
    } while (v >= limit);
    return v % n;
  }

  /// Samples an index from an unnormalized non-negative weight vector using
  /// a single uniform draw.
  int categorical(std::span<const double> weights) {
    double total = 0.0;
    for (double w : weights) total += w;
    if (total <= 0.0) throw std::invalid_argument("categorical: weights sum to zero");
    const double u = uniform() * total;
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < weights.size(); ++i) {
      acc += weights[i];
      if (u < acc) return static_cast<int>(i);
    }
    return static_cast<int>(weights.size()) - 1;
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

// Named substream tags shared across the project so seed derivation is
// documented in one place. Run i of a scenario uses seed_base + i; a learner
// forks its environment and exploration streams with these tags.
namespace stream_tag {
inline constexpr std::uint64_t environment = 0x01;
inline constexpr std::uint64_t exploration = 0x02;
inline constexpr std::uint64_t initialization = 0x03;
inline constexpr std::uint64_t minibatch = 0x04;
inline constexpr std::uint64_t evaluation = 0x05;
}  // namespace stream_tag

}  // namespace aoi
