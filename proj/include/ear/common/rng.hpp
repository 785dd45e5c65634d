#pragma once

#include <cstddef>
#include <cstdint>
#include <random>

namespace ear {

/// Seeded pseudo-random stream. All randomness in the library flows through
/// an explicitly passed Rng so that runs are reproducible from a seed.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(mix(seed)) {}

  std::uint64_t seed() const noexcept { return seed_; }

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on [0, 1).
  double uniform() { return unit_(engine_); }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double normal() { return normal_(engine_); }

  /// Uniform integer on [0, n).
  std::size_t below(std::size_t n) {
    std::uniform_int_distribution<std::size_t> dist(0, n - 1);
    return dist(engine_);
  }

  bool bernoulli(double p) { return uniform() < p; }

  /// Independent stream derived from the construction seed only; calling it
  /// does not advance this generator.
  Rng stream(std::uint64_t id) const { return Rng(mix(seed_ ^ mix(id + 0x632be59bd9b4e019ULL))); }

  /// Child stream seeded from this generator's next output.
  Rng fork() { return Rng(next_u64()); }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t seed_;
  std::mt19937_64 engine_;
  std::uniform_real_distribution<double> unit_{0.0, 1.0};
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace ear
