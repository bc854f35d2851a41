#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace heterloss {

/// Seedable, splittable random source.
///
/// `split(name)` derives an independent child stream from the seed alone, so
/// drawing from one stream never perturbs another (dropout masks and weight
/// initialisation use separate children).
class Rng {
 public:
  using Engine = std::mt19937_64;

  explicit Rng(std::uint64_t seed = 0) : seed_(seed), engine_(mix(seed)) {}

  [[nodiscard]] std::uint64_t seed() const { return seed_; }

  [[nodiscard]] Rng split(std::string_view stream) const { return Rng(mix(seed_ ^ fnv1a(stream))); }
  [[nodiscard]] Rng split(std::uint64_t index) const {
    return Rng(mix(seed_ + 0x9e3779b97f4a7c15ULL * (index + 1)));
  }

  double uniform(double lo = 0.0, double hi = 1.0) {
    return std::uniform_real_distribution<double>(lo, hi)(engine_);
  }
  double normal(double mean = 0.0, double sd = 1.0) {
    return std::normal_distribution<double>(mean, sd)(engine_);
  }
  bool bernoulli(double p) { return uniform() < p; }

  Engine& engine() { return engine_; }

 private:
  static std::uint64_t mix(std::uint64_t x) {
    // splitmix64 finaliser
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  }
  static std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
    return h;
  }

  std::uint64_t seed_;
  Engine engine_;
};

}  // namespace heterloss
