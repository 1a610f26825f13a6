#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string_view>
#include <vector>

namespace rgb2lidar {

/// One splitmix64 step; used to decorrelate derived seeds.
std::uint64_t splitmix64(std::uint64_t x) noexcept;

/// Stage-keyed seed derivation: every seeded component receives
/// splitmix64(root ^ fnv1a64(stage)). Stable across platforms.
std::uint64_t derive_seed(std::uint64_t root, std::string_view stage) noexcept;

/// Mixes further integer keys into a seed (e.g. location id, heading).
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t key) noexcept;

/// mt19937_64 with distributions implemented here rather than through
/// <random>'s distribution objects, whose output differs between standard
/// libraries. Sequences are a function of the seed only.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform01();

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  /// Unbiased integer in [0, n). n must be > 0.
  std::uint64_t uniform_index(std::uint64_t n);

  /// Standard normal (Box-Muller; the second variate is cached).
  double normal();

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(uniform_index(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
  std::optional<double> spare_normal_;
};

}  // namespace rgb2lidar
