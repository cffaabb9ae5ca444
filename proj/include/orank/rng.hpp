#pragma once

#include <cstdint>
#include <limits>
#include <string_view>

namespace orank {

/// Counter-based generator: output k is mix64(key + k * gamma), i.e. SplitMix64
/// addressed by (key, counter). Child streams are derived by name, so every
/// consumer of randomness owns an independent, reproducible stream:
///
///   Rng root(seed);
///   Rng covariates = root.derive("covariates");
///
/// Satisfies UniformRandomBitGenerator and can drive <random> distributions.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed) : key_(mix64(seed ^ 0x6a09e667f3bcc909ULL)) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() { return mix64(key_ + (++counter_) * kGamma); }

  /// Independent child stream; does not advance this generator.
  Rng derive(std::string_view name) const { return Rng(key_, hash(name)); }
  Rng derive(std::uint64_t index) const { return Rng(key_, mix64(index + kGamma)); }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, bound) by Lemire's multiply-shift (bias < 2^-64 * bound).
  std::uint64_t below(std::uint64_t bound) {
    return static_cast<std::uint64_t>((static_cast<unsigned __int128>((*this)()) * bound) >> 64);
  }

  static constexpr std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// FNV-1a, then mixed.
  static constexpr std::uint64_t hash(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : s) {
      h ^= static_cast<unsigned char>(c);
      h *= 0x100000001b3ULL;
    }
    return mix64(h);
  }

 private:
  static constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ULL;

  Rng(std::uint64_t parent_key, std::uint64_t salt) : key_(mix64(parent_key ^ salt)) {}

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

/// Seed for a named sub-experiment, e.g. derive_seed(seed, "stage2-sample").
inline std::uint64_t derive_seed(std::uint64_t seed, std::string_view name) {
  return Rng::mix64(Rng::mix64(seed) ^ Rng::hash(name));
}

}  // namespace orank
