#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <vector>

namespace bayman {

/// Deterministic random helpers. std::mt19937_64 is bit-portable across
/// implementations; the standard distributions are not, so bounded draws
/// and doubles are produced by hand.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform double in [0, 1) built from the top 53 bits.
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  /// Uniform integer in {0, ..., n-1}, unbiased via rejection.
  std::size_t below(std::size_t n);

  /// Index drawn from an (unnormalized) nonnegative weight vector.
  int categorical(std::span<const double> weights);

  /// Fisher-Yates shuffle, stable across platforms for a fixed seed.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[below(i)]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

/// Named sub-seed derivation so one experiment seed can drive independent
/// random streams (perturb, augment, init, shuffle, per-user sampling).
std::uint64_t derive_seed(std::uint64_t base, std::string_view tag);
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t salt);

}  // namespace bayman
