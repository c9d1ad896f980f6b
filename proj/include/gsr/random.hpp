#pragma once

// Seedable random source with stable output across platforms. std::mt19937_64
// is fully specified by the standard; the distributions below are written out
// by hand because the standard library's distributions are not.

#include <cstdint>
#include <random>
#include <string_view>
#include <utility>
#include <vector>

namespace gsr {

std::uint64_t splitmix64(std::uint64_t x) noexcept;

/// 64-bit FNV-1a.
std::uint64_t fnv1a(std::string_view text) noexcept;

class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  /// Independent stream for one (operation, seed, index) triple.
  static Rng stream(std::uint64_t seed, std::string_view tag, std::uint64_t index = 0);

  std::uint64_t next() { return engine_(); }
  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Standard normal via Box-Muller; one value per call.
  double normal();
  /// Uniform integer on [0, n).
  std::uint64_t below(std::uint64_t n);

  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) std::swap(items[i - 1], items[below(i)]);
  }

  /// k distinct indices from [0, n) in increasing order.
  std::vector<std::size_t> sample(std::size_t n, std::size_t k);

 private:
  std::mt19937_64 engine_;
};

}  // namespace gsr
