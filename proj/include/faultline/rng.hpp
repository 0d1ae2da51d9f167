#pragma once

// Deterministic splittable PRNG. Every random choice in the engine flows from
// one root seed through named child streams, so runs replay bit-identically
// across platforms (no std:: distributions, no std::shuffle).

#include <cstdint>
#include <string_view>
#include <vector>

namespace faultline {

namespace detail {

constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

}  // namespace detail

// FNV-1a, also used for file/trace checksums.
constexpr std::uint64_t fnv1a(std::string_view s,
                              std::uint64_t h = 1469598103934665603ull) {
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ull;
  }
  return h;
}

class SplitRng {
 public:
  explicit SplitRng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ull;
    return detail::mix64(state_);
  }

  // Unbiased integer in [0, bound); bound must be > 0.
  std::uint64_t next_below(std::uint64_t bound) {
    const std::uint64_t threshold = (-bound) % bound;
    for (;;) {
      std::uint64_t r = next_u64();
      if (r >= threshold) return r % bound;
    }
  }

  double next_unit() {  // [0, 1)
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Child generator statistically independent of this one and of other
  // streams split off the same parent.
  SplitRng split(std::uint64_t stream) const {
    return SplitRng(detail::mix64(state_ ^ detail::mix64(
        0x6a09e667f3bcc909ull + 0x9e3779b97f4a7c15ull * (2 * stream + 1))));
  }

  SplitRng split(std::string_view name) const { return split(fnv1a(name)); }

  template <typename T>
  void shuffle(std::vector<T>& v) {  // Fisher-Yates
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(next_below(i));
      using std::swap;
      swap(v[i - 1], v[j]);
    }
  }

 private:
  std::uint64_t state_;
};

}  // namespace faultline
