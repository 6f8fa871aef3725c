#pragma once

#include <cstdint>
#include <string_view>

namespace arena {

// SplitMix64 finalizer. Used both for key derivation and as the output
// function of the counter-based stream below.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t fnv1a64(std::string_view text) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : text) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Stream keys are built by folding components into a base key. Order of
// folding matters; the same sequence of components always yields the same key.
constexpr std::uint64_t derive_key(std::uint64_t base, std::uint64_t component) noexcept {
  return mix64(base ^ mix64(component + 0x632be59bd9b4e019ULL));
}

constexpr std::uint64_t derive_key(std::uint64_t base, std::string_view component) noexcept {
  return derive_key(base, fnv1a64(component));
}

template <typename First, typename... Rest>
  requires(sizeof...(Rest) > 0)
constexpr std::uint64_t derive_key(std::uint64_t base, const First& first, const Rest&... rest) noexcept {
  return derive_key(derive_key(base, first), rest...);
}

// Counter-based generator: the n-th draw depends only on (key, n), so a
// stream's values never depend on what other streams were consumed.
// Distribution code is hand-written so results are identical on every
// standard library.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t key) noexcept : key_(key) {}

  std::uint64_t next_u64() noexcept { return mix64(key_ + 0x9e3779b97f4a7c15ULL * ++counter_); }

  // Uniform on [0, 1).
  double uniform() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform integer on [0, n).
  std::uint64_t below(std::uint64_t n) noexcept;

  // Standard normal via Box-Muller (one variate per call, the pair's twin is discarded).
  double normal() noexcept;

  std::uint64_t key() const noexcept { return key_; }
  std::uint64_t counter() const noexcept { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace arena
