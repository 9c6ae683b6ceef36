// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>

namespace f3 {

/// splitmix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t hash_keys(std::uint64_t a, std::uint64_t b) noexcept {
  return mix64(a ^ mix64(b + 0x632be59bd9b4e019ULL));
}

constexpr std::uint64_t hash_keys(std::uint64_t a, std::uint64_t b, std::uint64_t c) noexcept {
  return hash_keys(hash_keys(a, b), c);
}

/// Maps 64 random bits to the open interval (0, 1). 52 bits, so the largest
/// value 1 - 2^-53 is still representable below 1.
constexpr double to_open_unit(std::uint64_t bits) noexcept {
  return (static_cast<double>(bits >> 12) + 0.5) * 0x1.0p-52;
}

/// Stateless counter-based generator: the value depends only on
/// (seed, stream, counter), so draws can be taken in any order or in parallel.
class CounterRng {
 public:
  explicit constexpr CounterRng(std::uint64_t seed = 0) noexcept : seed_(seed) {}

  constexpr double uniform(std::uint64_t stream, std::uint64_t counter) const noexcept {
    return to_open_unit(hash_keys(seed_, stream, counter));
  }

  constexpr std::uint64_t seed() const noexcept { return seed_; }

 private:
  std::uint64_t seed_;
};

/// Sequential view of one CounterRng stream that tallies how many
/// uniforms it has handed out.
class DrawStream {
 public:
  constexpr DrawStream(std::uint64_t seed, std::uint64_t stream) noexcept
      : rng_(seed), stream_(stream) {}

  double next_uniform() noexcept { return rng_.uniform(stream_, draws_++); }
  std::uint64_t draws() const noexcept { return draws_; }

 private:
  CounterRng rng_;
  std::uint64_t stream_;
  std::uint64_t draws_ = 0;
};

}  // namespace f3
