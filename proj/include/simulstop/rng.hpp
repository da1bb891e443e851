#pragma once

#include <cmath>
#include <cstdint>

namespace simulstop {

// SplitMix64 finalizer. Substream k of seed s is seeded with mix(s, k).
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t mix(std::uint64_t seed, std::uint64_t stream) noexcept {
  return mix64(seed + 0x9e3779b97f4a7c15ULL * (stream + 1));
}

struct RngSpec {
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
};

// SplitMix64 generator. Uniforms use the top 53 bits: u = (k + 0.5) / 2^53, so u is never
// 0 or 1, and unit exponentials are -ln(u).
class SplitMix64 {
 public:
  using result_type = std::uint64_t;

  explicit constexpr SplitMix64(std::uint64_t state) noexcept : state_(state) {}
  explicit constexpr SplitMix64(RngSpec spec) noexcept : state_(mix(spec.seed, spec.stream)) {}

  constexpr std::uint64_t next() noexcept {
    state_ += 0x9e3779b97f4a7c15ULL;
    return mix64(state_);
  }
  constexpr std::uint64_t operator()() noexcept { return next(); }
  static constexpr std::uint64_t min() noexcept { return 0; }
  static constexpr std::uint64_t max() noexcept { return ~std::uint64_t{0}; }

  double uniform() noexcept {
    return (static_cast<double>(next() >> 11) + 0.5) * 0x1.0p-53;
  }
  double exponential() noexcept { return -std::log(uniform()); }

 private:
  std::uint64_t state_;
};

}  // namespace simulstop
