#pragma once

#include <cstdint>

#include "ecanet/tensor.hpp"

namespace ecanet {

/// SplitMix64 (Steele, Lea & Flood). Every random draw in the project comes
/// from one of these, seeded from a single 64-bit value, so fixtures replay
/// bit-identically on any platform.
///
/// split(k) derives an independent child stream keyed by k without advancing
/// the parent, which lets callers fan out per-seed or per-cell streams.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    return mix(z);
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  std::uint64_t below(std::uint64_t bound) { return next() % bound; }

  SplitMix64 split(std::uint64_t key) const { return SplitMix64(mix(state_ ^ mix(key + 0x632be59bd9b4e019ULL))); }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t state_;
};

inline Tensor random_tensor(Shape shape, SplitMix64& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  for (auto& v : t.data()) v = rng.uniform(lo, hi);
  return t;
}

}  // namespace ecanet
