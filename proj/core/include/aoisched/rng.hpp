#pragma once

#include <cstdint>

namespace aoisched {

/// SplitMix64 finalizer. Bijective on 64-bit words.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Small deterministic PRNG used for all simulation draws. Streams are cheap
/// to construct, so each (seed, replication, device) triple gets its own.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed = 0) : state_(seed) {}

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  /// True with probability p. p <= 0 never fires, p >= 1 always fires.
  bool bernoulli(double p) { return next_double() < p; }

 private:
  std::uint64_t state_;
};

/// Key for the independent stream owned by (seed, replication, device).
/// The derivation is fixed; changing it would silently change every
/// simulation result, so treat it as part of the output format.
inline std::uint64_t stream_key(std::uint64_t seed, std::uint64_t replication,
                                std::uint64_t device) {
  std::uint64_t k = mix64(seed ^ 0x8000000080000001ULL);
  k = mix64(k ^ (replication * 0xd6e8feb86659fd93ULL));
  k = mix64(k ^ (device * 0xa3b195354a39b70dULL));
  return k;
}

}  // namespace aoisched
