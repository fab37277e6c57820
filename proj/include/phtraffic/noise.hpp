#pragma once

// Counter-based Gaussian noise. Every draw is a pure function of
// (seed, step, vehicle), so runs are reproducible regardless of how the
// work is scheduled.

#include <array>
#include <cstdint>
#include <span>

namespace phtraffic {

/// Philox4x32-10 block cipher (Salmon et al., SC'11).
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key);

/// SplitMix64 finalizer, used to derive independent seeds.
std::uint64_t mix64(std::uint64_t x);

/// Seed for ensemble member `run_index` of an ensemble seeded with `seed`.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t run_index);

class NoiseStream {
 public:
  explicit NoiseStream(std::uint64_t seed) : seed_(seed) {}

  /// Fills `out` with the standard normal draws of time step `step`;
  /// out[i] belongs to vehicle i.
  void fill(std::uint64_t step, std::span<double> out) const;

  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
};

}  // namespace phtraffic
