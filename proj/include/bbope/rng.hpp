#pragma once

// Counter-based random numbers.
//
// Every stochastic operation in the library draws from Philox4x32-10
// (Salmon et al., "Parallel random numbers: as easy as 1, 2, 3"). A draw is a
// pure function of (key, counter), so a stream can be positioned anywhere
// without replaying earlier draws. The 128-bit counter is laid out as
//
//   word 0  block index inside the stream (incremented per 4 words drawn)
//   word 1  stream tag (what the numbers are used for, see StreamTag)
//   word 2  low 32 bits of the stream position
//   word 3  high 32 bits of the stream position
//
// and the 64-bit seed is the key. Trajectory samplers use the global step index
// as the position, so the randomness consumed at step g is the same whichever
// trajectory split the step belongs to.

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>

namespace bbope {

using PhiloxCounter = std::array<std::uint32_t, 4>;
using PhiloxKey = std::array<std::uint32_t, 2>;

/// Philox4x32 with 10 rounds.
PhiloxCounter philox4x32_10(PhiloxCounter counter, PhiloxKey key) noexcept;

enum class StreamTag : std::uint32_t {
  initial_state = 1,
  action = 2,
  transition = 3,
  environment = 4,
  subsample = 5,
  minibatch = 6,
  initialization = 7,
  generic = 8,
};

class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t position, StreamTag tag) noexcept;

  std::uint64_t next_u64() noexcept;
  /// Uniform on [0, 1) with 53 random bits.
  double uniform() noexcept;
  double uniform(double lo, double hi) noexcept;
  /// Uniform integer in [0, n). Requires n > 0.
  std::uint64_t below(std::uint64_t n) noexcept;

 private:
  void refill() noexcept;

  PhiloxKey key_;
  std::uint64_t position_;
  std::uint32_t tag_;
  std::uint32_t block_ = 0;
  PhiloxCounter buffer_{};
  int used_ = 4;
};

/// SplitMix64 finalizer applied to a ^ rotated b.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) noexcept;

/// FNV-1a 64-bit hash of a string.
std::uint64_t fnv1a(std::string_view text) noexcept;

/// Seed for run `run` of experiment `experiment`:
/// mix_seed(mix_seed(base, fnv1a(experiment)), run).
std::uint64_t derive_seed(std::uint64_t base, std::string_view experiment,
                          std::uint64_t run) noexcept;

/// Inverse-CDF draw: the first index whose cumulative probability exceeds u.
/// A u beyond the total (roundoff) maps to the last index with positive mass.
std::size_t sample_categorical(std::span<const double> probabilities, double u);

}  // namespace bbope
