#include "bbope/rng.hpp"

#include "bbope/errors.hpp"

namespace bbope {

namespace {

constexpr std::uint32_t kMul0 = 0xD2511F53u;
constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi,
                    std::uint32_t& lo) noexcept {
  const std::uint64_t product = static_cast<std::uint64_t>(a) * b;
  hi = static_cast<std::uint32_t>(product >> 32);
  lo = static_cast<std::uint32_t>(product);
}

}  // namespace

PhiloxCounter philox4x32_10(PhiloxCounter ctr, PhiloxKey key) noexcept {
  for (int round = 0; round < 10; ++round) {
    if (round > 0) {
      key[0] += kWeyl0;
      key[1] += kWeyl1;
    }
    std::uint32_t hi0, lo0, hi1, lo1;
    mulhilo(kMul0, ctr[0], hi0, lo0);
    mulhilo(kMul1, ctr[2], hi1, lo1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
  }
  return ctr;
}

CounterRng::CounterRng(std::uint64_t seed, std::uint64_t position, StreamTag tag) noexcept
    : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
      position_(position),
      tag_(static_cast<std::uint32_t>(tag)) {}

void CounterRng::refill() noexcept {
  buffer_ = philox4x32_10({block_, tag_, static_cast<std::uint32_t>(position_),
                           static_cast<std::uint32_t>(position_ >> 32)},
                          key_);
  ++block_;
  used_ = 0;
}

std::uint64_t CounterRng::next_u64() noexcept {
  if (used_ > 2) refill();
  const std::uint64_t value =
      (static_cast<std::uint64_t>(buffer_[used_]) << 32) | buffer_[used_ + 1];
  used_ += 2;
  return value;
}

double CounterRng::uniform() noexcept {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double CounterRng::uniform(double lo, double hi) noexcept {
  return lo + (hi - lo) * uniform();
}

std::uint64_t CounterRng::below(std::uint64_t n) noexcept {
  // Rejection sampling keeps the draw exactly uniform.
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x = next_u64();
  while (x >= limit) x = next_u64();
  return x % n;
}

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) noexcept {
  std::uint64_t z = a ^ ((b << 29) | (b >> 35));
  z += 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  z ^= z >> 31;
  // second round so that (a, b) and (a', b') with a ^ b equal still differ
  z ^= b * 0xD6E8FEB86659FD93ull;
  z = (z ^ (z >> 32)) * 0xD6E8FEB86659FD93ull;
  return z ^ (z >> 32);
}

std::uint64_t fnv1a(std::string_view text) noexcept {
  std::uint64_t hash = 0xCBF29CE484222325ull;
  for (const char c : text) {
    hash ^= static_cast<unsigned char>(c);
    hash *= 0x100000001B3ull;
  }
  return hash;
}

std::uint64_t derive_seed(std::uint64_t base, std::string_view experiment,
                          std::uint64_t run) noexcept {
  return mix_seed(mix_seed(base, fnv1a(experiment)), run);
}

std::size_t sample_categorical(std::span<const double> probabilities, double u) {
  if (probabilities.empty()) throw InvalidArgument("sample_categorical: empty distribution");
  double cumulative = 0.0;
  std::size_t last_positive = probabilities.size();
  for (std::size_t k = 0; k < probabilities.size(); ++k) {
    if (probabilities[k] <= 0.0) continue;
    cumulative += probabilities[k];
    last_positive = k;
    if (u < cumulative) return k;
  }
  if (last_positive == probabilities.size())
    throw InvalidArgument("sample_categorical: no positive probability");
  return last_positive;
}

}  // namespace bbope
