#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace partgait {

// Deterministic random stream (xoshiro256** seeded via splitmix64).
// All distribution draws are implemented here so results are identical
// across compilers and platforms; the full state is serializable, which
// lets checkpoints resume a run bit-exactly.
class rng_stream {
 public:
  rng_stream() : rng_stream(0x9e3779b97f4a7c15ull) {}

  explicit rng_stream(uint64_t seed) {
    uint64_t x = seed;
    for (auto& word : s_) word = splitmix64(x);
  }

  uint64_t next_u64() {
    const uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // [0, 1)
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + uniform() * (hi - lo); }

  // [0, n), unbiased
  int64_t uniform_int(int64_t n) {
    const uint64_t bound = static_cast<uint64_t>(n);
    const uint64_t threshold = (0 - bound) % bound;
    for (;;) {
      const uint64_t r = next_u64();
      if (r >= threshold) return static_cast<int64_t>(r % bound);
    }
  }

  bool bernoulli(double p) { return uniform() < p; }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    const double u2 = uniform();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  // Independent child stream; deterministic in (parent state, tag).
  rng_stream fork(uint64_t tag) {
    rng_stream child;
    uint64_t x = next_u64() ^ (0xbf58476d1ce4e5b9ull * (tag + 1));
    for (auto& word : child.s_) word = splitmix64(x);
    child.has_spare_ = false;
    return child;
  }

  // State round-trip for checkpoints: 5 words (4 xoshiro + spare flag/value).
  std::array<uint64_t, 6> save_state() const {
    std::array<uint64_t, 6> out{};
    for (int i = 0; i < 4; ++i) out[i] = s_[i];
    out[4] = has_spare_ ? 1 : 0;
    uint64_t bits;
    static_assert(sizeof(bits) == sizeof(spare_));
    __builtin_memcpy(&bits, &spare_, sizeof(bits));
    out[5] = bits;
    return out;
  }

  void load_state(const std::array<uint64_t, 6>& st) {
    for (int i = 0; i < 4; ++i) s_[i] = st[i];
    has_spare_ = st[4] != 0;
    __builtin_memcpy(&spare_, &st[5], sizeof(spare_));
  }

 private:
  static uint64_t splitmix64(uint64_t& x) {
    x += 0x9e3779b97f4a7c15ull;
    uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  static uint64_t rotl(uint64_t v, int k) { return (v << k) | (v >> (64 - k)); }

  std::array<uint64_t, 4> s_{};
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace partgait
