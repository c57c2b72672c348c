#pragma once

#include <cmath>
#include <cstdint>

namespace asyndiff {

// Counter-based generator: output depends only on (key, counter), so a
// stream can be split per sample and replayed deterministically regardless
// of how pixel work is scheduled.
class CounterRng {
 public:
  explicit CounterRng(uint64_t key, uint64_t stream = 0)
      : key_(mix(key ^ 0x9e3779b97f4a7c15ull, stream)), counter_(0) {}

  uint64_t next_u64() { return mix(key_, counter_++); }

  // Uniform in (0, 1).
  double next_uniform() {
    // 53-bit mantissa; +0.5 keeps the value strictly inside (0,1).
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  double next_normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = next_uniform();
    double u2 = next_uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double theta = 2.0 * M_PI * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
  }

  // Uniform integer in [0, n).
  uint64_t next_below(uint64_t n) { return next_u64() % n; }

  uint64_t counter() const { return counter_; }

 private:
  static uint64_t mix(uint64_t k, uint64_t x) {
    // splitmix64 finalizer over key-offset counter
    uint64_t z = x + k;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  uint64_t key_;
  uint64_t counter_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace asyndiff
