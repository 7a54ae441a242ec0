#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace gaplab {

// Counter-based stream: output j of stream (seed, stream_id) is a pure
// function of (seed, stream_id, j), so parallel scheduling cannot reorder
// randomness.
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t stream_id)
      : key_(mix(mix(seed) ^ 0x9e3779b97f4a7c15ull ^ mix(stream_id))) {}

  std::uint64_t next_u64() { return mix(key_ ^ (counter_++ * 0xbf58476d1ce4e5b9ull)); }

  // uniform in (0, 1); never returns 0, safe for log()
  double uniform() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u = uniform();
    const double v = uniform();
    const double r = std::sqrt(-2.0 * std::log(u));
    const double a = 2.0 * std::numbers::pi * v;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace gaplab
