#pragma once

#include <cmath>
#include <cstdint>

namespace lddm {

namespace detail {
// SplitMix64 finalizer. Full-period mixing of a 64-bit word.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}
}  // namespace detail

// Counter-based generator: every output is a hash of (key, counter), so a
// stream can be split into independent substreams without sharing state.
// Bit-stable across runs and platforms.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed, std::uint64_t stream = 0)
      : key_(detail::mix64(detail::mix64(seed) ^ (stream * 0xd1342543de82ef95ULL + 1))),
        ctr_(0) {}

  // Independent stream derived from this one; does not advance the parent.
  RngStream substream(std::uint64_t idx) const {
    RngStream s = *this;
    s.key_ = detail::mix64(key_ ^ detail::mix64(idx + 0x632be59bd9b4e019ULL));
    s.ctr_ = 0;
    return s;
  }

  // Fresh independent stream; advances this one. Used to hand out one stream
  // per step/sample, whose position-indexed substreams can then be consumed
  // in parallel.
  RngStream fork() { return RngStream(next_u64(), 0x243f6a8885a308d3ULL); }

  std::uint64_t next_u64() { return detail::mix64(key_ ^ detail::mix64(ctr_++)); }

  // Uniform on [0,1), 53-bit resolution.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform on (0,1]; safe as a log() argument.
  double uniform_pos() { return 1.0 - uniform(); }

  // Standard normal via Box-Muller. Two uniforms per draw, no cached state.
  double normal() {
    double u1 = uniform_pos();
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

  // Integer in [0, n).
  std::uint64_t below(std::uint64_t n) { return next_u64() % n; }

 private:
  std::uint64_t key_;
  std::uint64_t ctr_;
};

}  // namespace lddm
