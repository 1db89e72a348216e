#pragma once

#include <cstdint>
#include <string_view>
#include <utility>
#include <vector>

#include "medaudit/strings.hpp"

namespace medaudit {

// Deterministic, splittable random stream. A stream's state is derived from a
// root seed plus a sequence of mix() labels, so independent parts of a run can
// draw without sharing a cursor: the same (seed, labels) always yields the
// same sequence on every platform.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : state_(seed ^ kFnvOffset) {}

  RandomStream& mix(std::string_view label) {
    state_ = fnv1a64(label, state_ ^ kFnvPrime);
    return *this;
  }

  RandomStream& mix(std::uint64_t v) {
    char buf[8];
    for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    state_ = fnv1a64(std::string_view(buf, 8), state_ ^ kFnvPrime);
    return *this;
  }

  // splitmix64 step
  std::uint64_t next() {
    state_ += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform draw in [0, n) via 128-bit multiply-shift.
  std::uint64_t bounded(std::uint64_t n) {
    if (n == 0) return 0;
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next()) * n) >> 64);
  }

  // Inclusive range.
  int draw_in(int lo, int hi) {
    if (hi <= lo) return lo;
    return lo + static_cast<int>(bounded(static_cast<std::uint64_t>(hi - lo + 1)));
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(bounded(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::uint64_t state_;
};

}  // namespace medaudit
