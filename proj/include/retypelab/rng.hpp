#pragma once

#include <cstdint>
#include <utility>
#include <vector>

namespace retypelab {

/// Deterministic splitmix64 generator. The whole pipeline derives every
/// random decision from a user-supplied 64-bit seed; `derive()` spawns
/// decorrelated child streams so per-function / per-member work can run
/// in parallel without sharing generator state.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ull;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  /// Uniform double in [0, 1).
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, n). n == 0 yields 0.
  std::uint64_t next_below(std::uint64_t n) { return n == 0 ? 0 : next_u64() % n; }

  /// Uniform integer in [lo, hi] inclusive.
  std::int64_t next_int(std::int64_t lo, std::int64_t hi) {
    return lo + static_cast<std::int64_t>(next_below(static_cast<std::uint64_t>(hi - lo + 1)));
  }

  bool next_bool(double p_true) { return next_double() < p_true; }

  /// Child stream keyed by `stream`; independent of later draws from *this.
  Rng derive(std::uint64_t stream) const {
    std::uint64_t s = state_ ^ ((stream + 0x632be59bd9b4e019ull) * 0x9e3779b97f4a7c15ull);
    Rng child(s);
    child.next_u64();
    return child;
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(next_below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::uint64_t state_;
};

}  // namespace retypelab
