#pragma once

#include <cstdint>
#include <random>

namespace flatlab {

/// Seeded generator with platform-independent draws. std::mt19937_64 is
/// fully specified by the standard; the distributions are not, so uniform
/// reals are built from the raw 53 high bits instead.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Integer in [lo, hi].
  int integer(int lo, int hi) {
    const auto span = static_cast<std::uint64_t>(hi - lo + 1);
    return lo + static_cast<int>(engine_() % span);
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace flatlab
