#pragma once

#include <cstdint>
#include <vector>

#include "gcwave/math.hpp"

namespace gcwave {

/// Digit-permutation scrambled Halton sequence keyed by an integer seed.
/// Deterministic and portable: (seed, dim, index) fully determines the value.
/// Index 0 (the all-zeros point) is skipped internally.
class HaltonSampler {
 public:
  HaltonSampler(int dims, std::uint64_t seed);

  /// Sample in (0, 1).
  double sample(int dim, std::uint64_t index) const;

  int dims() const { return static_cast<int>(perms_.size()); }

 private:
  std::vector<int> bases_;
  std::vector<std::vector<std::uint16_t>> perms_;
};

/// Area-preserving map of two uniforms to the unit sphere.
Vec3 sphere_from_uniform(double u, double v);

/// Volume-preserving map of three uniforms to the ball of given radius.
Vec3 ball_from_uniform(double u, double v, double w, double radius);

}  // namespace gcwave
