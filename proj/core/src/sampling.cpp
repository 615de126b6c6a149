#include "gcwave/sampling.hpp"

#include <cmath>
#include <stdexcept>

namespace gcwave {

namespace {

constexpr int kPrimes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37};

std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

HaltonSampler::HaltonSampler(int dims, std::uint64_t seed) {
  if (dims < 1 || dims > static_cast<int>(sizeof(kPrimes) / sizeof(int)))
    throw std::invalid_argument("HaltonSampler: unsupported dimension count");
  for (int d = 0; d < dims; ++d) {
    const int b = kPrimes[d];
    bases_.push_back(b);
    // Fisher-Yates permutation of digits 1..b-1, keyed by (seed, dim).
    // Digit 0 stays fixed so that trailing zeros contribute nothing.
    std::vector<std::uint16_t> perm(static_cast<size_t>(b));
    for (int i = 0; i < b; ++i) perm[static_cast<size_t>(i)] = static_cast<std::uint16_t>(i);
    std::uint64_t state = seed * 0x9e3779b97f4a7c15ULL + static_cast<std::uint64_t>(d) + 1;
    for (int i = b - 1; i > 1; --i) {
      const int j = 1 + static_cast<int>(splitmix64(state) % static_cast<std::uint64_t>(i));
      std::swap(perm[static_cast<size_t>(i)], perm[static_cast<size_t>(j)]);
    }
    perms_.push_back(std::move(perm));
  }
}

double HaltonSampler::sample(int dim, std::uint64_t index) const {
  const int b = bases_[static_cast<size_t>(dim)];
  const auto& perm = perms_[static_cast<size_t>(dim)];
  std::uint64_t i = index + 1;  // skip the all-zeros point
  double f = 1.0, r = 0.0;
  while (i > 0) {
    f /= b;
    r += f * perm[static_cast<size_t>(i % static_cast<std::uint64_t>(b))];
    i /= static_cast<std::uint64_t>(b);
  }
  return r;
}

Vec3 sphere_from_uniform(double u, double v) {
  const double z = 2.0 * u - 1.0;
  const double rho = std::sqrt(std::max(0.0, 1.0 - z * z));
  const double phi = 2.0 * kPi * v;
  return {rho * std::cos(phi), rho * std::sin(phi), z};
}

Vec3 ball_from_uniform(double u, double v, double w, double radius) {
  const double r = radius * std::cbrt(u);
  return r * sphere_from_uniform(v, w);
}

}  // namespace gcwave
