#pragma once

#include <cstdint>
#include <initializer_list>
#include <vector>

#include "msamp/mixture.hpp"

namespace msamp {

// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Acklam's rational approximation of the standard normal quantile
// (relative error below 1.2e-9 on (0,1)).
double inverse_normal_cdf(double p);

// Random access into the SplitMix64 sequence started at `seed`: draw c is
// mix64(seed + (c + 1) * golden), i.e. exactly the c-th output of a
// sequential SplitMix64 generator. Uniforms take the top 53 bits and sit at
// bin centres, so they never hit 0 or 1; normals are inverse_normal_cdf of
// the uniform.
class CounterStream {
 public:
  static constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

  explicit CounterStream(std::uint64_t seed) : seed_(seed) {}

  std::uint64_t bits(std::uint64_t c) const { return mix64(seed_ + (c + 1) * kGolden); }
  double uniform(std::uint64_t c) const { return (static_cast<double>(bits(c) >> 11) + 0.5) * 0x1p-53; }
  double normal(std::uint64_t c) const { return inverse_normal_cdf(uniform(c)); }

  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
};

// Child seed for a path of labels below a root seed.
std::uint64_t derive_seed(std::uint64_t root, std::initializer_list<std::uint64_t> path);
std::uint64_t derive_seed(std::uint64_t root, const std::vector<std::uint64_t>& path);

// n standard normals from the stream of `seed`, draws 0..n-1.
Vec gaussian_vector(std::uint64_t seed, int n);

}  // namespace msamp
