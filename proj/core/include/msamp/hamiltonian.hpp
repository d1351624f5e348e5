#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "msamp/mixture.hpp"

namespace msamp {

struct SpeciesLayout {
  int N = 0;
  std::vector<int> sizes;
  std::vector<int> offsets;     // block starts, offsets[r] == N
  std::vector<int> species_of;  // s(i)

  int r() const { return static_cast<int>(sizes.size()); }
};

// Largest-remainder rounding of lambda_s N, ties to the smaller species index,
// every block non-empty.
SpeciesLayout build_layout(int N, const std::vector<double>& lambda);

// R_s(a, b) = <a_s, b_s> / (lambda_s N).
Vec overlap(const SpeciesLayout& layout, const std::vector<double>& lambda, const Vec& a, const Vec& b);
// |u|_N = sqrt(sum_i u_i^2 / N).
double norm_N(const Vec& u);
// Lift a species vector to coordinates: (v diamond 1)_i = v_{s(i)}.
Vec diamond(const SpeciesLayout& layout, const Vec& v);
// Per-coordinate product with a species vector: (v diamond x)_i = v_{s(i)} x_i.
Vec diamond(const SpeciesLayout& layout, const Vec& v, const Vec& x);

enum class TensorPrecision { Auto, Float32, Float64 };

struct HamiltonianOptions {
  std::size_t byte_budget = std::size_t{3} << 30;
  // Auto stores float64 when it fits the budget and float32 otherwise.
  TensorPrecision precision = TensorPrecision::Auto;
};

// Symmetric fold of one disorder tensor, stored over sorted multi-indices
// i1 <= ... <= ik in lexicographic order. Entry I holds the sum of the raw
// Gaussian entries over all distinct permutations of I.
struct PackedTensor {
  int k = 0;
  int N = 0;
  std::vector<float> f32;
  std::vector<double> f64;

  std::size_t size() const { return f64.empty() ? f32.size() : f64.size(); }
  double at(std::size_t p) const { return f64.empty() ? f32[p] : f64[p]; }
  std::size_t bytes() const { return f64.size() * sizeof(double) + f32.size() * sizeof(float); }
};

// Number of sorted multi-indices of length k over N symbols.
std::size_t packed_count(int N, int k);

struct Evaluation {
  double energy = 0.0;
  Vec gradient;
  std::map<int, double> degree_energy;  // per-degree part of the tensor energy
};

class HamiltonianInstance {
 public:
  // Raw G^(k) entries are draws from the CounterStream of `seed`, consumed in
  // lexicographic index order with k ascending from 2 to D.
  static HamiltonianInstance sample(const Mixture& mix, int N, std::uint64_t seed, const HamiltonianOptions& opt = {});
  // Explicit dense raw tensors (row-major, N^k entries per degree).
  static HamiltonianInstance from_raw(const Mixture& mix, int N, const std::map<int, std::vector<double>>& raw,
                                      TensorPrecision precision = TensorPrecision::Float64);
  static std::size_t required_bytes(const MixtureSpec& spec, int N, TensorPrecision precision);

  // The raw Gaussian G^(k)_{idx} of `sample`, regenerated from the stream.
  static double raw_entry(std::uint64_t seed, int N, int k, const std::vector<int>& idx);

  const Mixture& mixture() const { return mix_; }
  const SpeciesLayout& layout() const { return layout_; }
  int N() const { return layout_.N; }
  std::uint64_t seed() const { return seed_; }
  const std::map<int, PackedTensor>& tensors() const { return tensors_; }
  std::size_t bytes() const;

  double energy(const Vec& sigma) const;
  Vec gradient(const Vec& sigma) const;
  // Energy, gradient and per-degree energies from one contraction pass.
  Evaluation evaluate(const Vec& sigma) const;
  // Gradient of the degree-k part, A^(k){u}.
  Vec tensor_apply(int k, const Vec& u) const;
  // Hessian of the tensor part (the field contributes nothing).
  Mat hessian(const Vec& sigma, int cap = 600) const;
  Vec field_vector() const;

  void save_cache(const std::string& path) const;
  static HamiltonianInstance load_cache(const std::string& path, const Mixture& mix, int N, std::uint64_t seed,
                                        const HamiltonianOptions& opt = {});

 private:
  HamiltonianInstance(const Mixture& mix, SpeciesLayout layout, std::uint64_t seed);
  void check_dim(const Vec& v, const char* who) const;
  // Unscaled degree-k gradient accumulated into g; returns nothing.
  void accumulate_gradient(const PackedTensor& t, const Vec& sigma, Vec& g) const;

  Mixture mix_;
  SpeciesLayout layout_;
  std::uint64_t seed_ = 0;
  std::map<int, PackedTensor> tensors_;
};

// Lazily samples (or loads from cache_dir when non-empty) an instance and
// writes the cache when the file would stay below max_cache_bytes.
HamiltonianInstance sample_cached(const Mixture& mix, int N, std::uint64_t seed, const std::string& cache_dir,
                                  std::size_t max_cache_bytes = std::size_t{1} << 30,
                                  const HamiltonianOptions& opt = {});

struct CovariancePair {
  double overlap_xi = 0.0;   // N xi(R(sigma, rho))
  double empirical = 0.0;    // mean of Htilde(sigma) Htilde(rho)
  double std_error = 0.0;
  bool flagged = false;      // deviation above 4 standard errors
};

struct CovarianceReport {
  std::vector<CovariancePair> pairs;
  int n_seeds = 0;
  bool all_within() const;
};

CovarianceReport covariance_mc_check(const Mixture& mix, int N, const std::vector<std::pair<Vec, Vec>>& points,
                                     int n_seeds, std::uint64_t base_seed = 1);

}  // namespace msamp
