#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace msamp {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Plain model data. Coefficient tensors are dense over species indices,
// row-major with the first index slowest: entry (s1,...,sk) lives at
// ((s1*r + s2)*r + ...)*r + sk.
struct MixtureSpec {
  int r = 0;
  std::vector<double> lambda;
  std::vector<double> h;
  std::map<int, std::vector<double>> gammas;

  int max_degree() const { return gammas.empty() ? 0 : gammas.rbegin()->first; }
  double gamma(int k, const int* idx) const;
  bool has_field() const;
};

// Throws InvalidArgument with a diagnostic on the first violated invariant.
void validate(const MixtureSpec& spec);

// FNV-1a over the canonical JSON dump; used to key tensor caches.
std::uint64_t spec_hash(const MixtureSpec& spec);

// Sparse polynomial in r variables, one exponent vector per monomial.
class Polynomial {
 public:
  explicit Polynomial(int r = 0) : r_(r) {}

  void add(double coef, const std::vector<int>& exps);
  int vars() const { return r_; }
  std::size_t size() const { return coefs_.size(); }
  double coef(std::size_t m) const { return coefs_[m]; }
  int exp(std::size_t m, int s) const { return exps_[m * r_ + s]; }

  // Mixed partial derivative; orders[s] is the number of d/dx_s factors.
  double derivative(const int* orders, const Vec& x) const;
  double value(const Vec& x) const;
  // Polynomial obtained by one d/dx_s, times scale.
  Polynomial differentiate(int s, double scale = 1.0) const;

 private:
  int r_;
  std::vector<double> coefs_;
  std::vector<int> exps_;
};

struct XiPartials {
  Vec grad;     // d_s xi
  Mat hess;     // d_s d_s' xi
  Mat dxi_s;    // (s, s') -> d_s' xi^s, from the xi^s polynomials directly
};

// Compiled mixture function. Immutable after construction.
class Mixture {
 public:
  explicit Mixture(MixtureSpec spec);

  const MixtureSpec& spec() const { return spec_; }
  int r() const { return spec_.r; }
  const std::vector<double>& lambda() const { return spec_.lambda; }
  const std::vector<double>& h() const { return spec_.h; }

  double xi(const Vec& x) const;
  // xi^s = lambda_s^{-1} d_s xi.
  double xi_s(int s, const Vec& x) const;
  Vec xi_species(const Vec& x) const;
  // Degree-k part of xi^s, i.e. the contribution of Gamma^(k).
  Vec xi_species_degree(int k, const Vec& x) const;

  XiPartials partials(const Vec& x) const;
  // Hessian of xi^s: (t, s') -> d_t d_s' xi^s.
  Mat species_hessian(int s, const Vec& x) const;
  // Third derivatives of xi, entry (a*r + b)*r + c.
  std::vector<double> third(const Vec& x) const;

  const Polynomial& polynomial() const { return xi_; }

 private:
  MixtureSpec spec_;
  Polynomial xi_;
  std::vector<Polynomial> xi_s_;
  std::map<int, std::vector<Polynomial>> xi_s_by_degree_;
};

bool is_nondegenerate(const MixtureSpec& spec);

// sup over [0,1]^r of max(|f|, |grad f|_inf, |hess f|_inf, |third f|_inf)
// for f = xi_a - xi_b, maximized over a uniform grid with 11 points per axis
// (r <= 4). When the difference has nonnegative coefficients every term is
// maximized at the all-ones corner, which the grid contains.
double c3_distance(const MixtureSpec& a, const MixtureSpec& b);

// Raises zero/small entries of Gamma^(2), Gamma^(3) to a common floor so the
// result is non-degenerate and within C^3 distance eps of the input.
MixtureSpec perturb_nondegenerate(const MixtureSpec& spec, double eps, double floor_min = 1e-8);

}  // namespace msamp
