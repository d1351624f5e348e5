#pragma once

#include <vector>

#include "msamp/mixture.hpp"

namespace msamp {

struct SymmetricEigen {
  Vec values;    // ascending
  Mat vectors;   // column j pairs with values[j]
  int sweeps = 0;
};

// Cyclic Jacobi rotations with a fixed (p, q) sweep order. Intended for the
// small species-indexed matrices (r <= 16).
SymmetricEigen jacobi_eigen(const Mat& a, double tol = 1e-14, int max_sweeps = 100);

// Finite-difference weights for the m-th derivative at z over nodes x
// (Fornberg's recursion).
std::vector<double> fd_weights(double z, const std::vector<double>& x, int m);

// Integrals over a grid q_0 < ... < q_M treated as the image of the uniform
// index variable t_i = i. dq/dt is taken from five-point index differences of
// the node positions, which is exact for polynomial grid maps up to degree 4,
// and the integral is composite Simpson in t.
class GridQuadrature {
 public:
  explicit GridQuadrature(std::vector<double> grid);

  const std::vector<double>& grid() const { return grid_; }
  const std::vector<double>& jacobian() const { return jac_; }

  // Integral over the whole grid of samples f_i.
  double integrate(const std::vector<double>& f) const;
  // tail[i] = integral from q_i to q_M. For i < M - 1 node values left of i
  // are not read; the last panel reads q_{M-3} and q_{M-2}.
  std::vector<double> tail_integrals(const std::vector<double>& f) const;

 private:
  std::vector<double> grid_;
  std::vector<double> jac_;
};

// Cubic Hermite interpolation of vector-valued samples with known derivatives.
class HermitePath {
 public:
  HermitePath(std::vector<double> grid, std::vector<Vec> values, std::vector<Vec> derivs);
  Vec operator()(double q) const;
  Vec derivative(double q) const;

 private:
  std::size_t segment(double q) const;
  std::vector<double> grid_;
  std::vector<Vec> values_;
  std::vector<Vec> derivs_;
};

}  // namespace msamp
