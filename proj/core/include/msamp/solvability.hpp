#pragma once

#include <string>
#include <utility>

#include "msamp/mixture.hpp"

namespace msamp {

enum class Solvability { SuperSolvable, Solvable, StrictlySubSolvable };

std::string to_string(Solvability c);

struct SolvabilityReport {
  Mat m_star;
  double min_eig = 0.0;
  Vec perron_vector;  // unit length, first entry positive
  Solvability classification = Solvability::Solvable;
  double tolerance_used = 0.0;
  bool zero_convention = false;  // x = 0 classified by convention, m_star unused
};

// M*(x) for x strictly positive in every coordinate.
Mat m_star(const Mixture& mix, const Vec& x);

// min_s (M v)_s / v_s for v > 0.
double sup_min_value(const Mat& m, const Vec& v);

// Smallest eigenvalue and its positive eigenvector for a symmetric matrix
// with strictly negative off-diagonal entries, cross-checked against the
// sup-min characterization at the returned vector.
std::pair<double, Vec> min_eig_diag_signed(const Mat& m);

SolvabilityReport classify(const Mixture& mix, const Vec& x, double tol = 1e-8);

}  // namespace msamp
