#include "msamp/solvability.hpp"

#include <algorithm>
#include <cmath>

#include "msamp/error.hpp"
#include "msamp/numerics.hpp"

namespace msamp {

std::string to_string(Solvability c) {
  switch (c) {
    case Solvability::SuperSolvable:
      return "SuperSolvable";
    case Solvability::Solvable:
      return "Solvable";
    case Solvability::StrictlySubSolvable:
      return "StrictlySubSolvable";
  }
  return "Unknown";
}

Mat m_star(const Mixture& mix, const Vec& x) {
  const int r = mix.r();
  if (x.size() != r) throw InvalidArgument("m_star: x must have r entries");
  for (int s = 0; s < r; ++s)
    if (!(x[s] > 0.0)) throw InvalidArgument("m_star: x[" + std::to_string(s) + "] must be positive");
  const XiPartials p = mix.partials(x);
  Mat m = -p.hess;
  for (int s = 0; s < r; ++s) {
    const double hs = mix.h()[s];
    m(s, s) = (p.grad[s] + mix.lambda()[s] * hs * hs) / x[s] - p.hess(s, s);
  }
  return m;
}

double sup_min_value(const Mat& m, const Vec& v) {
  const Vec mv = m * v;
  double best = mv[0] / v[0];
  for (int s = 1; s < v.size(); ++s) best = std::min(best, mv[s] / v[s]);
  return best;
}

std::pair<double, Vec> min_eig_diag_signed(const Mat& m) {
  const int r = static_cast<int>(m.rows());
  if (m.cols() != r || r == 0) throw InvalidArgument("min_eig_diag_signed: matrix must be square");
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  for (int i = 0; i < r; ++i)
    for (int j = i + 1; j < r; ++j) {
      if (std::abs(m(i, j) - m(j, i)) > 1e-12 * scale)
        throw InvalidArgument("min_eig_diag_signed: matrix is not symmetric");
      if (!(m(i, j) < 0.0)) throw InvalidArgument("min_eig_diag_signed: off-diagonal entries must be negative");
    }
  if (r == 1) return {m(0, 0), Vec::Ones(1)};
  const SymmetricEigen eig = jacobi_eigen(m);
  const double lmin = eig.values[0];
  Vec v = eig.vectors.col(0);
  if (v.sum() < 0.0) v = -v;
  // Rotations resolve small Perron entries only to absolute precision. Fixing the
  // largest entry and solving the remaining rows, a nonsingular M-matrix system
  // with positive right-hand side, recovers them to relative precision.
  {
    Eigen::Index k = 0;
    v.maxCoeff(&k);
    Mat sub(r - 1, r - 1);
    Vec rhs(r - 1);
    for (int a = 0, ia = 0; a < r; ++a) {
      if (a == k) continue;
      for (int b = 0, ib = 0; b < r; ++b) {
        if (b == k) continue;
        sub(ia, ib) = m(a, b) - (a == b ? lmin : 0.0);
        ++ib;
      }
      rhs[ia] = -m(a, k);
      ++ia;
    }
    const Vec rest = sub.partialPivLu().solve(rhs);
    if (rest.allFinite() && (rest.array() > 0.0).all()) {
      for (int a = 0, ia = 0; a < r; ++a) v[a] = a == k ? 1.0 : rest[ia++];
    }
  }
  v /= v.norm();
  for (int s = 0; s < r; ++s)
    if (!(v[s] > 0.0)) throw NumericalError("min_eig_diag_signed: eigenvector is not strictly positive");
  if ((m * v - lmin * v).norm() > 1e-10 * scale) throw NumericalError("min_eig_diag_signed: eigen-residual too large");
  if (std::abs(sup_min_value(m, v) - lmin) > 1e-9 * scale)
    throw NumericalError("min_eig_diag_signed: sup-min characterization disagrees with eigensolve");
  return {lmin, v};
}

SolvabilityReport classify(const Mixture& mix, const Vec& x, double tol) {
  const int r = mix.r();
  if (x.size() != r) throw InvalidArgument("classify: x must have r entries");
  if (!(tol > 0.0)) throw InvalidArgument("classify: tol must be positive");
  SolvabilityReport rep;
  if (x.isZero(0.0)) {
    rep.m_star = Mat::Zero(r, r);
    rep.perron_vector = Vec::Ones(r) / std::sqrt(static_cast<double>(r));
    rep.zero_convention = true;
    rep.tolerance_used = tol;
    rep.classification = mix.spec().has_field() ? Solvability::SuperSolvable : Solvability::Solvable;
    return rep;
  }
  rep.m_star = m_star(mix, x);
  rep.tolerance_used = tol * std::max(1.0, rep.m_star.cwiseAbs().maxCoeff());
  bool signed_offdiag = true;
  for (int i = 0; i < r; ++i)
    for (int j = i + 1; j < r; ++j) signed_offdiag = signed_offdiag && rep.m_star(i, j) < 0.0;
  if (signed_offdiag) {
    auto [lmin, v] = min_eig_diag_signed(rep.m_star);
    rep.min_eig = lmin;
    rep.perron_vector = v;
  } else {
    const SymmetricEigen eig = jacobi_eigen(rep.m_star);
    rep.min_eig = eig.values[0];
    rep.perron_vector = eig.vectors.col(0).normalized();
  }
  if (std::abs(rep.min_eig) <= rep.tolerance_used)
    rep.classification = Solvability::Solvable;
  else if (rep.min_eig > 0)
    rep.classification = Solvability::SuperSolvable;
  else
    rep.classification = Solvability::StrictlySubSolvable;
  return rep;
}

}  // namespace msamp
