#include "msamp/pseudomax.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <string>

#include "msamp/error.hpp"
#include "msamp/numerics.hpp"
#include "msamp/parallel.hpp"
#include "msamp/rng.hpp"
#include "msamp/solvability.hpp"

namespace msamp {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kInf = std::numeric_limits<double>::infinity();

double lambda_dot(const Mixture& mix, const Vec& v) {
  double s = 0.0;
  for (int i = 0; i < mix.r(); ++i) s += mix.lambda()[i] * v[i];
  return s;
}

double lambda_min(const Mat& m) {
  bool signed_off = true;
  for (int i = 0; i < m.rows(); ++i)
    for (int j = 0; j < m.cols(); ++j)
      if (i != j && !(m(i, j) < 0.0)) signed_off = false;
  if (signed_off) return min_eig_diag_signed(m).first;
  return jacobi_eigen(m).values[0];
}

std::string describe_q(double q) {
  std::ostringstream os;
  os.precision(10);
  os << "q=" << q;
  return os.str();
}

struct Rhs {
  Vec dp;
  double psi = 0.0;
};

// Phi'' and Psi at state (phi, p): the r equations f_s' = Psi p_s with
// f_s = sqrt(p_s / g_s), g = J p, together with <lambda, Phi''> = 0.
bool ode_rhs(const Mixture& mix, const Vec& phi, const Vec& p, Rhs& out, std::string& why) {
  const int r = mix.r();
  for (int s = 0; s < r; ++s)
    if (!(p[s] > 0.0)) {
      why = "Phi'_" + std::to_string(s) + " is not positive";
      return false;
    }
  const XiPartials P = mix.partials(phi);
  const Vec g = P.dxi_s * p;
  Mat A = Mat::Zero(r + 1, r + 1);
  Vec b = Vec::Zero(r + 1);
  for (int s = 0; s < r; ++s) {
    if (!(g[s] > 0.0)) {
      why = "(xi^" + std::to_string(s) + " o Phi)' vanishes";
      return false;
    }
    const double ratio = p[s] / g[s];
    const double f = std::sqrt(ratio);
    const Mat Hs = mix.species_hessian(s, phi);
    for (int t = 0; t < r; ++t) A(s, t) = (s == t ? 1.0 : 0.0) - ratio * P.dxi_s(s, t);
    A(s, r) = -2.0 * f * g[s] * p[s];
    b[s] = ratio * p.dot(Hs * p);
  }
  for (int t = 0; t < r; ++t) A(r, t) = mix.lambda()[t];
  Eigen::FullPivLU<Mat> lu(A);
  if (!lu.isInvertible()) {
    why = "singular linear system";
    return false;
  }
  const Vec x = lu.solve(b);
  if (!x.allFinite()) {
    why = "non-finite linear solve";
    return false;
  }
  out.dp = x.head(r);
  out.psi = x[r];
  return true;
}

struct Trajectory {
  bool ok = false;
  std::string failure;
  std::vector<Vec> phi, dphi;
  std::vector<double> psi;
};

// Classical RK4 over the grid for y = (Phi, Phi').
Trajectory integrate(const Mixture& mix, const std::vector<double>& grid, const Vec& phi0, const Vec& p0) {
  Trajectory tr;
  const std::size_t n = grid.size();
  tr.phi.reserve(n);
  tr.dphi.reserve(n);
  Vec phi = phi0, p = p0;
  tr.phi.push_back(phi);
  tr.dphi.push_back(p);
  Rhs k1, k2, k3, k4;
  std::string why;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double h = grid[i + 1] - grid[i];
    if (!ode_rhs(mix, phi, p, k1, why)) {
      tr.failure = why + " at " + describe_q(grid[i]);
      return tr;
    }
    const Vec p2 = p + 0.5 * h * k1.dp;
    if (!ode_rhs(mix, phi + 0.5 * h * p, p2, k2, why)) {
      tr.failure = why + " near " + describe_q(grid[i]);
      return tr;
    }
    const Vec p3 = p + 0.5 * h * k2.dp;
    if (!ode_rhs(mix, phi + 0.5 * h * p2, p3, k3, why)) {
      tr.failure = why + " near " + describe_q(grid[i]);
      return tr;
    }
    const Vec p4 = p + h * k3.dp;
    if (!ode_rhs(mix, phi + h * p3, p4, k4, why)) {
      tr.failure = why + " near " + describe_q(grid[i]);
      return tr;
    }
    phi += h / 6.0 * (p + 2.0 * p2 + 2.0 * p3 + p4);
    p += h / 6.0 * (k1.dp + 2.0 * k2.dp + 2.0 * k3.dp + k4.dp);
    if (!phi.allFinite() || !p.allFinite()) {
      tr.failure = "non-finite state at " + describe_q(grid[i + 1]);
      return tr;
    }
    tr.phi.push_back(phi);
    tr.dphi.push_back(p);
  }
  tr.psi.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    Rhs k;
    tr.psi[i] = ode_rhs(mix, tr.phi[i], tr.dphi[i], k, why) ? k.psi : kNaN;
  }
  tr.ok = true;
  return tr;
}

struct Start {
  double q1 = 0.0;
  Vec phi, p;
};

// Start state for shooting parameters theta (length r - 1; the last log
// weight is pinned to 0).
bool make_start(const Mixture& mix, const Vec& theta, Start& st, std::string& why) {
  const int r = mix.r();
  Vec d(r);
  for (int s = 0; s < r; ++s) d[s] = s < r - 1 ? std::exp(theta[s]) : 1.0;
  if (!mix.spec().has_field()) {
    st.q1 = 0.0;
    st.phi = Vec::Zero(r);
    st.p = d / lambda_dot(mix, d);
    return true;
  }
  const auto t = solvable_scale(mix, d);
  if (!t) {
    why = "no solvable point along the start direction";
    return false;
  }
  st.phi = *t * d;
  st.q1 = lambda_dot(mix, st.phi);
  const Mat m = m_star(mix, st.phi);
  Vec v;
  if (r == 1) {
    v = Vec::Ones(1);
  } else {
    v = min_eig_diag_signed(m).second;
  }
  st.p = v / lambda_dot(mix, v);
  return true;
}

struct Shot {
  bool ok = false;
  std::string failure;
  Start start;
  Trajectory tr;
  Vec F;  // Phi_s(1) - 1 for s < r - 1
};

Shot shoot(const Mixture& mix, const Vec& theta, int M) {
  Shot shot;
  if (!make_start(mix, theta, shot.start, shot.failure)) return shot;
  const auto grid = graded_grid(shot.start.q1, M);
  shot.tr = integrate(mix, grid, shot.start.phi, shot.start.p);
  if (!shot.tr.ok) {
    shot.failure = shot.tr.failure;
    return shot;
  }
  const int r = mix.r();
  shot.F = shot.tr.phi.back().head(r - 1) - Vec::Ones(r - 1);
  shot.ok = shot.F.allFinite();
  if (!shot.ok) shot.failure = "non-finite terminal value";
  return shot;
}

double sup(const Vec& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }

// Damped Newton on the terminal condition with a forward-difference Jacobian.
bool newton(const Mixture& mix, Vec theta, const PhiSolverOptions& opt, Shot& out) {
  const int n = mix.r() - 1;
  Shot cur = shoot(mix, theta, opt.grid_size);
  if (!cur.ok) return false;
  for (int it = 0; it < opt.max_newton; ++it) {
    const double err = sup(cur.F);
    if (err < opt.newton_tol) {
      out = std::move(cur);
      return true;
    }
    Mat J(n, n);
    for (int c = 0; c < n; ++c) {
      const double step = 1e-7 * std::max(1.0, std::abs(theta[c]));
      Vec tp = theta;
      tp[c] += step;
      Shot sp = shoot(mix, tp, opt.grid_size);
      double sgn = 1.0;
      if (!sp.ok) {
        tp[c] = theta[c] - step;
        sp = shoot(mix, tp, opt.grid_size);
        sgn = -1.0;
        if (!sp.ok) return false;
      }
      J.col(c) = sgn * (sp.F - cur.F) / step;
    }
    Vec delta = J.colPivHouseholderQr().solve(-cur.F);
    if (!delta.allFinite()) return false;
    const double norm = delta.cwiseAbs().maxCoeff();
    if (norm > 2.0) delta *= 2.0 / norm;
    bool accepted = false;
    for (double damp = 1.0; damp > 1e-6; damp *= 0.5) {
      const Vec trial = theta + damp * delta;
      Shot s = shoot(mix, trial, opt.grid_size);
      if (s.ok && sup(s.F) < err) {
        theta = trial;
        cur = std::move(s);
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      // Stalled at round-off level.
      if (err < 1e-9) {
        out = std::move(cur);
        return true;
      }
      return false;
    }
  }
  if (sup(cur.F) < 1e-9) {
    out = std::move(cur);
    return true;
  }
  return false;
}

// r = 2 fallback: bracket sign changes of the terminal defect on a theta
// scan and bisect each bracket.
std::vector<Shot> bisection_scan(const Mixture& mix, const PhiSolverOptions& opt) {
  std::vector<Shot> found;
  const int n = 65;
  std::vector<Shot> shots(n);
  std::vector<double> th(n);
  for (int i = 0; i < n; ++i) {
    th[i] = -8.0 + 16.0 * i / (n - 1);
    shots[i] = shoot(mix, Vec::Constant(1, th[i]), opt.grid_size);
  }
  for (int i = 0; i + 1 < n; ++i) {
    if (!shots[i].ok || !shots[i + 1].ok) continue;
    if ((shots[i].F[0] > 0) == (shots[i + 1].F[0] > 0)) continue;
    double lo = th[i], hi = th[i + 1];
    double flo = shots[i].F[0];
    Shot mid;
    bool ok = true;
    for (int it = 0; it < 80; ++it) {
      const double m = 0.5 * (lo + hi);
      mid = shoot(mix, Vec::Constant(1, m), opt.grid_size);
      if (!mid.ok) {
        ok = false;
        break;
      }
      if (std::abs(mid.F[0]) < opt.newton_tol) break;
      if ((mid.F[0] > 0) == (flo > 0)) {
        lo = m;
        flo = mid.F[0];
      } else {
        hi = m;
      }
    }
    if (ok && std::abs(mid.F[0]) < 1e-9) found.push_back(std::move(mid));
  }
  return found;
}

PhiPath to_path(const Mixture& mix, const Shot& shot, int M) {
  PhiPath path;
  path.q1 = shot.start.q1;
  path.grid = graded_grid(path.q1, M);
  path.phi = shot.tr.phi;
  path.dphi = shot.tr.dphi;
  path.psi = shot.tr.psi;
  path.residuals = verify_pseudomaximizer(mix, path);
  return path;
}

// r = 1: admissibility forces Phi(q) = q on [q1, 1].
PhiPath identity_path(const Mixture& mix, double q1, int M) {
  PhiPath path;
  path.q1 = q1;
  path.grid = q1 >= 1.0 ? std::vector<double>{1.0} : graded_grid(q1, M);
  for (double q : path.grid) {
    path.phi.push_back(Vec::Constant(1, q));
    path.dphi.push_back(Vec::Ones(1));
    Rhs k;
    std::string why;
    path.psi.push_back(ode_rhs(mix, path.phi.back(), path.dphi.back(), k, why) ? k.psi : kNaN);
  }
  path.residuals = verify_pseudomaximizer(mix, path);
  return path;
}

PhiPath degenerate_path(const Mixture& mix) {
  PhiPath path;
  path.q1 = 1.0;
  path.grid = {1.0};
  path.phi = {Vec::Ones(mix.r())};
  Vec v = mix.r() == 1 ? Vec::Ones(1) : min_eig_diag_signed(m_star(mix, Vec::Ones(mix.r()))).second;
  path.dphi = {v / lambda_dot(mix, v)};
  path.psi = {kNaN};
  path.residuals = verify_pseudomaximizer(mix, path);
  return path;
}

bool same_path(const PhiPath& a, const PhiPath& b, double tol) {
  if (std::abs(a.q1 - b.q1) > tol || a.size() != b.size()) return false;
  for (int i = 0; i < a.size(); ++i)
    if ((a.phi[i] - b.phi[i]).cwiseAbs().maxCoeff() > tol) return false;
  return true;
}

}  // namespace

bool PhiResiduals::passed(double tol) const {
  return admissibility <= tol && derivative_sum <= tol && terminal <= tol && solvability <= tol &&
         start_derivative <= tol && psi_spread <= tol && monotonicity > 0.0;
}

double PhiResiduals::worst() const {
  return std::max({admissibility, derivative_sum, terminal, solvability, start_derivative, psi_spread});
}

std::vector<double> graded_grid(double q1, int M) {
  if (M < 4) throw InvalidArgument("graded_grid: need at least 4 intervals");
  if (!(q1 >= 0.0 && q1 < 1.0)) throw InvalidArgument("graded_grid: q1 must lie in [0, 1)");
  std::vector<double> g(M + 1);
  for (int i = 0; i <= M; ++i) {
    const double t = static_cast<double>(i) / M;
    g[i] = q1 + (1.0 - q1) * t * t;
  }
  g[M] = 1.0;
  return g;
}

std::optional<double> solvable_scale(const Mixture& mix, const Vec& direction) {
  if (direction.size() != mix.r() || !(direction.minCoeff() > 0.0))
    throw InvalidArgument("solvable_scale: direction must be strictly positive with r entries");
  const double tmax = 1.0 / direction.maxCoeff();
  auto lam = [&](double t) { return lambda_min(m_star(mix, t * direction)); };
  const int scan = 200;
  double prev_t = 0.0;
  for (int j = 1; j <= scan; ++j) {
    const double u = static_cast<double>(j) / scan;
    const double t = tmax * u * u;
    const double v = lam(t);
    if (v <= 0.0) {
      if (j == 1) return std::nullopt;
      double lo = prev_t, hi = t;
      for (int it = 0; it < 200 && hi - lo > 1e-16 * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (lam(mid) > 0.0) {
          lo = mid;
        } else {
          hi = mid;
        }
      }
      return 0.5 * (lo + hi);
    }
    prev_t = t;
  }
  return std::nullopt;
}

Vec xi_path_derivative(const Mixture& mix, const PhiPath& path, int i) {
  return mix.partials(path.phi.at(i)).dxi_s * path.dphi.at(i);
}

Vec f_values(const Mixture& mix, const PhiPath& path, int i) {
  const Vec g = xi_path_derivative(mix, path, i);
  Vec f(g.size());
  for (int s = 0; s < g.size(); ++s) f[s] = g[s] > 0.0 ? std::sqrt(path.dphi[i][s] / g[s]) : kInf;
  return f;
}

double alg_supersolvable(const Mixture& mix) {
  const Vec one = Vec::Ones(mix.r());
  const auto rep = classify(mix, one);
  if (rep.classification == Solvability::StrictlySubSolvable)
    throw InvalidArgument("alg_supersolvable: 1 is strictly sub-solvable (min eigenvalue " +
                          std::to_string(rep.min_eig) + ")");
  const Vec xs = mix.xi_species(one);
  double v = 0.0;
  for (int s = 0; s < mix.r(); ++s) v += mix.lambda()[s] * std::sqrt(xs[s] + mix.h()[s] * mix.h()[s]);
  return v;
}

PhiResiduals verify_pseudomaximizer(const Mixture& mix, const PhiPath& path) {
  PhiResiduals res;
  const int n = path.size();
  const int r = mix.r();
  if (n == 0 || path.r() != r || static_cast<int>(path.dphi.size()) != n)
    throw InvalidArgument("verify_pseudomaximizer: path shape does not match the mixture");
  res.monotonicity = kInf;
  for (int i = 0; i < n; ++i) {
    res.admissibility = std::max(res.admissibility, std::abs(lambda_dot(mix, path.phi[i]) - path.grid[i]));
    res.derivative_sum = std::max(res.derivative_sum, std::abs(lambda_dot(mix, path.dphi[i]) - 1.0));
    res.monotonicity = std::min(res.monotonicity, path.dphi[i].minCoeff());
  }
  res.terminal = (path.phi.back() - Vec::Ones(r)).cwiseAbs().maxCoeff();

  const Vec& x = path.phi.front();
  if (x.cwiseAbs().maxCoeff() == 0.0) {
    res.solvability = 0.0;
  } else if (!(x.minCoeff() > 0.0)) {
    res.solvability = kInf;
  } else {
    res.solvability = std::abs(lambda_min(m_star(mix, x)));
    if (mix.spec().has_field()) {
      const Vec g = xi_path_derivative(mix, path, 0);
      const Vec xs = mix.xi_species(x);
      for (int s = 0; s < r; ++s) {
        const double target = x[s] * g[s] / (xs[s] + mix.h()[s] * mix.h()[s]);
        res.start_derivative = std::max(res.start_derivative, std::abs(path.dphi[0][s] - target));
      }
    }
  }

  if (r >= 2 && n >= 5) {
    std::vector<Vec> f(n);
    for (int i = 0; i < n; ++i) f[i] = f_values(mix, path, i);
    for (int i = 0; i < n; ++i) {
      const int lo = std::clamp(i - 2, 0, n - 5);
      std::vector<double> nodes(path.grid.begin() + lo, path.grid.begin() + lo + 5);
      bool finite = true;
      for (int j = lo; j < lo + 5; ++j) finite = finite && f[j].allFinite();
      if (!finite) {
        ++res.singular_nodes;
        continue;
      }
      const auto w = fd_weights(path.grid[i], nodes, 1);
      double mn = kInf, mx = -kInf;
      for (int s = 0; s < r; ++s) {
        double df = 0.0;
        for (int j = 0; j < 5; ++j) df += w[j] * f[lo + j][s];
        const double psi = df / path.dphi[i][s];
        mn = std::min(mn, psi);
        mx = std::max(mx, psi);
      }
      res.psi_spread = std::max(res.psi_spread, mx - mn);
    }
  }
  return res;
}

std::vector<PhiPath> solve_phi(const Mixture& mix, const PhiSolverOptions& opt) {
  const int r = mix.r();
  const Vec one = Vec::Ones(r);
  const auto top = classify(mix, one);
  if (top.classification == Solvability::SuperSolvable)
    throw InvalidArgument("solve_phi: 1 is super-solvable, so ALG has the closed form and no path exists");
  if (r >= 2 && !is_nondegenerate(mix.spec()))
    throw InvalidArgument("solve_phi: mixture is degenerate; perturb it first");
  if (top.classification == Solvability::Solvable && mix.spec().has_field()) return {degenerate_path(mix)};

  if (r == 1) {
    double q1 = 0.0;
    if (mix.spec().has_field()) {
      const auto t = solvable_scale(mix, one);
      if (!t) throw NumericalError("solve_phi: no solvable point on [0, 1]");
      q1 = *t;
    }
    return {identity_path(mix, q1, opt.grid_size)};
  }

  const int n = r - 1;
  const int starts = std::max(1, opt.starts);
  std::vector<Vec> thetas(starts, Vec::Zero(n));
  for (int k = 1; k < starts; ++k)
    for (int c = 0; c < n; ++c)
      thetas[k][c] = 1.5 * CounterStream(derive_seed(opt.seed, {static_cast<std::uint64_t>(k)})).normal(c);

  std::vector<Shot> shots(starts);
  std::vector<char> converged(starts, 0);
  parallel_for(starts, opt.threads, [&](int k) { converged[k] = newton(mix, thetas[k], opt, shots[k]); });
  std::vector<PhiPath> candidates;
  for (int k = 0; k < starts; ++k)
    if (converged[k]) candidates.push_back(to_path(mix, shots[k], opt.grid_size));
  if (candidates.empty() && r == 2)
    for (const Shot& s : bisection_scan(mix, opt)) candidates.push_back(to_path(mix, s, opt.grid_size));

  std::sort(candidates.begin(), candidates.end(), [](const PhiPath& a, const PhiPath& b) {
    if (a.q1 != b.q1) return a.q1 < b.q1;
    const Vec& x = a.phi.front();
    const Vec& y = b.phi.front();
    return std::lexicographical_compare(x.data(), x.data() + x.size(), y.data(), y.data() + y.size());
  });
  std::vector<PhiPath> out;
  double best_worst = kInf;
  for (auto& c : candidates) {
    best_worst = std::min(best_worst, c.residuals.worst());
    if (!c.residuals.passed(opt.residual_tol)) continue;
    bool dup = false;
    for (const auto& o : out) dup = dup || same_path(o, c, opt.dedupe_distance);
    if (!dup) out.push_back(std::move(c));
  }
  if (out.empty()) {
    std::ostringstream os;
    os << "solve_phi: no shooting start converged to a verified path (" << candidates.size()
       << " converged, best residual " << best_worst << ")";
    throw NumericalError(os.str());
  }
  return out;
}

Vec path_integrals(const Mixture& mix, const PhiPath& path) {
  const int r = mix.r();
  const int n = path.size();
  Vec total = Vec::Zero(r);
  if (n < 2) return total;
  GridQuadrature quad(path.grid);
  std::vector<std::vector<double>> integrand(r, std::vector<double>(n));
  for (int i = 0; i < n; ++i) {
    const Vec g = xi_path_derivative(mix, path, i);
    for (int s = 0; s < r; ++s) {
      double v = path.dphi[i][s] * g[s];
      if (v < 0.0) {
        if (v < -1e-12) {
          std::ostringstream os;
          os << "negative radicand " << v << " at " << describe_q(path.grid[i]) << " for species " << s;
          throw NumericalError(os.str());
        }
        v = 0.0;
      }
      integrand[s][i] = std::sqrt(v);
    }
  }
  for (int s = 0; s < r; ++s) total[s] = quad.integrate(integrand[s]);
  return total;
}

double alg_functional(const Mixture& mix, const PhiPath& path) {
  const Vec& x = path.phi.front();
  const Vec xs = mix.xi_species(x);
  const Vec integ = path_integrals(mix, path);
  double v = 0.0;
  for (int s = 0; s < mix.r(); ++s) {
    const double h = mix.h()[s];
    v += mix.lambda()[s] * (std::sqrt(x[s] * (xs[s] + h * h)) + integ[s]);
  }
  return v;
}

const char* to_string(AlgRegime r) { return r == AlgRegime::SuperSolvable ? "SuperSolvable" : "SubSolvable"; }

AlgResult alg_value(const Mixture& mix, const PhiSolverOptions& opt) {
  AlgResult res;
  const auto top = classify(mix, Vec::Ones(mix.r()));
  if (top.classification != Solvability::StrictlySubSolvable) {
    res.value = alg_supersolvable(mix);
    res.regime = AlgRegime::SuperSolvable;
    return res;
  }
  res.regime = AlgRegime::SubSolvable;
  res.value = -kInf;
  for (auto& p : solve_phi(mix, opt)) {
    const double v = alg_functional(mix, p);
    if (v > res.value) {
      res.value = v;
      res.phi = p;
    }
    res.candidates.emplace_back(std::move(p), v);
  }
  return res;
}

}  // namespace msamp
