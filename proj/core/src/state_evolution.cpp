#include "msamp/state_evolution.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "msamp/error.hpp"
#include "msamp/numerics.hpp"

namespace msamp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void check_phi_q1(const Mixture& mix, const Vec& phi_q1) {
  if (phi_q1.size() != mix.r()) throw InvalidArgument("Phi(q1) has the wrong number of species");
  for (int s = 0; s < mix.r(); ++s) {
    if (!(phi_q1[s] >= 0.0 && phi_q1[s] <= 1.0 + 1e-12)) {
      std::ostringstream os;
      os << "Phi(q1) entry " << s << " = " << phi_q1[s] << " outside [0, 1]";
      throw InvalidArgument(os.str());
    }
  }
}

void check_signs(const Mixture& mix, const SignPattern& delta) {
  if (delta.r() != mix.r()) throw InvalidArgument("sign pattern length does not match the number of species");
}

// Per-species ratio Phi_s(q1) / (xi^s(Phi(q1)) + h_s^2), zero when Phi_s(q1) = 0.
Vec alpha_factor(const Mixture& mix, const Vec& phi_q1) {
  check_phi_q1(mix, phi_q1);
  const Vec xs = mix.xi_species(phi_q1);
  Vec out(mix.r());
  for (int s = 0; s < mix.r(); ++s) {
    const double h = mix.h()[s];
    const double den = xs[s] + h * h;
    if (phi_q1[s] == 0.0) {
      out[s] = 0.0;
    } else if (!(den > 0.0)) {
      std::ostringstream os;
      os << "zero denominator xi^s(Phi(q1)) + h^2 for species " << s;
      throw InvalidArgument(os.str());
    } else {
      out[s] = phi_q1[s] / den;
    }
  }
  return out;
}

HermitePath interpolant(const PhiPath& path) { return HermitePath(path.grid, path.phi, path.dphi); }

void check_path(const PhiPath& path) {
  if (path.size() < 4) throw InvalidArgument("the path has fewer than four nodes (no Stage II)");
  if (path.dphi.size() != path.phi.size() || path.grid.size() != path.phi.size())
    throw InvalidArgument("inconsistent PhiPath arrays");
}

Vec f_from(const Mixture& mix, const Vec& phi, const Vec& dphi) {
  const Vec g = mix.partials(phi).dxi_s * dphi;
  Vec f(phi.size());
  for (int s = 0; s < phi.size(); ++s) f[s] = g[s] > 0.0 ? std::sqrt(dphi[s] / g[s]) : kInf;
  return f;
}

Vec a_from_f(const Mixture& mix, const Vec& phi, const Vec& f) {
  const Mat d = mix.partials(phi).dxi_s;
  const int r = mix.r();
  Vec out(r);
  for (int s = 0; s < r; ++s) {
    double v = 1.0 / f[s];
    for (int t = 0; t < r; ++t) v += f[t] * d(s, t);
    out[s] = v;
  }
  return out;
}

}  // namespace

SignPattern SignPattern::parse(const std::string& s) {
  SignPattern p;
  for (char c : s) {
    if (c == '+') {
      p.signs.push_back(1);
    } else if (c == '-') {
      p.signs.push_back(-1);
    } else {
      throw InvalidArgument("sign pattern must contain only '+' and '-': " + s);
    }
  }
  if (p.signs.empty()) throw InvalidArgument("empty sign pattern");
  return p;
}

std::vector<SignPattern> SignPattern::all(int r) {
  if (r < 1 || r > 20) throw InvalidArgument("sign patterns need 1 <= r <= 20");
  std::vector<SignPattern> out;
  for (unsigned mask = 0; mask < (1u << r); ++mask) {
    SignPattern p;
    for (int s = 0; s < r; ++s) p.signs.push_back((mask >> (r - 1 - s)) & 1u ? -1 : 1);
    out.push_back(std::move(p));
  }
  return out;
}

std::string SignPattern::str() const {
  std::string s;
  for (int v : signs) s += v > 0 ? '+' : '-';
  return s;
}

Vec SignPattern::as_vec() const {
  Vec v(signs.size());
  for (std::size_t i = 0; i < signs.size(); ++i) v[static_cast<Eigen::Index>(i)] = signs[i];
  return v;
}

Vec a_vector(const Mixture& mix, const Vec& phi_q1) { return alpha_factor(mix, phi_q1).cwiseSqrt(); }

Vec alpha_map(const Mixture& mix, const Vec& phi_q1, const Vec& x) {
  const Vec fac = alpha_factor(mix, phi_q1);
  const Vec xs = mix.xi_species(x);
  Vec out(mix.r());
  for (int s = 0; s < mix.r(); ++s) {
    const double h = mix.h()[s];
    out[s] = (xs[s] + h * h) * fac[s];
  }
  return out;
}

OverlapIteration iterate_overlaps(const Mixture& mix, const Vec& phi_q1, int k_max, double tol) {
  if (k_max < 1) throw InvalidArgument("k_max must be positive");
  OverlapIteration it;
  Vec x = Vec::Zero(mix.r());
  it.overlaps.push_back(x);
  for (int k = 0; k < k_max; ++k) {
    Vec next = alpha_map(mix, phi_q1, x);
    const double step = (next - x).lpNorm<Eigen::Infinity>();
    it.overlaps.push_back(next);
    x = std::move(next);
    if (step < tol) {
      it.converged = true;
      break;
    }
  }
  it.gap = (x - phi_q1).lpNorm<Eigen::Infinity>();
  return it;
}

const char* to_string(Stage1Init init) { return init == Stage1Init::Constant ? "constant" : "gaussian"; }

Stage1Init stage1_init_from_string(const std::string& s) {
  if (s == "constant") return Stage1Init::Constant;
  if (s == "gaussian") return Stage1Init::Gaussian;
  throw InvalidArgument("unknown Stage-I initialization '" + s + "' (expected constant or gaussian)");
}

Vec Stage1Tables::w_mean(int j) const {
  if (j == 0 && init == Stage1Init::Constant) return w0;
  return h;
}

Vec Stage1Tables::w_second(int j) const {
  if (j == 0 && init == Stage1Init::Constant) return (w0 - h).cwiseAbs2();
  return w_var;
}

Stage1Tables stage1_covariances(const Mixture& mix, const Vec& phi_q1, int k_max, Stage1Init init) {
  if (k_max < 1) throw InvalidArgument("k_max must be positive");
  Stage1Tables t;
  t.init = init;
  t.phi_q1 = phi_q1;
  t.a = a_vector(mix, phi_q1);
  t.w_var = mix.xi_species(phi_q1);
  t.m_second = phi_q1;
  const int r = mix.r();
  t.h = Eigen::Map<const Vec>(mix.h().data(), r);
  t.w0.resize(r);
  for (int s = 0; s < r; ++s) {
    const double h = mix.h()[s];
    t.w0[s] = std::sqrt(t.w_var[s] + h * h);
  }
  Vec c(r);
  for (int s = 0; s < r; ++s) {
    const double h = mix.h()[s];
    const double mean0 = init == Stage1Init::Constant ? t.w0[s] : h;
    c[s] = t.a[s] * t.a[s] * mean0 * h;
  }
  t.m_cross.push_back(c);
  t.w_cross.push_back(Vec::Zero(r));
  for (int j = 1; j < k_max; ++j) {
    t.w_cross.push_back(mix.xi_species(c));
    c = alpha_map(mix, phi_q1, c);
    t.m_cross.push_back(c);
  }
  return t;
}

double stage1_energy(const Mixture& mix, const Vec& phi_q1, const SignPattern& delta) {
  check_phi_q1(mix, phi_q1);
  check_signs(mix, delta);
  const Vec xs = mix.xi_species(phi_q1);
  double v = 0.0;
  for (int s = 0; s < mix.r(); ++s) {
    const double h = mix.h()[s];
    v += mix.lambda()[s] * delta.signs[s] * std::sqrt(phi_q1[s] * (h * h + xs[s]));
  }
  return v;
}

Vec a_signed(const Mixture& mix, const Vec& phi_q1, const SignPattern& delta) {
  check_signs(mix, delta);
  const Vec a = a_vector(mix, phi_q1);
  const Mat d = mix.partials(phi_q1).dxi_s;
  const int r = mix.r();
  Vec out(r);
  for (int s = 0; s < r; ++s) {
    if (!(a[s] > 0.0)) {
      std::ostringstream os;
      os << "A(q1; Delta) is undefined: a_" << s << " = 0";
      throw InvalidArgument(os.str());
    }
    double v = delta.signs[s] / a[s];
    for (int t = 0; t < r; ++t) v += delta.signs[t] * d(s, t) * a[t];
    out[s] = v;
  }
  return out;
}

IampSchedule iamp_coeffs(const Mixture& mix, const PhiPath& path, int ell_lower) {
  if (ell_lower < 2) throw InvalidArgument("ell_lower must be at least 2");
  check_path(path);
  IampSchedule sch;
  sch.q1 = path.q1;
  sch.delta = 1.0 / ell_lower;
  sch.ell_lower = ell_lower;
  const double d = sch.delta;
  const int extra = static_cast<int>(std::floor((1.0 - 2.0 * d - path.q1) / d + 1e-9));
  sch.ell_upper = ell_lower + std::max(0, extra);
  const HermitePath phi = interpolant(path);
  const int r = mix.r();
  for (int m = 0; m <= sch.steps() + 1; ++m) {
    const double q = std::min(1.0, path.q1 + m * d);
    sch.q.push_back(q);
    sch.phi.push_back(m == 0 ? path.phi.front() : phi(q));
    sch.xi.push_back(mix.xi_species(sch.phi.back()));
  }
  for (int m = 0; m <= sch.steps(); ++m) {
    Vec u(r);
    for (int s = 0; s < r; ++s) {
      const double dp = sch.phi[m + 1][s] - sch.phi[m][s];
      const double dx = sch.xi[m + 1][s] - sch.xi[m][s];
      if (!(dp > 0.0) || !(dx > 0.0)) {
        std::ostringstream os;
        os << "Phi is not increasing on the step grid at q = " << sch.q[m] << " for species " << s;
        throw NumericalError(os.str());
      }
      u[s] = std::sqrt(dp / dx);
    }
    sch.u.push_back(u);
  }
  sch.a = path.q1 > 0.0 ? a_vector(mix, path.phi.front()) : Vec::Zero(r);
  return sch;
}

std::vector<Vec> n_coefficients(const Vec& a, const std::vector<Vec>& mult, int m) {
  if (m < 0 || m > static_cast<int>(mult.size())) throw InvalidArgument("step index outside the multiplier table");
  std::vector<Vec> c;
  if (m == 0) {
    c.push_back(a);
    return c;
  }
  c.push_back(a - mult[0]);
  for (int j = 1; j < m; ++j) c.push_back(mult[j - 1] - mult[j]);
  c.push_back(mult[m - 1]);
  return c;
}

Vec BrownianTables::z_cov(int l, int j) const { return schedule.xi[std::min(l, j) - schedule.ell_lower]; }

Vec BrownianTables::n_cov(int l, int j) const { return schedule.phi[std::min(l, j) + 1 - schedule.ell_lower]; }

Vec BrownianTables::z_increment_var(int l) const {
  const int m = l - schedule.ell_lower;
  return schedule.xi[m + 1] - schedule.xi[m];
}

Vec BrownianTables::z_increment_cross(int /*l*/, int /*j*/) const { return Vec::Zero(schedule.a.size()); }

BrownianTables bm_covariances(const Mixture& mix, const PhiPath& path, int ell_lower) {
  return BrownianTables{iamp_coeffs(mix, path, ell_lower)};
}

double iamp_energy(const Mixture& mix, const PhiPath& path) {
  const Vec integ = path_integrals(mix, path);
  double v = 0.0;
  for (int s = 0; s < mix.r(); ++s) v += mix.lambda()[s] * integ[s];
  return v;
}

double iamp_energy_signed(const Mixture& mix, const PhiPath& path, const SignPattern& delta) {
  check_signs(mix, delta);
  const Vec integ = path_integrals(mix, path);
  double v = stage1_energy(mix, path.phi.front(), delta);
  for (int s = 0; s < mix.r(); ++s) v += mix.lambda()[s] * delta.signs[s] * integ[s];
  return v;
}

std::vector<Vec> a_of_q(const Mixture& mix, const PhiPath& path) {
  std::vector<Vec> out;
  out.reserve(path.size());
  for (int i = 0; i < path.size(); ++i) out.push_back(a_from_f(mix, path.phi[i], f_values(mix, path, i)));
  return out;
}

Vec a_at_q(const Mixture& mix, const PhiPath& path, double q) {
  check_path(path);
  if (!(q >= path.q1 && q <= 1.0)) {
    std::ostringstream os;
    os << "q = " << q << " outside [" << path.q1 << ", 1]";
    throw InvalidArgument(os.str());
  }
  const HermitePath hp = interpolant(path);
  const Vec phi = hp(q);
  return a_from_f(mix, phi, f_from(mix, phi, hp.derivative(q)));
}

std::vector<Vec> c_hat(const Mixture& mix, const PhiPath& path) {
  check_path(path);
  if (path.psi.size() != path.grid.size()) throw InvalidArgument("the path carries no Psi values");
  const int n = path.size();
  const int r = mix.r();
  std::vector<Mat> d(n);
  std::vector<std::vector<double>> integrand(r, std::vector<double>(n));
  for (int i = 0; i < n; ++i) {
    d[i] = mix.partials(path.phi[i]).dxi_s;
    for (int s = 0; s < r; ++s) {
      double v = 0.0;
      for (int t = 0; t < r; ++t) v += d[i](s, t) * path.psi[i] * path.dphi[i][t];
      integrand[s][i] = v;
    }
  }
  const GridQuadrature quad(path.grid);
  std::vector<std::vector<double>> tails(r);
  for (int s = 0; s < r; ++s) tails[s] = quad.tail_integrals(integrand[s]);
  const Vec f1 = f_values(mix, path, n - 1);
  const Vec end = d[n - 1] * f1;
  std::vector<Vec> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) {
    const Vec f = f_values(mix, path, i);
    Vec c(r);
    for (int s = 0; s < r; ++s) {
      const double v = 1.0 / f[s] + end[s] - tails[s][i];
      c[s] = std::isfinite(v) && std::isfinite(f[s]) ? v : kNaN;
    }
    out.push_back(c);
  }
  return out;
}

double c_hat_spread(const Mixture& mix, const PhiPath& path) {
  const auto c = c_hat(mix, path);
  const Vec ref = a_from_f(mix, path.phi.back(), f_values(mix, path, path.size() - 1));
  double worst = 0.0;
  for (const Vec& v : c) {
    if (!v.allFinite()) continue;
    worst = std::max(worst, (v - ref).lpNorm<Eigen::Infinity>());
  }
  return worst;
}

SEPrediction predict(const Mixture& mix, const std::optional<PhiPath>& path, int ell_lower, int k_max) {
  SEPrediction p;
  const int r = mix.r();
  const bool stage2 = path && path->size() >= 4;
  p.phi_q1 = path ? path->phi.front() : Vec::Ones(r);
  const bool stage1 = !(path && path->q1 == 0.0);
  if (stage1) {
    p.a_vec = a_vector(mix, p.phi_q1);
    const auto it = iterate_overlaps(mix, p.phi_q1, k_max);
    p.overlaps = it.overlaps;
    p.overlaps_converged = it.converged;
    p.overlap_gap = it.gap;
  } else {
    p.a_vec = Vec::Zero(r);
    p.overlaps = {Vec::Zero(r)};
    p.overlaps_converged = true;
  }
  const auto patterns = r <= 10 ? SignPattern::all(r) : std::vector<SignPattern>{SignPattern::ones(r)};
  for (const auto& sp : patterns) {
    p.stage1_energy[sp.str()] = stage1_energy(mix, p.phi_q1, sp);
    if (stage1 && (p.a_vec.array() > 0.0).all()) p.a_q1_signed[sp.str()] = a_signed(mix, p.phi_q1, sp);
  }
  p.alg_functional = p.stage1_energy[SignPattern::ones(r).str()];
  if (stage2) {
    p.schedule = iamp_coeffs(mix, *path, ell_lower);
    p.iamp_energy = iamp_energy(mix, *path);
    p.alg_functional += p.iamp_energy;
    p.grid = path->grid;
    p.a_of_q = a_of_q(mix, *path);
    if (path->psi.size() == path->grid.size()) p.c_hat = c_hat(mix, *path);
  }
  return p;
}

}  // namespace msamp
