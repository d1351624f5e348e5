#include "msamp/mixture.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "msamp/error.hpp"

namespace msamp {

namespace {

std::size_t ipow(int base, int e) {
  std::size_t out = 1;
  for (int i = 0; i < e; ++i) out *= static_cast<std::size_t>(base);
  return out;
}

// Decode a flat index into a species multi-index (first index slowest).
void decode(std::size_t flat, int r, int k, int* idx) {
  for (int a = k - 1; a >= 0; --a) {
    idx[a] = static_cast<int>(flat % r);
    flat /= r;
  }
}

std::size_t encode(const int* idx, int r, int k) {
  std::size_t flat = 0;
  for (int a = 0; a < k; ++a) flat = flat * r + idx[a];
  return flat;
}

std::string format_index(const int* idx, int k) {
  std::ostringstream os;
  os << '(';
  for (int a = 0; a < k; ++a) os << (a ? "," : "") << idx[a];
  os << ')';
  return os.str();
}

double falling(int e, int o) {
  double f = 1.0;
  for (int i = 0; i < o; ++i) f *= e - i;
  return f;
}

}  // namespace

double MixtureSpec::gamma(int k, const int* idx) const {
  auto it = gammas.find(k);
  if (it == gammas.end()) return 0.0;
  return it->second[encode(idx, r, k)];
}

bool MixtureSpec::has_field() const {
  return std::any_of(h.begin(), h.end(), [](double v) { return v != 0.0; });
}

void validate(const MixtureSpec& spec) {
  const int r = spec.r;
  if (r < 1) throw InvalidArgument("spec: r must be >= 1");
  if (static_cast<int>(spec.lambda.size()) != r) throw InvalidArgument("spec: lambda must have r entries");
  if (static_cast<int>(spec.h.size()) != r) throw InvalidArgument("spec: h must have r entries");
  double total = 0.0;
  for (int s = 0; s < r; ++s) {
    if (!(spec.lambda[s] > 0.0) || !std::isfinite(spec.lambda[s]))
      throw InvalidArgument("spec: lambda[" + std::to_string(s) + "] must be positive");
    if (!(spec.h[s] >= 0.0) || !std::isfinite(spec.h[s]))
      throw InvalidArgument("spec: h[" + std::to_string(s) + "] must be nonnegative");
    total += spec.lambda[s];
  }
  if (std::abs(total - 1.0) > 1e-9) throw InvalidArgument("spec: lambda must sum to 1");
  if (spec.gammas.empty()) throw InvalidArgument("spec: at least one coefficient tensor is required");
  for (const auto& [k, g] : spec.gammas) {
    if (k < 2) throw InvalidArgument("spec: degrees must be >= 2");
    if (g.size() != ipow(r, k))
      throw InvalidArgument("spec: Gamma^(" + std::to_string(k) + ") must have r^k entries");
    std::vector<int> idx(k), perm(k);
    for (std::size_t f = 0; f < g.size(); ++f) {
      if (!(g[f] >= 0.0) || !std::isfinite(g[f])) {
        decode(f, r, k, idx.data());
        throw InvalidArgument("spec: Gamma^(" + std::to_string(k) + ") entry " + format_index(idx.data(), k) +
                              " must be finite and nonnegative");
      }
      decode(f, r, k, idx.data());
      perm = idx;
      std::sort(perm.begin(), perm.end());
      const std::size_t canon = encode(perm.data(), r, k);
      if (g[canon] != g[f]) {
        throw InvalidArgument("spec: Gamma^(" + std::to_string(k) + ") is not symmetric: entry " +
                              format_index(idx.data(), k) + " differs from " + format_index(perm.data(), k));
      }
    }
  }
}

void Polynomial::add(double coef, const std::vector<int>& exps) {
  coefs_.push_back(coef);
  exps_.insert(exps_.end(), exps.begin(), exps.end());
}

double Polynomial::derivative(const int* orders, const Vec& x) const {
  double total = 0.0;
  for (std::size_t m = 0; m < coefs_.size(); ++m) {
    double term = coefs_[m];
    for (int s = 0; s < r_ && term != 0.0; ++s) {
      const int e = exps_[m * r_ + s];
      const int o = orders ? orders[s] : 0;
      if (o > e) {
        term = 0.0;
        break;
      }
      term *= falling(e, o);
      for (int i = 0; i < e - o; ++i) term *= x[s];
    }
    total += term;
  }
  return total;
}

double Polynomial::value(const Vec& x) const { return derivative(nullptr, x); }

Polynomial Polynomial::differentiate(int s, double scale) const {
  Polynomial out(r_);
  std::vector<int> e(r_);
  for (std::size_t m = 0; m < coefs_.size(); ++m) {
    const int es = exps_[m * r_ + s];
    if (es == 0) continue;
    for (int t = 0; t < r_; ++t) e[t] = exps_[m * r_ + t];
    e[s] -= 1;
    out.add(coefs_[m] * es * scale, e);
  }
  return out;
}

Mixture::Mixture(MixtureSpec spec) : spec_(std::move(spec)) {
  validate(spec_);
  const int r = spec_.r;
  xi_ = Polynomial(r);
  std::map<int, Polynomial> by_degree;
  for (const auto& [k, g] : spec_.gammas) {
    // Collect equal exponent vectors so each monomial appears once.
    std::map<std::vector<int>, double> collected;
    std::vector<int> idx(k);
    for (std::size_t f = 0; f < g.size(); ++f) {
      if (g[f] == 0.0) continue;
      decode(f, r, k, idx.data());
      std::vector<int> e(r, 0);
      double c = g[f] * g[f];
      for (int a = 0; a < k; ++a) {
        e[idx[a]] += 1;
        c *= spec_.lambda[idx[a]];
      }
      collected[e] += c;
    }
    Polynomial pk(r);
    for (const auto& [e, c] : collected) {
      pk.add(c, e);
      xi_.add(c, e);
    }
    by_degree.emplace(k, std::move(pk));
  }
  for (int s = 0; s < r; ++s) xi_s_.push_back(xi_.differentiate(s, 1.0 / spec_.lambda[s]));
  for (const auto& [k, pk] : by_degree) {
    auto& v = xi_s_by_degree_[k];
    for (int s = 0; s < r; ++s) v.push_back(pk.differentiate(s, 1.0 / spec_.lambda[s]));
  }
}

double Mixture::xi(const Vec& x) const { return xi_.value(x); }

double Mixture::xi_s(int s, const Vec& x) const {
  if (s < 0 || s >= r()) throw InvalidArgument("xi_s: species index out of range");
  return xi_s_[s].value(x);
}

Vec Mixture::xi_species(const Vec& x) const {
  Vec out(r());
  for (int s = 0; s < r(); ++s) out[s] = xi_s_[s].value(x);
  return out;
}

Vec Mixture::xi_species_degree(int k, const Vec& x) const {
  Vec out = Vec::Zero(r());
  auto it = xi_s_by_degree_.find(k);
  if (it == xi_s_by_degree_.end()) return out;
  for (int s = 0; s < r(); ++s) out[s] = it->second[s].value(x);
  return out;
}

XiPartials Mixture::partials(const Vec& x) const {
  const int n = r();
  XiPartials p{Vec(n), Mat(n, n), Mat(n, n)};
  std::vector<int> o(n, 0);
  for (int s = 0; s < n; ++s) {
    o[s] = 1;
    p.grad[s] = xi_.derivative(o.data(), x);
    o[s] = 0;
  }
  for (int s = 0; s < n; ++s) {
    for (int t = s; t < n; ++t) {
      o[s] += 1;
      o[t] += 1;
      p.hess(s, t) = p.hess(t, s) = xi_.derivative(o.data(), x);
      o[s] -= 1;
      o[t] -= 1;
    }
  }
  for (int s = 0; s < n; ++s) {
    for (int t = 0; t < n; ++t) {
      o[t] = 1;
      p.dxi_s(s, t) = xi_s_[s].derivative(o.data(), x);
      o[t] = 0;
    }
  }
  return p;
}

Mat Mixture::species_hessian(int s, const Vec& x) const {
  const int n = r();
  Mat out(n, n);
  std::vector<int> o(n, 0);
  for (int a = 0; a < n; ++a) {
    for (int b = a; b < n; ++b) {
      o[a] += 1;
      o[b] += 1;
      out(a, b) = out(b, a) = xi_s_[s].derivative(o.data(), x);
      o[a] -= 1;
      o[b] -= 1;
    }
  }
  return out;
}

std::vector<double> Mixture::third(const Vec& x) const {
  const int n = r();
  std::vector<double> out(static_cast<std::size_t>(n) * n * n);
  std::vector<int> o(n, 0);
  for (int a = 0; a < n; ++a)
    for (int b = a; b < n; ++b)
      for (int c = b; c < n; ++c) {
        ++o[a];
        ++o[b];
        ++o[c];
        const double v = xi_.derivative(o.data(), x);
        --o[a];
        --o[b];
        --o[c];
        int q[3] = {a, b, c};
        std::sort(q, q + 3);
        do {
          out[(static_cast<std::size_t>(q[0]) * n + q[1]) * n + q[2]] = v;
        } while (std::next_permutation(q, q + 3));
      }
  return out;
}

bool is_nondegenerate(const MixtureSpec& spec) {
  for (int k : {2, 3}) {
    auto it = spec.gammas.find(k);
    if (it == spec.gammas.end()) return false;
    for (double g : it->second)
      if (!(g > 0.0)) return false;
  }
  return true;
}

namespace {

// max(|f|, |grad f|_inf, |hess f|_inf, |third f|_inf) at one point for f = a - b.
double c3_pointwise(const Mixture& a, const Mixture& b, const Vec& x) {
  double m = std::abs(a.xi(x) - b.xi(x));
  const XiPartials pa = a.partials(x);
  const XiPartials pb = b.partials(x);
  m = std::max(m, (pa.grad - pb.grad).cwiseAbs().maxCoeff());
  m = std::max(m, (pa.hess - pb.hess).cwiseAbs().maxCoeff());
  const auto ta = a.third(x);
  const auto tb = b.third(x);
  for (std::size_t i = 0; i < ta.size(); ++i) m = std::max(m, std::abs(ta[i] - tb[i]));
  return m;
}

}  // namespace

double c3_distance(const MixtureSpec& sa, const MixtureSpec& sb) {
  if (sa.r != sb.r) throw InvalidArgument("c3_distance: species counts differ");
  const Mixture a(sa), b(sb);
  const int r = sa.r;
  const int pts = r <= 4 ? 11 : 3;
  std::vector<int> counter(r, 0);
  Vec x(r);
  double best = 0.0;
  while (true) {
    for (int s = 0; s < r; ++s) x[s] = static_cast<double>(counter[s]) / (pts - 1);
    best = std::max(best, c3_pointwise(a, b, x));
    int s = 0;
    while (s < r && ++counter[s] == pts) counter[s++] = 0;
    if (s == r) break;
  }
  return best;
}

namespace {

MixtureSpec floored(const MixtureSpec& spec, double level) {
  MixtureSpec out = spec;
  for (int k : {2, 3}) {
    auto& g = out.gammas[k];
    if (g.empty()) g.assign(ipow(spec.r, k), 0.0);
    for (double& v : g) v = std::max(v, level);
  }
  return out;
}

}  // namespace

MixtureSpec perturb_nondegenerate(const MixtureSpec& spec, double eps, double floor_min) {
  validate(spec);
  if (!(eps > 0.0)) throw InvalidArgument("perturb_nondegenerate: eps must be positive");
  if (is_nondegenerate(spec)) return spec;
  if (c3_distance(spec, floored(spec, floor_min)) > eps)
    throw InvalidArgument("perturb_nondegenerate: no floor >= " + std::to_string(floor_min) +
                          " keeps the C^3 distance within eps");
  double lo = floor_min, hi = 1.0;
  if (c3_distance(spec, floored(spec, hi)) <= eps) return floored(spec, hi);
  for (int it = 0; it < 60; ++it) {
    const double mid = std::sqrt(lo * hi);
    if (c3_distance(spec, floored(spec, mid)) <= eps)
      lo = mid;
    else
      hi = mid;
  }
  return floored(spec, lo);
}

}  // namespace msamp
