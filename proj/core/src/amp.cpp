#include "msamp/amp.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>

#include "msamp/error.hpp"
#include "msamp/numerics.hpp"
#include "msamp/rng.hpp"

namespace msamp {

namespace {

void check_finite(const Vec& v, const char* what, int index) {
  if (!v.allFinite()) {
    std::ostringstream os;
    os << "non-finite " << what << " at iteration " << index;
    throw NumericalError(os.str());
  }
}

bool all_plus(const SignPattern& d) {
  return std::all_of(d.signs.begin(), d.signs.end(), [](int s) { return s > 0; });
}

struct Stage2Context {
  const HamiltonianInstance& H;
  IampSchedule sch;
  bool field = false;
  Vec m_prev;               // m^{l_lo - 1}, the j = l_lo Onsager partner
  std::vector<Mat> dxi_se;  // d_s' xi^s at Phi(q_{l_lo + j})
  Vec field_vec;
  AmpOptions opt;
};

struct Stage2State {
  AmpRun run;
  std::vector<Vec> mult;  // per step: u_l, or zero at injection steps
};

Stage2Context make_context(const HamiltonianInstance& H, const AmpRun& stage1, const PhiPath& phi, int ell_lower,
                           const AmpOptions& opt) {
  const Mixture& mix = H.mixture();
  Stage2Context ctx{H, iamp_coeffs(mix, phi, ell_lower), mix.spec().has_field(), Vec(), {}, H.field_vector(), opt};
  for (const Vec& p : ctx.sch.phi) ctx.dxi_se.push_back(mix.partials(p).dxi_s);
  if (ctx.field) {
    if (static_cast<int>(stage1.m.size()) <= ell_lower) {
      std::ostringstream os;
      os << "Stage II starts from m^" << ell_lower << " but Stage I has " << stage1.m.size() << " iterates";
      throw InvalidArgument(os.str());
    }
    if (stage1.phi_q1.size() != mix.r() || (stage1.phi_q1 - phi.phi.front()).lpNorm<Eigen::Infinity>() > 1e-9)
      throw InvalidArgument("Stage I ran with a different Phi(q1) than the path");
    if (!all_plus(stage1.delta))
      throw InvalidArgument("signed Stage II needs a signed Phi, which is not supported");
    const double step = norm_N(stage1.m[ell_lower] - stage1.m[ell_lower - 1]);
    if (step > opt.convergence_threshold) {
      std::ostringstream os;
      os << "Stage I has not converged: |m^" << ell_lower << " - m^" << ell_lower - 1 << "|_N = " << step
         << " > " << opt.convergence_threshold;
      throw NumericalError(os.str());
    }
    ctx.m_prev = stage1.m[ell_lower - 1];
  }
  return ctx;
}

// Removes from each species block of v its projection onto the same blocks of
// the past iterates, then rescales the block to self-overlap target_s.
Vec project_increment(const SpeciesLayout& layout, const std::vector<double>& lambda, const std::vector<Vec>& past,
                      const Vec& v, const Vec& target) {
  Vec out(v.size());
  const int cols = static_cast<int>(past.size());
  for (int s = 0; s < layout.r(); ++s) {
    const int off = layout.offsets[s];
    const int len = layout.sizes[s];
    Mat B(len, cols);
    for (int j = 0; j < cols; ++j) B.col(j) = past[j].segment(off, len);
    Vec block = v.segment(off, len);
    if (cols > 0) block -= B * B.colPivHouseholderQr().solve(block);
    const double self = block.squaredNorm() / (lambda[s] * layout.N);
    if (!(self > 0.0)) throw NumericalError("increment vanishes after projection");
    out.segment(off, len) = std::sqrt(target[s] / self) * block;
  }
  return out;
}

Stage2State start_state(const Stage2Context& ctx, const AmpRun& stage1, std::uint64_t g_seed) {
  const auto& layout = ctx.H.layout();
  Stage2State st;
  st.run = stage1;
  AmpRun& run = st.run;
  run.g_seed = g_seed;
  run.options = ctx.opt;
  run.hamiltonian_seed = ctx.H.seed();
  run.has_stage2 = true;
  run.ell_lower = ctx.sch.ell_lower;
  run.ell_upper = ctx.sch.ell_upper;
  if (!ctx.field) {
    run.delta = SignPattern::ones(ctx.H.mixture().r());
    run.phi_q1 = ctx.sch.phi.front();
    run.a = ctx.sch.a;
  }
  const Vec g = gaussian_vector(g_seed, layout.N);
  const Vec dphi = ctx.sch.phi[1] - ctx.sch.phi[0];
  std::vector<Vec> past;
  if (ctx.field) past.push_back(stage1.m[ctx.sch.ell_lower]);
  Vec n0 = ctx.opt.orthogonalize ? project_increment(layout, ctx.H.mixture().lambda(), past, g, dphi)
                                 : diamond(layout, dphi.cwiseSqrt(), g);
  Vec z0 = Vec::Zero(layout.N);
  if (ctx.field) {
    n0 += past.front();
    z0 = stage1.w[ctx.sch.ell_lower] - ctx.field_vec;
  }
  run.z = {z0};
  run.n = {n0};
  run.n_self = {overlap(layout, ctx.H.mixture().lambda(), n0, n0)};
  return st;
}

int current_ell(const Stage2State& st) { return st.run.ell_lower + static_cast<int>(st.run.n.size()) - 1; }

// One Stage-II step from n^l; with `noise` the step injects it instead of
// following the z increment.
void advance(const Stage2Context& ctx, Stage2State& st, const Vec* noise) {
  const auto& layout = ctx.H.layout();
  const Mixture& mix = ctx.H.mixture();
  AmpRun& run = st.run;
  const int m = static_cast<int>(run.n.size()) - 1;
  if (m >= ctx.sch.steps()) throw InvalidArgument("Stage II is already at its last iterate");
  const Vec& nl = run.n[m];
  const Evaluation ev = ctx.H.evaluate(nl);
  run.n_energy.push_back(ev.energy / layout.N);
  Vec z = ev.gradient - ctx.field_vec;
  const auto c = n_coefficients(ctx.sch.a, st.mult, m);
  for (int j = ctx.field ? 0 : 1; j <= m; ++j) {
    const Vec& f = j == 0 ? ctx.m_prev : run.n[j - 1];
    Vec d;
    if (ctx.opt.onsager == OnsagerMode::StateEvolution) {
      d = ctx.dxi_se[j] * c[j];
    } else {
      d = mix.partials(overlap(layout, mix.lambda(), nl, f)).dxi_s * c[j];
    }
    z -= diamond(layout, ctx.opt.onsager_scale * d, f);
  }
  check_finite(z, "z", current_ell(st) + 1);
  Vec next;
  const Vec dphi = ctx.sch.phi[m + 1] - ctx.sch.phi[m];
  if (noise) {
    next = nl + (ctx.opt.orthogonalize ? project_increment(layout, mix.lambda(), run.n, *noise, dphi)
                                       : diamond(layout, dphi.cwiseSqrt(), *noise));
    st.mult.push_back(Vec::Zero(mix.r()));
    run.injections.push_back(current_ell(st));
  } else if (ctx.opt.orthogonalize) {
    const Vec dz = z - run.z[m];
    const Vec step = project_increment(layout, mix.lambda(), run.n, dz, dphi);
    // Realized multiplier per species, so later Onsager terms use the step taken.
    const Vec self_dz = overlap(layout, mix.lambda(), dz, dz);
    const Vec self_step = overlap(layout, mix.lambda(), step, step);
    st.mult.push_back((self_step.array() / self_dz.array()).sqrt().matrix());
    next = nl + step;
  } else {
    next = nl + diamond(layout, ctx.sch.u[m], z - run.z[m]);
    st.mult.push_back(ctx.sch.u[m]);
  }
  check_finite(next, "n", current_ell(st) + 1);
  run.z.push_back(std::move(z));
  run.n_self.push_back(overlap(layout, mix.lambda(), next, next));
  run.n.push_back(std::move(next));
}

void finalize(const Stage2Context& ctx, Stage2State& st) {
  const auto& layout = ctx.H.layout();
  const Mixture& mix = ctx.H.mixture();
  AmpRun& run = st.run;
  const Vec& last = run.n.back();
  const Evaluation ev = ctx.H.evaluate(last);
  run.n_energy.push_back(ev.energy / layout.N);
  run.n_gradient = ev.gradient;
  const Vec self = overlap(layout, mix.lambda(), last, last);
  for (int s = 0; s < mix.r(); ++s) {
    if (!(self[s] > 0.0)) {
      std::ostringstream os;
      os << "cannot round: species " << s << " has self-overlap " << self[s];
      throw NumericalError(os.str());
    }
  }
  run.unrounded = last;
  run.unrounded_energy = run.n_energy.back();
  run.output = diamond(layout, self.cwiseSqrt().cwiseInverse(), last);
  run.output_energy = ctx.H.energy(run.output) / layout.N;
  run.rounding_distance = norm_N(last - run.output);
}

}  // namespace

const char* to_string(OnsagerMode m) { return m == OnsagerMode::StateEvolution ? "se" : "empirical"; }

OnsagerMode onsager_mode_from_string(const std::string& s) {
  if (s == "se" || s == "state-evolution") return OnsagerMode::StateEvolution;
  if (s == "empirical") return OnsagerMode::Empirical;
  throw InvalidArgument("unknown Onsager mode '" + s + "' (expected se or empirical)");
}

AmpRun stage1_run(const HamiltonianInstance& H, const Vec& phi_q1, const SignPattern& delta, int k_max,
                  const AmpOptions& opt) {
  const Mixture& mix = H.mixture();
  const auto& layout = H.layout();
  const int r = mix.r();
  if (phi_q1.size() != r) throw InvalidArgument("Phi(q1) has the wrong number of species");
  if (delta.r() != r) throw InvalidArgument("sign pattern length does not match the number of species");
  if (k_max < 0) throw InvalidArgument("k_max must be nonnegative");
  AmpRun run;
  run.hamiltonian_seed = H.seed();
  run.options = opt;
  run.delta = delta;
  run.phi_q1 = phi_q1;
  run.a = a_vector(mix, phi_q1);
  const Vec sa = delta.as_vec().cwiseProduct(run.a);
  const Vec xs = mix.xi_species(phi_q1);
  const Vec h = Eigen::Map<const Vec>(mix.h().data(), r);
  Vec w0;
  if (opt.init == Stage1Init::Constant) {
    w0 = diamond(layout, (xs + h.cwiseAbs2()).cwiseSqrt());
  } else {
    w0 = H.field_vector() + diamond(layout, xs.cwiseSqrt(), gaussian_vector(opt.init_seed, layout.N));
  }
  run.w.push_back(std::move(w0));
  for (int k = 0; k <= k_max; ++k) {
    Vec mk = diamond(layout, sa, run.w[k]);
    check_finite(mk, "m", k);
    run.m_self.push_back(overlap(layout, mix.lambda(), mk, mk));
    run.m_step.push_back(k == 0 ? Vec::Zero(r) : overlap(layout, mix.lambda(), mk, run.m[k - 1]));
    run.m.push_back(std::move(mk));
    const Evaluation ev = H.evaluate(run.m[k]);
    run.m_energy.push_back(ev.energy / layout.N);
    Vec b = Vec::Zero(r);
    if (k > 0) b = opt.onsager_scale * (mix.partials(run.m_step[k]).dxi_s * sa);
    run.onsager_b.push_back(b);
    if (k == k_max) {
      run.m_gradient = ev.gradient;
      break;
    }
    Vec next = ev.gradient;
    if (k > 0) next -= diamond(layout, b, run.m[k - 1]);
    check_finite(next, "w", k + 1);
    run.w.push_back(std::move(next));
  }
  run.stage1_step = k_max > 0 ? norm_N(run.m[k_max] - run.m[k_max - 1]) : 0.0;
  return run;
}

AmpRun stage2_run(const HamiltonianInstance& H, const AmpRun& stage1, const PhiPath& phi, int ell_lower,
                  std::uint64_t g_seed, const AmpOptions& opt) {
  const Stage2Context ctx = make_context(H, stage1, phi, ell_lower, opt);
  Stage2State st = start_state(ctx, stage1, g_seed);
  while (current_ell(st) < ctx.sch.ell_upper) advance(ctx, st, nullptr);
  finalize(ctx, st);
  return std::move(st.run);
}

AmpRun iamp_run(const HamiltonianInstance& H, const PhiPath& phi, int ell_lower, std::uint64_t g_seed,
                const AmpOptions& opt) {
  const Mixture& mix = H.mixture();
  AmpRun stage1;
  if (mix.spec().has_field()) stage1 = stage1_run(H, phi.phi.front(), SignPattern::ones(mix.r()), ell_lower, opt);
  return stage2_run(H, stage1, phi, ell_lower, g_seed, opt);
}

const char* to_string(InjectionRule r) { return r == InjectionRule::Matched ? "matched" : "ceil"; }

InjectionRule injection_rule_from_string(const std::string& s) {
  if (s == "matched") return InjectionRule::Matched;
  if (s == "ceil") return InjectionRule::Ceil;
  throw InvalidArgument("unknown injection rule '" + s + "' (expected matched or ceil)");
}

int TreeSpec::leaf_count() const {
  long long n = 1;
  for (int i = 0; i + 1 < levels(); ++i) {
    n *= K;
    if (n > (1LL << 30)) return -1;
  }
  return static_cast<int>(n);
}

void TreeSpec::validate(double q1, int max_leaves) const {
  if (depths.empty()) throw InvalidArgument("tree needs at least one depth");
  if (K < 1) throw InvalidArgument("tree branching K must be at least 1");
  double prev = q1;
  for (double q : depths) {
    if (!(q > prev)) {
      std::ostringstream os;
      os << "tree depths must increase strictly within (" << q1 << ", 1]; got " << q << " after " << prev;
      throw InvalidArgument(os.str());
    }
    prev = q;
  }
  if (depths.back() != 1.0) throw InvalidArgument("the last tree depth must be 1");
  const int leaves = leaf_count();
  if (leaves < 0 || leaves > max_leaves) {
    std::ostringstream os;
    os << "tree has more than " << max_leaves << " leaves";
    throw InvalidArgument(os.str());
  }
}

int injection_step(const IampSchedule& sch, double q, InjectionRule rule) {
  const int c = static_cast<int>(std::ceil((q - sch.q1) / sch.delta - 1e-9));
  const int ell = sch.ell_lower + c + (rule == InjectionRule::Matched ? -1 : 1);
  if (ell < sch.ell_lower || ell >= sch.ell_upper) {
    std::ostringstream os;
    os << "branch depth " << q << " maps to step " << ell << " outside [" << sch.ell_lower << ", "
       << sch.ell_upper << ")";
    throw InvalidArgument(os.str());
  }
  return ell;
}

int BranchResult::meet(int a, int b) const {
  const auto& pa = paths.at(a);
  const auto& pb = paths.at(b);
  int p = 0;
  while (p < static_cast<int>(pa.size()) && pa[p] == pb[p]) ++p;
  return p;
}

std::vector<Mat> BranchResult::overlaps(const HamiltonianInstance& H) const {
  const int L = size();
  const int r = H.mixture().r();
  std::vector<Mat> out(r, Mat(L, L));
  for (int x = 0; x < L; ++x)
    for (int y = x; y < L; ++y) {
      const Vec o = overlap(H.layout(), H.mixture().lambda(), leaves[x].output, leaves[y].output);
      for (int s = 0; s < r; ++s) out[s](x, y) = out[s](y, x) = o[s];
    }
  return out;
}

std::vector<Mat> BranchResult::predicted_overlaps(const PhiPath& phi) const {
  const int L = size();
  const int r = phi.r();
  const HermitePath hp(phi.grid, phi.phi, phi.dphi);
  std::vector<Vec> at;
  for (double q : depths) at.push_back(q >= 1.0 ? Vec::Ones(r) : hp(q));
  std::vector<Mat> out(r, Mat(L, L));
  for (int x = 0; x < L; ++x)
    for (int y = 0; y < L; ++y)
      for (int s = 0; s < r; ++s) out[s](x, y) = at[meet(x, y)][s];
  return out;
}

Mat BranchResult::distances() const {
  const int L = size();
  Mat d = Mat::Zero(L, L);
  for (int x = 0; x < L; ++x)
    for (int y = x + 1; y < L; ++y) d(x, y) = d(y, x) = norm_N(leaves[x].output - leaves[y].output);
  return d;
}

BranchResult branching_run(const HamiltonianInstance& H, const AmpRun& stage1, const PhiPath& phi, int ell_lower,
                           std::uint64_t g_seed, const TreeSpec& tree, const AmpOptions& opt) {
  tree.validate(phi.q1);
  const Stage2Context ctx = make_context(H, stage1, phi, ell_lower, opt);
  const int levels = tree.levels();
  BranchResult res;
  res.depths = tree.depths;
  for (int i = 0; i + 1 < levels; ++i) {
    const int ell = injection_step(ctx.sch, tree.depths[i], tree.rule);
    if (!res.injection_steps.empty() && ell <= res.injection_steps.back()) {
      std::ostringstream os;
      os << "branch depths " << tree.depths[i - 1] << " and " << tree.depths[i] << " map to steps "
         << res.injection_steps.back() << " and " << ell << "; refine the step size";
      throw InvalidArgument(os.str());
    }
    res.injection_steps.push_back(ell);
  }
  const int N = H.N();
  std::function<void(Stage2State&, int, const std::vector<int>&)> descend = [&](Stage2State& st, int level,
                                                                                  const std::vector<int>& path) {
    const int target = level + 1 < levels ? res.injection_steps[level] : ctx.sch.ell_upper;
    while (current_ell(st) < target) advance(ctx, st, nullptr);
    if (level + 1 == levels) {
      finalize(ctx, st);
      res.paths.push_back(path);
      res.leaves.push_back(std::move(st.run));
      return;
    }
    for (int c = 0; c < tree.K; ++c) {
      std::vector<int> child = path;
      child.push_back(c);
      Stage2State next = c + 1 == tree.K ? std::move(st) : st;
      const std::vector<std::uint64_t> labels(child.begin(), child.end());
      const Vec g = gaussian_vector(derive_seed(tree.seed, labels), N);
      advance(ctx, next, &g);
      descend(next, level + 1, child);
    }
  };
  Stage2State root = start_state(ctx, stage1, g_seed);
  descend(root, 0, {});
  return res;
}

double criticality_residual(const SpeciesLayout& layout, const Vec& gradient, const Vec& x, const Vec& A) {
  if (gradient.size() != layout.N || x.size() != layout.N) throw InvalidArgument("criticality: dimension mismatch");
  if (A.size() != layout.r()) throw InvalidArgument("criticality: A has the wrong number of species");
  return norm_N(gradient - diamond(layout, A, x));
}

double criticality_residual(const HamiltonianInstance& H, const Vec& x, const Vec& A) {
  if (x.size() != H.N()) throw InvalidArgument("criticality: dimension mismatch");
  return criticality_residual(H.layout(), H.gradient(x), x, A);
}

double hessian_diagnostic(const HamiltonianInstance& H, const Vec& x, const Vec& A, double eps_fraction, int cap) {
  if (!(eps_fraction > 0.0 && eps_fraction <= 1.0)) throw InvalidArgument("eps_fraction must lie in (0, 1]");
  if (A.size() != H.mixture().r()) throw InvalidArgument("hessian_diagnostic: A has the wrong number of species");
  Mat W = H.hessian(x, cap);
  const Vec shift = diamond(H.layout(), A);
  W.diagonal() -= shift;
  const Eigen::SelfAdjointEigenSolver<Mat> eig(W, Eigen::EigenvaluesOnly);
  const int N = H.N();
  const int k = std::clamp(static_cast<int>(std::ceil(eps_fraction * N - 1e-9)), 1, N);
  return eig.eigenvalues()[N - k];
}

}  // namespace msamp
