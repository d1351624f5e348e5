#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "msamp/hamiltonian.hpp"
#include "msamp/pseudomax.hpp"
#include "msamp/state_evolution.hpp"

namespace msamp {

// Stage-II Onsager coefficients from the path (state evolution) or from
// measured overlaps of the iterates (empirical).
enum class OnsagerMode { StateEvolution, Empirical };
const char* to_string(OnsagerMode m);
// Accepts "se", "state-evolution" and "empirical".
OnsagerMode onsager_mode_from_string(const std::string& s);

struct AmpOptions {
  Stage1Init init = Stage1Init::Constant;
  std::uint64_t init_seed = 0;          // Gaussian start only
  OnsagerMode onsager = OnsagerMode::StateEvolution;
  double convergence_threshold = 0.02;  // on |m^{l_lo} - m^{l_lo - 1}|_N before Stage II
  double onsager_scale = 1.0;           // multiplies every Onsager term; 1 is the algorithm
  // Stage-II increments projected off the span of past iterates per species and
  // rescaled to the scheduled Phi increment.
  bool orthogonalize = false;
};

struct AmpRun {
  std::uint64_t hamiltonian_seed = 0;
  std::uint64_t g_seed = 0;
  AmpOptions options;
  SignPattern delta;
  Vec phi_q1;
  Vec a;

  // Stage I, k = 0 .. K.
  std::vector<Vec> w;
  std::vector<Vec> m;
  std::vector<Vec> m_self;       // R(m^k, m^k)
  std::vector<Vec> m_step;       // R(m^k, m^{k-1}); entry 0 is zero
  std::vector<Vec> onsager_b;    // b_k; entry 0 is zero (no m^{-1})
  std::vector<double> m_energy;  // H_N(m^k) / N
  Vec m_gradient;                // grad H_N(m^K)
  double stage1_step = 0.0;      // |m^K - m^{K-1}|_N, zero when K = 0

  // Stage II, index l - l_lo for l = l_lo .. l_hi.
  bool has_stage2 = false;
  int ell_lower = 0;
  int ell_upper = 0;
  std::vector<Vec> z;
  std::vector<Vec> n;
  std::vector<Vec> n_self;       // R(n^l, n^l)
  std::vector<double> n_energy;  // H_N(n^l) / N
  std::vector<int> injections;   // l at which noise replaced the ordinary step
  Vec n_gradient;                // grad H_N(n^{l_hi})

  // Final output: the last iterate before and after rounding onto S_N.
  Vec unrounded;
  Vec output;
  double unrounded_energy = 0.0;
  double output_energy = 0.0;
  double rounding_distance = 0.0;  // |n^{l_hi} - output|_N
};

// Stage-I root finding: m^k = (Delta a) diamond w^k and
// w^{k+1} = grad H_N(m^k) - b_k diamond m^{k-1} with empirical overlaps in b_k.
AmpRun stage1_run(const HamiltonianInstance& H, const Vec& phi_q1, const SignPattern& delta, int k_max,
                  const AmpOptions& opt = {});

// Stage-II incremental AMP from m^{l_lo} of `stage1` (which needs at least
// l_lo Stage-I iterations), followed by rounding. With h = 0 the Stage-I run
// is ignored and may be empty.
AmpRun stage2_run(const HamiltonianInstance& H, const AmpRun& stage1, const PhiPath& phi, int ell_lower,
                  std::uint64_t g_seed, const AmpOptions& opt = {});

// Both stages with l_lo Stage-I iterations (none when h = 0).
AmpRun iamp_run(const HamiltonianInstance& H, const PhiPath& phi, int ell_lower, std::uint64_t g_seed,
                const AmpOptions& opt = {});

// Step at which the branch point q_i injects its Gaussian.
enum class InjectionRule {
  Matched,  // l_lo + ceil((q_i - q1) / delta) - 1: shared self-overlap Phi(q1 + ceil(.) delta)
  Ceil,     // l_lo + ceil((q_i - q1) / delta) + 1
};
const char* to_string(InjectionRule r);
InjectionRule injection_rule_from_string(const std::string& s);

struct TreeSpec {
  std::vector<double> depths;  // q_1 < ... < q_m = 1
  int K = 2;
  // Edge Gaussian of the node reached by child indices (c_1, ..., c_i) is
  // gaussian_vector(derive_seed(seed, {c_1, ..., c_i}), N).
  std::uint64_t seed = 0;
  InjectionRule rule = InjectionRule::Matched;

  int levels() const { return static_cast<int>(depths.size()); }
  int leaf_count() const;
  // Throws InvalidArgument unless q1 < q_1 < ... < q_m = 1, K >= 1 and at most max_leaves leaves.
  void validate(double q1, int max_leaves = 4096) const;
};

int injection_step(const IampSchedule& sch, double q, InjectionRule rule);

struct BranchResult {
  std::vector<std::vector<int>> paths;  // child indices from the root, one per leaf
  std::vector<AmpRun> leaves;
  std::vector<double> depths;           // q_1 .. q_m
  std::vector<int> injection_steps;

  int size() const { return static_cast<int>(leaves.size()); }
  // Depth index of the deepest common ancestor, m - 1 for a leaf with itself.
  int meet(int a, int b) const;
  // Overlap R_s of the rounded outputs, L x L per species.
  std::vector<Mat> overlaps(const HamiltonianInstance& H) const;
  // Phi_s(q_{a ^ b}) with q_m = 1, L x L per species.
  std::vector<Mat> predicted_overlaps(const PhiPath& phi) const;
  // |output_a - output_b|_N.
  Mat distances() const;
};

// Branching IAMP: every leaf follows Stage II except at the branch steps,
// where the edge Gaussian of its ancestor at that depth is injected. Shared
// prefixes are computed once, depth first.
BranchResult branching_run(const HamiltonianInstance& H, const AmpRun& stage1, const PhiPath& phi, int ell_lower,
                           std::uint64_t g_seed, const TreeSpec& tree, const AmpOptions& opt = {});

// |grad H_N(x) - A diamond x|_N.
double criticality_residual(const HamiltonianInstance& H, const Vec& x, const Vec& A);
double criticality_residual(const SpeciesLayout& layout, const Vec& gradient, const Vec& x, const Vec& A);

// ceil(eps N)-th largest eigenvalue of Hess Htilde(x) - diag(A_{s(i)}).
double hessian_diagnostic(const HamiltonianInstance& H, const Vec& x, const Vec& A, double eps_fraction,
                          int cap = 600);

}  // namespace msamp
