#include <gtest/gtest.h>

#include <cmath>

#include "msamp/amp.hpp"
#include "msamp/error.hpp"
#include "msamp/rng.hpp"
#include "oracles.hpp"

using namespace msamp;

namespace {

Vec v1(double x) { return Vec::Constant(1, x); }

PhiPath sk_path() {
  const auto paths = solve_phi(Mixture(oracle::single_species({{2, 1.0}})));
  EXPECT_FALSE(paths.empty());
  return paths.front();
}

PhiPath p3_path() {
  const auto res = alg_value(Mixture(oracle::single_species({{3, 1.0}})));
  EXPECT_TRUE(res.phi.has_value());
  return *res.phi;
}

double max_abs_diff(const Vec& a, const Vec& b) { return (a - b).lpNorm<Eigen::Infinity>(); }

}  // namespace

TEST(Amp, ModeStrings) {
  EXPECT_EQ(onsager_mode_from_string("se"), OnsagerMode::StateEvolution);
  EXPECT_EQ(onsager_mode_from_string("state-evolution"), OnsagerMode::StateEvolution);
  EXPECT_EQ(onsager_mode_from_string("empirical"), OnsagerMode::Empirical);
  EXPECT_STREQ(to_string(OnsagerMode::Empirical), "empirical");
  EXPECT_THROW(onsager_mode_from_string("exact"), InvalidArgument);
  EXPECT_EQ(injection_rule_from_string("ceil"), InjectionRule::Ceil);
  EXPECT_THROW(injection_rule_from_string("floor"), InvalidArgument);
}

TEST(Amp, Stage1SignFlipAtStart) {
  const Mixture mix(oracle::make_spec(2, {0.4, 0.6}, {0.8, 1.1}, {{2, {0.7, 0.9, 0.9, 0.6}}}));
  const auto H = HamiltonianInstance::sample(mix, 200, 3);
  const Vec phi = Vec::Ones(2);
  const AmpRun plus = stage1_run(H, phi, SignPattern::parse("++"), 0);
  const AmpRun minus = stage1_run(H, phi, SignPattern::parse("--"), 0);
  const AmpRun mixed = stage1_run(H, phi, SignPattern::parse("+-"), 0);
  EXPECT_LT(max_abs_diff(plus.m[0], -minus.m[0]), 1e-14);
  const auto& L = H.layout();
  EXPECT_LT(max_abs_diff(plus.m[0].head(L.sizes[0]), mixed.m[0].head(L.sizes[0])), 1e-14);
  EXPECT_LT(max_abs_diff(plus.m[0].tail(L.sizes[1]), -mixed.m[0].tail(L.sizes[1])), 1e-14);
  EXPECT_EQ(plus.onsager_b[0], Vec::Zero(2));
}

TEST(Amp, Stage1IsDeterministic) {
  const Mixture mix(oracle::single_species({{2, 1.0}}, 1.0));
  const auto H = HamiltonianInstance::sample(mix, 150, 11);
  const AmpRun a = stage1_run(H, v1(1.0), SignPattern::ones(1), 8);
  const AmpRun b = stage1_run(H, v1(1.0), SignPattern::ones(1), 8);
  ASSERT_EQ(a.m.size(), 9u);
  for (std::size_t k = 0; k < a.m.size(); ++k) EXPECT_EQ(a.m[k], b.m[k]);
  EXPECT_EQ(a.m_energy, b.m_energy);
}

TEST(Amp, Stage1PureTwoSpinWithField) {
  // xi = x^2, h = 3: Phi(q1) = 1, energy sqrt(h^2 + xi'(1)) = sqrt 11, A = 1/a + xi'' a with a = 1/sqrt 11.
  const Mixture mix(oracle::single_species({{2, 1.0}}, 3.0));
  const Vec A = a_signed(mix, v1(1.0), SignPattern::ones(1));
  EXPECT_NEAR(A[0], std::sqrt(11.0) + 2.0 / std::sqrt(11.0), 1e-12);
  double self = 0.0;
  double energy = 0.0;
  const int seeds = 6;
  for (int seed = 1; seed <= seeds; ++seed) {
    const auto H = HamiltonianInstance::sample(mix, 1500, seed);
    const AmpRun run = stage1_run(H, v1(1.0), SignPattern::ones(1), 25);
    self += run.m_self.back()[0] / seeds;
    energy += run.m_energy.back() / seeds;
    EXPECT_NEAR(run.m_step.back()[0], run.m_self.back()[0], 1e-6);
    EXPECT_LT(criticality_residual(H.layout(), run.m_gradient, run.m.back(), A), 1e-3);
    EXPECT_LT(run.stage1_step, 1e-3);
  }
  EXPECT_NEAR(self, 1.0, 0.08);
  EXPECT_NEAR(energy, std::sqrt(11.0), 0.15);
}

TEST(Amp, Stage1OverlapsFollowTables) {
  const Mixture mix(oracle::make_spec(2, {0.4, 0.6}, {1.5, 2.0}, {{2, {0.7, 0.9, 0.9, 0.6}}}));
  const Vec phi = Vec::Ones(2);
  const Stage1Tables tab = stage1_covariances(mix, phi, 6);
  std::vector<Vec> self(7, Vec::Zero(2));
  std::vector<Vec> step(7, Vec::Zero(2));
  const int seeds = 4;
  for (int seed = 1; seed <= seeds; ++seed) {
    const auto H = HamiltonianInstance::sample(mix, 1500, seed);
    const AmpRun run = stage1_run(H, phi, SignPattern::ones(2), 6);
    for (int k = 0; k <= 6; ++k) {
      self[k] += run.m_self[k] / seeds;
      step[k] += run.m_step[k] / seeds;
    }
  }
  for (int k = 0; k <= 6; ++k) EXPECT_LT(max_abs_diff(self[k], tab.m_second), 0.08) << k;
  for (int k = 1; k <= 6; ++k) EXPECT_LT(max_abs_diff(step[k], tab.m_cross[k - 1]), 0.08) << k;
}

TEST(Amp, ZeroOnsagerBreaksStage1) {
  const Mixture mix(oracle::single_species({{2, 1.0}}, 1.0));
  const auto H = HamiltonianInstance::sample(mix, 800, 6);
  AmpOptions opt;
  opt.onsager_scale = 0.0;
  const AmpRun run = stage1_run(H, v1(1.0), SignPattern::ones(1), 10, opt);
  EXPECT_GT(std::abs(run.m_self.back()[0] - 1.0), 0.2);
}

TEST(Amp, GaussianStartMatchesTables) {
  const Mixture mix(oracle::single_species({{2, 1.0}}, 2.0));
  const auto H = HamiltonianInstance::sample(mix, 1500, 8);
  AmpOptions opt;
  opt.init = Stage1Init::Gaussian;
  opt.init_seed = 99;
  const AmpRun run = stage1_run(H, v1(1.0), SignPattern::ones(1), 4, opt);
  const Stage1Tables tab = stage1_covariances(mix, v1(1.0), 4, Stage1Init::Gaussian);
  for (int k = 1; k <= 4; ++k) EXPECT_NEAR(run.m_step[k][0], tab.m_cross[k - 1][0], 0.08);
}

TEST(Amp, Stage2RejectsBadContext) {
  const Mixture mix(oracle::make_spec(2, {0.4, 0.6}, {0.8, 1.1}, {{2, {0.7, 0.9, 0.9, 0.6}}}));
  const auto H = HamiltonianInstance::sample(mix, 100, 1);
  PhiPath path;
  path.q1 = 1.0;
  path.grid = {1.0};
  path.phi = {Vec::Ones(2)};
  path.dphi = {Vec::Ones(2)};
  const AmpRun short_run = stage1_run(H, Vec::Ones(2), SignPattern::ones(2), 3);
  EXPECT_THROW(stage2_run(H, short_run, path, 8, 1), InvalidArgument);
}

TEST(Amp, Stage2GatesOnConvergence) {
  const Mixture mix(oracle::single_species({{2, 1.0}, {3, 0.5}}, 0.6));
  const auto res = alg_value(mix);
  ASSERT_TRUE(res.phi.has_value());
  const auto H = HamiltonianInstance::sample(mix, 120, 4);
  AmpOptions opt;
  opt.convergence_threshold = 1e-12;
  const AmpRun s1 = stage1_run(H, res.phi->phi.front(), SignPattern::ones(1), 4, opt);
  EXPECT_THROW(stage2_run(H, s1, *res.phi, 4, 1, opt), NumericalError);
  const Vec other = res.phi->phi.front() * 0.9;
  const AmpRun s2 = stage1_run(H, other, SignPattern::ones(1), 4);
  EXPECT_THROW(stage2_run(H, s2, *res.phi, 4, 1), InvalidArgument);
  const AmpRun s3 = stage1_run(H, res.phi->phi.front(), SignPattern::parse("-"), 4);
  EXPECT_THROW(stage2_run(H, s3, *res.phi, 4, 1), InvalidArgument);
}

TEST(Amp, SkIampFirstStepsFollowSchedule) {
  const PhiPath path = sk_path();
  const Mixture mix(oracle::single_species({{2, 1.0}}));
  const auto H = HamiltonianInstance::sample(mix, 2000, 3);
  const AmpRun run = iamp_run(H, path, 8, 17);
  const IampSchedule sch = iamp_coeffs(mix, path, 8);
  ASSERT_EQ(static_cast<int>(run.n.size()), sch.steps() + 1);
  for (int m = 0; m <= 3; ++m) EXPECT_NEAR(run.n_self[m][0], sch.phi[m + 1][0], 0.05) << m;
  const BrownianTables bm = bm_covariances(mix, path, 8);
  for (int m = 1; m <= 3; ++m) {
    const Vec dz = run.z[m] - run.z[m - 1];
    EXPECT_NEAR(overlap(H.layout(), mix.lambda(), dz, dz)[0], bm.z_increment_var(8 + m - 1)[0], 0.05) << m;
  }
}

TEST(Amp, OrthogonalizedIncrementsHitSchedule) {
  const PhiPath path = p3_path();
  const Mixture mix(oracle::single_species({{3, 1.0}}));
  const auto H = HamiltonianInstance::sample(mix, 200, 9);
  AmpOptions opt;
  opt.orthogonalize = true;
  const AmpRun run = iamp_run(H, path, 10, 21, opt);
  const IampSchedule sch = iamp_coeffs(mix, path, 10);
  const auto& L = H.layout();
  for (std::size_t m = 0; m < run.n.size(); ++m) EXPECT_NEAR(run.n_self[m][0], sch.phi[m + 1][0], 1e-10);
  for (std::size_t m = 1; m < run.n.size(); ++m) {
    const Vec inc = run.n[m] - run.n[m - 1];
    for (std::size_t j = 0; j < m; ++j) EXPECT_NEAR(overlap(L, mix.lambda(), inc, run.n[j])[0], 0.0, 1e-10);
  }
  EXPECT_NEAR(overlap(L, mix.lambda(), run.output, run.output)[0], 1.0, 1e-12);
  EXPECT_LE(run.rounding_distance, 3.0 * std::sqrt(sch.delta));
  EXPECT_NEAR(run.output_energy, H.energy(run.output) / H.N(), 1e-12);
}

TEST(Amp, OnsagerModesAgree) {
  const PhiPath path = p3_path();
  const Mixture mix(oracle::single_species({{3, 1.0}}));
  const auto H = HamiltonianInstance::sample(mix, 300, 12);
  AmpOptions se;
  AmpOptions emp;
  emp.onsager = OnsagerMode::Empirical;
  const AmpRun a = iamp_run(H, path, 4, 5, se);
  const AmpRun b = iamp_run(H, path, 4, 5, emp);
  EXPECT_NEAR(a.output_energy, b.output_energy, 0.05);
}

TEST(Amp, CriticalityAtOriginIsFieldNorm) {
  const Mixture mix(oracle::make_spec(2, {0.3, 0.7}, {0.5, 1.5}, {{2, {0.4, 0.2, 0.2, 0.9}}}));
  const auto H = HamiltonianInstance::sample(mix, 90, 2);
  const double expect = std::sqrt(0.3 * 0.25 + 0.7 * 2.25);
  EXPECT_NEAR(criticality_residual(H, Vec::Zero(H.N()), Vec::Ones(2)), expect, 1e-12);
  EXPECT_THROW(criticality_residual(H, Vec::Zero(3), Vec::Ones(2)), InvalidArgument);
}

TEST(Amp, HessianDiagnostic) {
  const Mixture mix(oracle::single_species({{2, 1.0}}));
  const auto H = HamiltonianInstance::sample(mix, 400, 4);
  const Vec x = gaussian_vector(77, 400);
  const Vec A = v1(2.0 * std::sqrt(2.0));
  const double top = hessian_diagnostic(H, x, A, 1.0 / 400);
  EXPECT_GE(top, -0.5);
  EXPECT_LE(top, 0.2);
  Mat W = H.hessian(x, 600);
  const Eigen::SelfAdjointEigenSolver<Mat> eig(W, Eigen::EigenvaluesOnly);
  EXPECT_NEAR(hessian_diagnostic(H, x, A, 1.0), eig.eigenvalues()[0] - A[0], 1e-9);
  EXPECT_THROW(hessian_diagnostic(H, x, A, 0.0), InvalidArgument);
}

TEST(Amp, TreeValidation) {
  TreeSpec t;
  t.depths = {0.3, 0.7, 1.0};
  t.K = 3;
  EXPECT_EQ(t.leaf_count(), 9);
  EXPECT_NO_THROW(t.validate(0.0));
  EXPECT_THROW(t.validate(0.5), InvalidArgument);
  t.depths = {0.3, 0.9};
  EXPECT_THROW(t.validate(0.0), InvalidArgument);
  t.depths = {0.5, 0.4, 1.0};
  EXPECT_THROW(t.validate(0.0), InvalidArgument);
  t.depths = {0.2, 0.4, 0.6, 0.8, 1.0};
  t.K = 10;
  EXPECT_THROW(t.validate(0.0), InvalidArgument);
  t.K = 0;
  EXPECT_THROW(t.validate(0.0), InvalidArgument);
}

TEST(Amp, InjectionStepRules) {
  const Mixture mix(oracle::single_species({{2, 1.0}}));
  const IampSchedule sch = iamp_coeffs(mix, sk_path(), 10);
  EXPECT_EQ(injection_step(sch, 0.3, InjectionRule::Matched), 12);
  EXPECT_EQ(injection_step(sch, 0.3, InjectionRule::Ceil), 14);
  EXPECT_EQ(injection_step(sch, 0.25, InjectionRule::Matched), 12);
  EXPECT_THROW(injection_step(sch, 0.99, InjectionRule::Ceil), InvalidArgument);
}

TEST(Amp, BranchingSharesPrefixes) {
  const PhiPath path = sk_path();
  const Mixture mix(oracle::single_species({{2, 1.0}}));
  const auto H = HamiltonianInstance::sample(mix, 1500, 7);
  TreeSpec t;
  t.depths = {0.3, 0.7, 1.0};
  t.K = 2;
  t.seed = 5;
  AmpOptions opt;
  opt.orthogonalize = true;
  const BranchResult br = branching_run(H, AmpRun{}, path, 40, 3, t, opt);
  ASSERT_EQ(br.size(), 4);
  EXPECT_EQ(br.paths[0], (std::vector<int>{0, 0}));
  EXPECT_EQ(br.paths[3], (std::vector<int>{1, 1}));
  EXPECT_EQ(br.meet(0, 1), 1);
  EXPECT_EQ(br.meet(0, 2), 0);
  EXPECT_EQ(br.meet(2, 2), 2);
  const int first = br.injection_steps[0] - 40;
  for (int l = 0; l <= first; ++l) EXPECT_EQ(br.leaves[0].n[l], br.leaves[3].n[l]);
  EXPECT_NE(br.leaves[0].n[first + 1], br.leaves[3].n[first + 1]);
  const Mat want = br.predicted_overlaps(path)[0];
  EXPECT_NEAR(want(0, 0), 1.0, 1e-12);
  EXPECT_NEAR(want(0, 1), 0.7, 1e-9);
  EXPECT_NEAR(want(1, 3), 0.3, 1e-9);
  const Mat got = br.overlaps(H)[0];
  for (int l = 0; l < 4; ++l) {
    EXPECT_NEAR(got(l, l), 1.0, 1e-12);
    EXPECT_EQ(br.leaves[l].injections, br.injection_steps);
  }
  const Mat d = br.distances();
  EXPECT_NEAR(d(0, 1), std::sqrt(2.0 - 2.0 * got(0, 1)), 1e-9);

  const BranchResult again = branching_run(H, AmpRun{}, path, 40, 3, t, opt);
  EXPECT_EQ(again.leaves[2].output, br.leaves[2].output);
}

