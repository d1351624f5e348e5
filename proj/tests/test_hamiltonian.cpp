#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <random>

#include "msamp/error.hpp"
#include "msamp/hamiltonian.hpp"
#include "msamp/rng.hpp"
#include "oracles.hpp"

using namespace msamp;

TEST(Layout, LargestRemainder) {
  EXPECT_EQ(build_layout(10, {0.5, 0.5}).sizes, (std::vector<int>{5, 5}));
  EXPECT_EQ(build_layout(10, {1.0 / 3, 2.0 / 3}).sizes, (std::vector<int>{3, 7}));
  // Equal remainders: the smaller index wins the seat.
  EXPECT_EQ(build_layout(3, {0.5, 0.5}).sizes, (std::vector<int>{2, 1}));
  EXPECT_THROW(build_layout(1, {0.5, 0.5}), InvalidArgument);
  const auto l = build_layout(7, {0.2, 0.3, 0.5});
  EXPECT_EQ(l.offsets.back(), 7);
  for (int s = 0; s < 3; ++s)
    for (int i = l.offsets[s]; i < l.offsets[s + 1]; ++i) EXPECT_EQ(l.species_of[i], s);
}

TEST(Rng, InverseNormalAndStream) {
  EXPECT_NEAR(inverse_normal_cdf(0.5), 0.0, 1e-12);
  EXPECT_NEAR(inverse_normal_cdf(0.975), 1.959963984540054, 1e-8);
  EXPECT_NEAR(inverse_normal_cdf(0.001), -3.090232306167813, 1e-8);
  // Random access equals the sequential SplitMix64 generator.
  std::uint64_t state = 99;
  const CounterStream s(99);
  for (int c = 0; c < 10; ++c) {
    state += CounterStream::kGolden;
    EXPECT_EQ(s.bits(c), mix64(state));
  }
  EXPECT_NE(derive_seed(1, {0, 1}), derive_seed(1, {1, 0}));
  EXPECT_EQ(derive_seed(1, {2, 3}), derive_seed(1, {2, 3}));
}

TEST(Hamiltonian, DeterministicSampling) {
  const Mixture mix(oracle::constant_spec({0.4, 0.6}, {0.1, 0.2}, {2, 3}, 0.5));
  const auto a = HamiltonianInstance::sample(mix, 20, 5);
  const auto b = HamiltonianInstance::sample(mix, 20, 5);
  const auto c = HamiltonianInstance::sample(mix, 20, 6);
  EXPECT_EQ(a.tensors().at(3).f64, b.tensors().at(3).f64);
  EXPECT_NE(a.tensors().at(3).f64, c.tensors().at(3).f64);
  std::mt19937_64 rng(1);
  const Vec x = oracle::sphere_point(a.layout(), mix.lambda(), rng);
  EXPECT_EQ(a.energy(x), b.energy(x));
  EXPECT_EQ(a.gradient(x), b.gradient(x));
}

TEST(Hamiltonian, RawEntryStatistics) {
  const int N = 200;
  double sum = 0, sumsq = 0, cross = 0;
  for (int i = 0; i < N; ++i)
    for (int j = 0; j < N; ++j) {
      const double a = HamiltonianInstance::raw_entry(3, N, 2, {i, j});
      const double b = HamiltonianInstance::raw_entry(4, N, 2, {i, j});
      sum += a;
      sumsq += a * a;
      cross += a * b;
    }
  const double n = static_cast<double>(N) * N;
  EXPECT_LT(std::abs(sum / n), 0.02);
  EXPECT_LT(std::abs(sumsq / n - 1.0), 0.02);
  EXPECT_LT(std::abs(cross / n), 0.02);
}

TEST(Hamiltonian, HandExampleEnergy) {
  const Mixture mix(oracle::single_species({{2, 1.0}}));
  const auto H = HamiltonianInstance::from_raw(mix, 2, {{2, {1, 2, 3, 4}}});
  EXPECT_NEAR(H.energy(Vec::Ones(2)), 10 / std::sqrt(2.0), 1e-14);
  EXPECT_EQ(H.energy(Vec::Zero(2)), 0.0);
  // Oracle gradient from finite differences of the defining sum.
  auto e = [](const Vec& s) { return (1 * s[0] * s[0] + 2 * s[0] * s[1] + 3 * s[1] * s[0] + 4 * s[1] * s[1]) / std::sqrt(2.0); };
  const Vec g = H.gradient(Vec::Ones(2));
  const Vec g_fd = oracle::fd_gradient(e, Vec::Ones(2));
  EXPECT_NEAR(g[0], g_fd[0], 1e-6);
  EXPECT_NEAR(g[1], g_fd[1], 1e-6);
  EXPECT_NEAR(g[0], 7 / std::sqrt(2.0), 1e-12);
  EXPECT_NEAR(g[1], 13 / std::sqrt(2.0), 1e-12);
}

TEST(Hamiltonian, EnergyMatchesBruteForceSum) {
  std::mt19937_64 rng(2);
  for (int D : {2, 3, 4}) {
    MixtureSpec spec = oracle::random_spec(rng, 2, D, true);
    const Mixture mix(spec);
    const int N = D == 4 ? 6 : 9;
    const auto H = HamiltonianInstance::sample(mix, N, 77);
    const Vec x = Vec::Random(N);
    EXPECT_NEAR(H.energy(x), oracle::brute_energy(mix, N, 77, x), 1e-11) << "D=" << D;
  }
}

TEST(Hamiltonian, FieldEnterslinearly) {
  std::mt19937_64 rng(3);
  MixtureSpec with = oracle::random_spec(rng, 3, 3, true);
  MixtureSpec without = with;
  without.h.assign(3, 0.0);
  const auto Hw = HamiltonianInstance::sample(Mixture(with), 15, 8);
  const auto H0 = HamiltonianInstance::sample(Mixture(without), 15, 8);
  const Vec x = Vec::Random(15);
  EXPECT_NEAR(Hw.energy(x) - H0.energy(x), Hw.field_vector().dot(x), 1e-13);
  EXPECT_EQ(Hw.gradient(Vec::Zero(15)), Hw.field_vector());
}

TEST(Hamiltonian, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(4);
  const Mixture mix(oracle::random_spec(rng, 2, 3, true));
  const int N = 50;
  const auto H = HamiltonianInstance::sample(mix, N, 9);
  const Vec x = oracle::sphere_point(H.layout(), mix.lambda(), rng);
  const Vec g = H.gradient(x);
  const Vec g_fd = oracle::fd_gradient([&](const Vec& y) { return H.energy(y); }, x, 1e-5);
  EXPECT_LT((g - g_fd).cwiseAbs().maxCoeff() / g.cwiseAbs().maxCoeff(), 1e-6);
}

TEST(Hamiltonian, TensorApplyDecomposesGradient) {
  std::mt19937_64 rng(5);
  const Mixture mix(oracle::random_spec(rng, 2, 4, true));
  const int N = 12;
  const auto H = HamiltonianInstance::sample(mix, N, 10);
  const Vec x = Vec::Random(N);
  Vec sum = Vec::Zero(N);
  for (int k = 2; k <= 4; ++k) sum += H.tensor_apply(k, x);
  EXPECT_LT((sum - (H.gradient(x) - H.field_vector())).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_EQ(H.tensor_apply(3, Vec::Zero(N)).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_THROW(H.tensor_apply(5, x), InvalidArgument);
}

TEST(Hamiltonian, DegreeHomogeneity) {
  std::mt19937_64 rng(6);
  const Mixture mix(oracle::random_spec(rng, 3, 4, false));
  const auto H = HamiltonianInstance::sample(mix, 10, 11);
  const Vec x = Vec::Random(10);
  const double t = 0.7;
  const auto e1 = H.evaluate(x).degree_energy;
  const auto et = H.evaluate(t * x).degree_energy;
  for (const auto& [k, v] : e1) EXPECT_NEAR(et.at(k), std::pow(t, k) * v, 1e-12 * (1 + std::abs(v)));
}

TEST(Hamiltonian, QuadraticHessianIsSymmetrizedCoefficientMatrix) {
  const MixtureSpec spec = oracle::make_spec(2, {0.5, 0.5}, {0, 0}, {{2, {0.7, 1.1, 1.1, 0.4}}});
  const Mixture mix(spec);
  const int N = 8;
  const auto H = HamiltonianInstance::sample(mix, N, 12);
  const Mat h1 = H.hessian(Vec::Random(N));
  const Mat h2 = H.hessian(Vec::Random(N));
  EXPECT_LT((h1 - h2).cwiseAbs().maxCoeff(), 1e-14);
  const auto& layout = H.layout();
  for (int i = 0; i < N; ++i)
    for (int j = 0; j < N; ++j) {
      const double g = spec.gammas.at(2)[layout.species_of[i] * 2 + layout.species_of[j]];
      const double expect = g * (HamiltonianInstance::raw_entry(12, N, 2, {i, j}) +
                                 HamiltonianInstance::raw_entry(12, N, 2, {j, i})) / std::sqrt(N);
      EXPECT_NEAR(h1(i, j), expect, 1e-13);
    }
}

TEST(Hamiltonian, CubicHessianMatchesFiniteDifferences) {
  std::mt19937_64 rng(7);
  const Mixture mix(oracle::random_spec(rng, 2, 3, true));
  const int N = 30;
  const auto H = HamiltonianInstance::sample(mix, N, 13);
  const Vec x = oracle::sphere_point(H.layout(), mix.lambda(), rng);
  const Mat h = H.hessian(x);
  const Mat h_fd = oracle::fd_jacobian([&](const Vec& y) { return H.gradient(y); }, x, 1e-5);
  EXPECT_LT((h - h_fd).cwiseAbs().maxCoeff(), 1e-5);
  EXPECT_EQ((h - h.transpose()).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_THROW(H.hessian(x, 20), InvalidArgument);
}

TEST(Hamiltonian, OverlapIdentities) {
  const auto layout = build_layout(10, {0.3, 0.7});
  const std::vector<double> lambda{0.3, 0.7};
  std::mt19937_64 rng(8);
  const Vec a = oracle::sphere_point(layout, lambda, rng);
  const Vec R = overlap(layout, lambda, a, a);
  EXPECT_NEAR(R[0], 1.0, 1e-14);
  EXPECT_NEAR(R[1], 1.0, 1e-14);
  Vec u = Vec::Zero(10), v = Vec::Zero(10);
  u.head(3).setOnes();
  v.tail(7).setOnes();
  EXPECT_EQ(overlap(layout, lambda, u, v).cwiseAbs().maxCoeff(), 0.0);
  const Vec b = Vec::Random(10);
  const Vec Rab = overlap(layout, lambda, a, b);
  EXPECT_NEAR(a.dot(b) / 10, lambda[0] * Rab[0] + lambda[1] * Rab[1], 1e-14);
}

TEST(Hamiltonian, CacheRoundTrip) {
  std::mt19937_64 rng(9);
  const Mixture mix(oracle::random_spec(rng, 2, 3, true));
  const auto dir = std::filesystem::temp_directory_path() / "msamp_cache_test";
  std::filesystem::remove_all(dir);
  const auto a = sample_cached(mix, 25, 14, dir.string());
  const auto b = sample_cached(mix, 25, 14, dir.string());
  EXPECT_EQ(a.tensors().at(2).f64, b.tensors().at(2).f64);
  EXPECT_EQ(a.tensors().at(3).f64, b.tensors().at(3).f64);
  const std::string file = (dir / "bad.bin").string();
  { std::FILE* f = std::fopen(file.c_str(), "wb"); std::fputs("not a cache", f); std::fclose(f); }
  EXPECT_THROW(HamiltonianInstance::load_cache(file, mix, 25, 14), InvalidArgument);
  std::filesystem::remove_all(dir);
}

TEST(Hamiltonian, Float32StorageTracksFloat64) {
  std::mt19937_64 rng(10);
  const Mixture mix(oracle::random_spec(rng, 2, 3, false));
  HamiltonianOptions o32;
  o32.precision = TensorPrecision::Float32;
  const auto a = HamiltonianInstance::sample(mix, 40, 15);
  const auto b = HamiltonianInstance::sample(mix, 40, 15, o32);
  EXPECT_TRUE(b.tensors().at(3).f64.empty());
  const Vec x = oracle::sphere_point(a.layout(), mix.lambda(), rng);
  EXPECT_NEAR(a.energy(x), b.energy(x), 1e-5 * std::abs(a.energy(x)));
}

TEST(Hamiltonian, BudgetEnforced) {
  const Mixture mix(oracle::single_species({{3, 1.0}}));
  HamiltonianOptions tiny;
  tiny.byte_budget = 1000;
  try {
    HamiltonianInstance::sample(mix, 100, 1, tiny);
    FAIL();
  } catch (const InvalidArgument& e) {
    EXPECT_NE(std::string(e.what()).find("bytes"), std::string::npos);
  }
}

TEST(Hamiltonian, CovarianceMatchesMixture) {
  const Mixture mix(oracle::constant_spec({0.5, 0.5}, {0.3, 0.3}, {2, 3}, 0.6));
  const int N = 16;
  const auto layout = build_layout(N, mix.lambda());
  std::mt19937_64 rng(12);
  const Vec s = oracle::sphere_point(layout, mix.lambda(), rng);
  const Vec t = oracle::sphere_point(layout, mix.lambda(), rng);
  const Vec mid = (s + t).normalized() * std::sqrt(N);
  const auto rep = covariance_mc_check(mix, N, {{s, s}, {s, Vec::Zero(N)}, {s, mid}}, 200);
  EXPECT_TRUE(rep.all_within());
  EXPECT_NEAR(rep.pairs[0].overlap_xi, N * mix.xi(Vec::Ones(2)), 1e-12);
  EXPECT_EQ(rep.pairs[1].empirical, 0.0);

  const Mixture sk(oracle::single_species({{2, 1.0}}));
  Vec e1 = Vec::Zero(N), e2 = Vec::Zero(N);
  e1.head(N / 2).setConstant(std::sqrt(2.0));
  e2.tail(N / 2).setConstant(std::sqrt(2.0));
  EXPECT_TRUE(covariance_mc_check(sk, N, {{e1, e2}}, 200).all_within());
}

TEST(Hamiltonian, GaussianIdentityQuadratic) {
  // Mean over seeds of R(A{u}, A{v}) approaches the degree-2 part of xi^s(R(u, v)).
  const Mixture mix(oracle::constant_spec({0.5, 0.5}, {0, 0}, {2}, 0.8));
  const int N = 400;
  const auto layout = build_layout(N, mix.lambda());
  std::mt19937_64 rng(13);
  const Vec u = oracle::sphere_point(layout, mix.lambda(), rng);
  const Vec w = oracle::sphere_point(layout, mix.lambda(), rng);
  const Vec v = (0.6 * u + 0.8 * w);
  Vec mean = Vec::Zero(2);
  const int seeds = 50;
  for (int k = 0; k < seeds; ++k) {
    const auto H = HamiltonianInstance::sample(mix, N, 1000 + k);
    mean += overlap(layout, mix.lambda(), H.tensor_apply(2, u), H.tensor_apply(2, v)) / seeds;
  }
  const Vec expect = mix.xi_species_degree(2, overlap(layout, mix.lambda(), u, v));
  EXPECT_LT((mean - expect).cwiseAbs().maxCoeff(), 4 / std::sqrt(N));
}
