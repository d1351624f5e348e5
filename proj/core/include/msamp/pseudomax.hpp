#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "msamp/mixture.hpp"

namespace msamp {

struct PhiResiduals {
  double admissibility = 0.0;     // max |<lambda, Phi(q)> - q|, including the terminal point
  double derivative_sum = 0.0;    // max |<lambda, Phi'(q)> - 1|
  double monotonicity = 0.0;      // min over q and s of Phi'_s(q); must be positive
  double solvability = 0.0;       // |lambda_min(M*(Phi(q1)))|, zero under the Phi(q1) = 0 convention
  double start_derivative = 0.0;  // max_s |Phi'_s(q1) - Phi_s(q1) (xi^s o Phi)'(q1) / (xi^s + h_s^2)|; zero when h = 0
  double terminal = 0.0;          // |Phi(1) - 1|_inf
  double psi_spread = 0.0;        // max over q of the cross-species spread of Psi by finite differences
  int singular_nodes = 0;         // nodes skipped in psi_spread because (xi^s o Phi)' vanishes

  // All four defining conditions below tol and Phi' strictly positive.
  bool passed(double tol) const;
  double worst() const;
};

// Discretized pseudo-maximizer on a grid q1 = q_0 < ... < q_M = 1. A path with
// q1 = 1 has the single node {1}.
struct PhiPath {
  double q1 = 0.0;
  std::vector<double> grid;
  std::vector<Vec> phi;
  std::vector<Vec> dphi;
  std::vector<double> psi;  // Psi at each node from the ODE; NaN where singular
  PhiResiduals residuals;

  int size() const { return static_cast<int>(grid.size()); }
  int r() const { return phi.empty() ? 0 : static_cast<int>(phi.front().size()); }
};

// f_s(q_i) = sqrt(Phi'_s / (xi^s o Phi)') at node i; +inf where the
// denominator vanishes.
Vec f_values(const Mixture& mix, const PhiPath& path, int i);
// (xi^s o Phi)'(q_i).
Vec xi_path_derivative(const Mixture& mix, const PhiPath& path, int i);

struct PhiSolverOptions {
  int grid_size = 400;
  int starts = 8;
  int max_newton = 60;
  double newton_tol = 1e-12;      // on |Phi(1) - 1|_inf
  double residual_tol = 1e-6;     // every returned path passes verification at this level
  double dedupe_distance = 1e-4;  // sup-distance on Phi below which two solutions coincide
  std::uint64_t seed = 1;         // drives the extra shooting starts
  int threads = 1;
};

// Points q1 + (1 - q1)(i/M)^2, denser near q1.
std::vector<double> graded_grid(double q1, int M);

// Smallest t in (0, 1/max d] with lambda_min(M*(t d)) = 0, approached from the
// solvable side; empty when no sign change is bracketed.
std::optional<double> solvable_scale(const Mixture& mix, const Vec& direction);

double alg_supersolvable(const Mixture& mix);

// Pseudo-maximizers found by shooting, sorted by (q1, Phi(q1)) and
// deduplicated. Throws NumericalError when no start converges.
std::vector<PhiPath> solve_phi(const Mixture& mix, const PhiSolverOptions& opt = {});

// Recomputes every residual of `path` from its phi/dphi samples.
PhiResiduals verify_pseudomaximizer(const Mixture& mix, const PhiPath& path);

// Pointwise radicands Phi'_s (xi^s o Phi)' integrated over the grid.
Vec path_integrals(const Mixture& mix, const PhiPath& path);
double alg_functional(const Mixture& mix, const PhiPath& path);

enum class AlgRegime { SuperSolvable, SubSolvable };
const char* to_string(AlgRegime r);

struct AlgResult {
  double value = 0.0;
  AlgRegime regime = AlgRegime::SuperSolvable;
  std::optional<PhiPath> phi;
  std::vector<std::pair<PhiPath, double>> candidates;
};

AlgResult alg_value(const Mixture& mix, const PhiSolverOptions& opt = {});

}  // namespace msamp
