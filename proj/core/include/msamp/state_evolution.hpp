#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "msamp/mixture.hpp"
#include "msamp/pseudomax.hpp"

namespace msamp {

struct SignPattern {
  std::vector<int> signs;

  static SignPattern ones(int r) { return {std::vector<int>(r, 1)}; }
  // "+-+" style; throws InvalidArgument on other characters.
  static SignPattern parse(const std::string& s);
  // All 2^r patterns, all-plus first, in binary order with '-' as 1.
  static std::vector<SignPattern> all(int r);
  std::string str() const;
  int r() const { return static_cast<int>(signs.size()); }
  Vec as_vec() const;
};

// a_s = sqrt(Phi_s(q1) / (xi^s(Phi(q1)) + h_s^2)); a_s = 0 when Phi_s(q1) = 0.
Vec a_vector(const Mixture& mix, const Vec& phi_q1);

// alpha_s(x) = (xi^s(x) + h_s^2) Phi_s(q1) / (xi^s(Phi(q1)) + h_s^2).
Vec alpha_map(const Mixture& mix, const Vec& phi_q1, const Vec& x);

struct OverlapIteration {
  std::vector<Vec> overlaps;  // R^0 = 0, R^{k+1} = alpha(R^k)
  bool converged = false;
  double gap = 0.0;           // |R^last - Phi(q1)|_inf
};

OverlapIteration iterate_overlaps(const Mixture& mix, const Vec& phi_q1, int k_max = 500, double tol = 1e-10);

// How w^0 is drawn. Constant: w^0_i = sqrt(xi^s(Phi(q1)) + h_s^2). Gaussian:
// w^0 = h + sqrt(xi^s(Phi(q1))) g with g independent of H, under which the
// overlap tables take the closed form R^{j+1} for every j >= 0.
enum class Stage1Init { Constant, Gaussian };
const char* to_string(Stage1Init init);
Stage1Init stage1_init_from_string(const std::string& s);

// State-evolution moments of the Stage-I iterates, per species.
struct Stage1Tables {
  Vec phi_q1;
  Vec a;
  Vec h;
  Vec w0;                        // the constant start (Constant init)
  Vec w_var;                     // Var(W~^j) = xi^s(Phi(q1)), W~^j = W^j - h, j >= 1
  Vec m_second;                  // E[(M^j)^2] = Phi(q1)
  std::vector<Vec> m_cross;      // m_cross[j] = E[M^j M^k] for every k > j
  std::vector<Vec> w_cross;      // w_cross[j] = E[W~^j W~^k] for every k > j
  Stage1Init init = Stage1Init::Constant;

  Vec w_mean(int j) const;       // E[W^j]
  Vec w_second(int j) const;     // E[(W~^j)^2]
};

Stage1Tables stage1_covariances(const Mixture& mix, const Vec& phi_q1, int k_max,
                                Stage1Init init = Stage1Init::Constant);

double stage1_energy(const Mixture& mix, const Vec& phi_q1, const SignPattern& delta);

// Criticality coefficients A(q1; Delta) at the Stage-I output.
Vec a_signed(const Mixture& mix, const Vec& phi_q1, const SignPattern& delta);

// Stage-II schedule on q_l = q1 + (l - l_lower) delta, delta = 1 / l_lower.
struct IampSchedule {
  double q1 = 0.0;
  double delta = 0.0;
  int ell_lower = 0;
  int ell_upper = 0;
  std::vector<double> q;     // q[m] = q_{l_lower + m}, m = 0 .. ell_upper - ell_lower + 1
  std::vector<Vec> phi;      // Phi(q[m])
  std::vector<Vec> xi;       // xi^s(Phi(q[m]))
  std::vector<Vec> u;        // u[m] = u_{l_lower + m}, m = 0 .. ell_upper - ell_lower
  Vec a;                     // zero when h = 0

  Vec phi_at(int l) const { return phi[l - ell_lower]; }
  Vec u_at(int l) const { return u[l - ell_lower]; }

  int steps() const { return ell_upper - ell_lower; }
};

IampSchedule iamp_coeffs(const Mixture& mix, const PhiPath& path, int ell_lower);

// Coefficients of n^{l_lower + m} on z^{l_lower}, ..., z^{l_lower + m}, where
// step j moves n by mult[j] (diamond) (z^{l_lower+j+1} - z^{l_lower+j}).
// Ordinary steps use mult[j] = u_j; noise-injection steps use zero.
std::vector<Vec> n_coefficients(const Vec& a, const std::vector<Vec>& mult, int m);

// Brownian-motion covariance tables of the Stage-II limits.
struct BrownianTables {
  IampSchedule schedule;

  Vec z_cov(int l, int j) const;            // E[Z_l Z_j] = xi^s(Phi(q_{min}))
  Vec n_cov(int l, int j) const;            // E[N_l N_j] = Phi_s(q_{min + 1})
  Vec z_increment_var(int l) const;         // E[(Z_{l+1} - Z_l)^2]
  Vec z_increment_cross(int l, int j) const;  // E[(Z_{l+1} - Z_l) Z_j] = 0 for j <= l
};

BrownianTables bm_covariances(const Mixture& mix, const PhiPath& path, int ell_lower);

// sum_s lambda_s int_{q1}^1 sqrt(Phi'_s (xi^s o Phi)') dq.
double iamp_energy(const Mixture& mix, const PhiPath& path);
// stage1_energy(Delta) + sum_s lambda_s Delta_s (integral term).
double iamp_energy_signed(const Mixture& mix, const PhiPath& path, const SignPattern& delta);

// A_s(q_i) = 1 / f_s + sum_s' f_s' d_s' xi^s(Phi(q_i)) on the path grid; +inf at
// nodes where f is singular.
std::vector<Vec> a_of_q(const Mixture& mix, const PhiPath& path);
// Same quantity at an arbitrary q in [q1, 1] through the interpolated path.
Vec a_at_q(const Mixture& mix, const PhiPath& path, double q);

// C^_s(q_i) = 1 / f_s(q_i) + sum_s' [d_s' xi^s(Phi(1)) f_s'(1) - int_{q_i}^1
// d_s' xi^s(Phi) f_s' dq] with f_s' = Psi Phi'_s. Constant and equal to A(1)
// on a pseudo-maximizer. NaN at singular nodes.
std::vector<Vec> c_hat(const Mixture& mix, const PhiPath& path);
// max over non-singular nodes of |C^(q_i) - A(1)|_inf.
double c_hat_spread(const Mixture& mix, const PhiPath& path);

struct SEPrediction {
  Vec phi_q1;
  Vec a_vec;
  std::vector<Vec> overlaps;
  bool overlaps_converged = false;
  double overlap_gap = 0.0;
  std::map<std::string, double> stage1_energy;  // keyed by sign pattern
  std::map<std::string, Vec> a_q1_signed;
  std::optional<IampSchedule> schedule;
  double iamp_energy = 0.0;
  double alg_functional = 0.0;
  std::vector<double> grid;
  std::vector<Vec> a_of_q;
  std::vector<Vec> c_hat;
};

// Everything above in one record. Without a path the super-solvable
// convention Phi(q1) = 1 applies and there is no Stage II.
SEPrediction predict(const Mixture& mix, const std::optional<PhiPath>& path, int ell_lower, int k_max = 500);

}  // namespace msamp
