#include "msamp/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "msamp/error.hpp"

namespace msamp {

SymmetricEigen jacobi_eigen(const Mat& input, double tol, int max_sweeps) {
  const int n = static_cast<int>(input.rows());
  if (input.cols() != n) throw InvalidArgument("jacobi_eigen: matrix must be square");
  Mat a = input;
  Mat v = Mat::Identity(n, n);
  const double scale = std::max(a.cwiseAbs().maxCoeff(), 1e-300);
  int sweep = 0;
  for (; sweep < max_sweeps; ++sweep) {
    double off = 0.0;
    for (int p = 0; p < n; ++p)
      for (int q = p + 1; q < n; ++q) off = std::max(off, std::abs(a(p, q)));
    if (off <= tol * scale) break;
    for (int p = 0; p < n - 1; ++p) {
      for (int q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (int k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (int k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        a(p, q) = a(q, p) = 0.0;
        for (int k = 0; k < n; ++k) {
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }
  if (sweep == max_sweeps) throw NumericalError("jacobi_eigen: no convergence");

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int i, int j) { return a(i, i) < a(j, j); });
  SymmetricEigen out{Vec(n), Mat(n, n), sweep};
  for (int j = 0; j < n; ++j) {
    out.values[j] = a(order[j], order[j]);
    Vec col = v.col(order[j]);
    int lead = 0;
    while (lead < n - 1 && std::abs(col[lead]) < 1e-14) ++lead;
    if (col[lead] < 0) col = -col;
    out.vectors.col(j) = col;
  }
  return out;
}

std::vector<double> fd_weights(double z, const std::vector<double>& x, int m) {
  const int n = static_cast<int>(x.size()) - 1;
  std::vector<std::vector<double>> c(n + 1, std::vector<double>(m + 1, 0.0));
  double c1 = 1.0, c4 = x[0] - z;
  c[0][0] = 1.0;
  for (int i = 1; i <= n; ++i) {
    const int mn = std::min(i, m);
    double c2 = 1.0;
    const double c5 = c4;
    c4 = x[i] - z;
    for (int j = 0; j < i; ++j) {
      const double c3 = x[i] - x[j];
      c2 *= c3;
      if (j == i - 1) {
        for (int k = mn; k >= 1; --k) c[i][k] = c1 * (k * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
        c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
      }
      for (int k = mn; k >= 1; --k) c[j][k] = (c4 * c[j][k] - k * c[j][k - 1]) / c3;
      c[j][0] = c4 * c[j][0] / c3;
    }
    c1 = c2;
  }
  std::vector<double> w(n + 1);
  for (int i = 0; i <= n; ++i) w[i] = c[i][m];
  return w;
}

GridQuadrature::GridQuadrature(std::vector<double> grid) : grid_(std::move(grid)) {
  const int n = static_cast<int>(grid_.size());
  if (n < 4) throw InvalidArgument("GridQuadrature: need at least 4 nodes");
  for (int i = 1; i < n; ++i)
    if (!(grid_[i] > grid_[i - 1])) throw InvalidArgument("GridQuadrature: grid must be increasing");
  const int width = std::min(n, 5);
  jac_.resize(n);
  for (int i = 0; i < n; ++i) {
    const int start = std::clamp(i - width / 2, 0, n - width);
    std::vector<double> t(width);
    for (int k = 0; k < width; ++k) t[k] = start + k;
    const auto w = fd_weights(i, t, 1);
    double d = 0.0;
    for (int k = 0; k < width; ++k) d += w[k] * grid_[start + k];
    jac_[i] = d;
  }
}

std::vector<double> GridQuadrature::tail_integrals(const std::vector<double>& f) const {
  const int n = static_cast<int>(grid_.size());
  if (static_cast<int>(f.size()) != n) throw InvalidArgument("GridQuadrature: sample count mismatch");
  const int m = n - 1;
  std::vector<double> g(n);
  for (int i = 0; i < n; ++i) g[i] = f[i] * jac_[i];
  std::vector<double> tail(n, 0.0);
  // Single panels use the cubic through four neighbouring nodes, so every
  // tail is exact for cubics in the index variable like Simpson itself.
  tail[m - 1] = (g[m - 3] - 5.0 * g[m - 2] + 19.0 * g[m - 1] + 9.0 * g[m]) / 24.0;
  for (int i = m - 2; i >= 0; --i) {
    if ((m - i) % 2 == 0)
      tail[i] = tail[i + 2] + (g[i] + 4.0 * g[i + 1] + g[i + 2]) / 3.0;
    else
      tail[i] = tail[i + 1] + (9.0 * g[i] + 19.0 * g[i + 1] - 5.0 * g[i + 2] + g[i + 3]) / 24.0;
  }
  return tail;
}

double GridQuadrature::integrate(const std::vector<double>& f) const { return tail_integrals(f)[0]; }

HermitePath::HermitePath(std::vector<double> grid, std::vector<Vec> values, std::vector<Vec> derivs)
    : grid_(std::move(grid)), values_(std::move(values)), derivs_(std::move(derivs)) {
  if (grid_.size() < 2 || values_.size() != grid_.size() || derivs_.size() != grid_.size())
    throw InvalidArgument("HermitePath: inconsistent sizes");
}

std::size_t HermitePath::segment(double q) const {
  auto it = std::upper_bound(grid_.begin(), grid_.end(), q);
  std::size_t i = it == grid_.begin() ? 0 : static_cast<std::size_t>(it - grid_.begin()) - 1;
  return std::min(i, grid_.size() - 2);
}

Vec HermitePath::operator()(double q) const {
  q = std::clamp(q, grid_.front(), grid_.back());
  const std::size_t i = segment(q);
  const double hseg = grid_[i + 1] - grid_[i];
  const double t = (q - grid_[i]) / hseg;
  const double t2 = t * t, t3 = t2 * t;
  const double h00 = 2 * t3 - 3 * t2 + 1, h10 = t3 - 2 * t2 + t;
  const double h01 = -2 * t3 + 3 * t2, h11 = t3 - t2;
  return h00 * values_[i] + h10 * hseg * derivs_[i] + h01 * values_[i + 1] + h11 * hseg * derivs_[i + 1];
}

Vec HermitePath::derivative(double q) const {
  q = std::clamp(q, grid_.front(), grid_.back());
  const std::size_t i = segment(q);
  const double hseg = grid_[i + 1] - grid_[i];
  const double t = (q - grid_[i]) / hseg;
  const double t2 = t * t;
  const double d00 = 6 * t2 - 6 * t, d10 = 3 * t2 - 4 * t + 1;
  const double d01 = -6 * t2 + 6 * t, d11 = 3 * t2 - 2 * t;
  return (d00 * values_[i] + d01 * values_[i + 1]) / hseg + d10 * derivs_[i] + d11 * derivs_[i + 1];
}

}  // namespace msamp
