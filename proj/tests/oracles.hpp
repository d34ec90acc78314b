#pragma once

// Independent reference computations used by the tests. Nothing here calls
// into the library's solvers; the dense routines are plain Gaussian
// elimination on std::vector storage.

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

#include "sofim/common.hpp"
#include "sofim/problems.hpp"

namespace oracle {

using DenseMatrix = std::vector<std::vector<double>>;

inline DenseMatrix to_dense(const sofim::Matrix& m) {
  DenseMatrix out(static_cast<std::size_t>(m.rows()), std::vector<double>(static_cast<std::size_t>(m.cols())));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) out[i][j] = m(i, j);
  return out;
}

inline std::vector<double> to_std(const sofim::Vector& v) { return {v.data(), v.data() + v.size()}; }

inline sofim::Vector from_std(const std::vector<double>& v) {
  return Eigen::Map<const sofim::Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

/// Solves a x = b by Gaussian elimination with partial pivoting.
inline std::vector<double> gaussian_solve(DenseMatrix a, std::vector<double> b) {
  const std::size_t n = b.size();
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t pivot = k;
    for (std::size_t i = k + 1; i < n; ++i)
      if (std::abs(a[i][k]) > std::abs(a[pivot][k])) pivot = i;
    if (a[pivot][k] == 0.0) throw std::runtime_error("singular system");
    std::swap(a[k], a[pivot]);
    std::swap(b[k], b[pivot]);
    for (std::size_t i = k + 1; i < n; ++i) {
      const double f = a[i][k] / a[k][k];
      for (std::size_t j = k; j < n; ++j) a[i][j] -= f * a[k][j];
      b[i] -= f * b[k];
    }
  }
  std::vector<double> x(n);
  for (std::size_t k = n; k-- > 0;) {
    double s = b[k];
    for (std::size_t j = k + 1; j < n; ++j) s -= a[k][j] * x[j];
    x[k] = s / a[k][k];
  }
  return x;
}

/// Explicit inverse by Gauss-Jordan elimination.
inline DenseMatrix gauss_jordan_inverse(DenseMatrix a) {
  const std::size_t n = a.size();
  DenseMatrix inv(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) inv[i][i] = 1.0;
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t pivot = k;
    for (std::size_t i = k + 1; i < n; ++i)
      if (std::abs(a[i][k]) > std::abs(a[pivot][k])) pivot = i;
    std::swap(a[k], a[pivot]);
    std::swap(inv[k], inv[pivot]);
    const double p = a[k][k];
    for (std::size_t j = 0; j < n; ++j) {
      a[k][j] /= p;
      inv[k][j] /= p;
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (i == k) continue;
      const double f = a[i][k];
      for (std::size_t j = 0; j < n; ++j) {
        a[i][j] -= f * a[k][j];
        inv[i][j] -= f * inv[k][j];
      }
    }
  }
  return inv;
}

inline std::vector<double> mat_vec(const DenseMatrix& a, const std::vector<double>& x) {
  std::vector<double> y(a.size(), 0.0);
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < x.size(); ++j) y[i] += a[i][j] * x[j];
  return y;
}

/// diag(a_diag) + u v^T as an explicit matrix.
inline DenseMatrix rank_one_plus_diagonal(double a_diag, const sofim::Vector& u, const sofim::Vector& v) {
  const auto n = static_cast<std::size_t>(u.size());
  DenseMatrix m(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) m[i][j] = u(static_cast<Eigen::Index>(i)) * v(static_cast<Eigen::Index>(j));
    m[i][i] += a_diag;
  }
  return m;
}

inline double rel_error(const sofim::Vector& a, const sofim::Vector& b) {
  const double denom = std::max(b.norm(), 1e-300);
  return (a - b).norm() / denom;
}

inline sofim::Vector random_vector(Eigen::Index d, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  sofim::Vector v(d);
  for (auto& x : v) x = n(rng);
  return v;
}

/// Central finite differences of problem.loss.
inline sofim::Vector central_difference(const sofim::problems::Problem& problem, const sofim::Vector& w,
                                        sofim::problems::Batch batch, double h = 1e-5) {
  sofim::Vector g(w.size());
  sofim::Vector x = w;
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    const double orig = x(i);
    x(i) = orig + h;
    const double fp = problem.loss(x, batch);
    x(i) = orig - h;
    const double fm = problem.loss(x, batch);
    x(i) = orig;
    g(i) = (fp - fm) / (2.0 * h);
  }
  return g;
}

}  // namespace oracle
