#pragma once

// Seeded system generators and closed-form oracles shared by the unit and
// acceptance tests. The oracles here deliberately avoid the library's own
// Gramian code paths.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include "mincontrol/gramian.h"

namespace mincontrol::testing {

/// Q_t from the Kronecker form: with K = I (x) A + A (x) I,
/// vec(Q_t) = K^{-1} (e^{tK} - I) vec(BB^T). Independent of every Gramian
/// routine in the library; n <= 8 keeps K at most 64 x 64.
inline Matrix KroneckerGramian(const Matrix& a, const Matrix& b, double t) {
  const Eigen::Index n = a.rows();
  const Matrix id = Matrix::Identity(n, n);
  Matrix k(n * n, n * n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      k.block(i * n, j * n, n, n) = a(i, j) * id + (i == j ? a : Matrix::Zero(n, n));
    }
  }
  const Matrix w = b * b.transpose();
  const Vector vec_w = Eigen::Map<const Vector>(w.data(), n * n);
  const Matrix ekt = (t * k).exp();
  const Vector vec_q =
      k.partialPivLu().solve((ekt - Matrix::Identity(n * n, n * n)) * vec_w);
  Matrix q = Eigen::Map<const Matrix>(vec_q.data(), n, n);
  return 0.5 * (q + q.transpose());
}

/// Q_inf from the Kronecker form of A Q + Q A^T = -BB^T.
inline Matrix KroneckerGramianInfinite(const Matrix& a, const Matrix& b) {
  const Eigen::Index n = a.rows();
  const Matrix id = Matrix::Identity(n, n);
  Matrix k(n * n, n * n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      k.block(i * n, j * n, n, n) = a(i, j) * id + (i == j ? a : Matrix::Zero(n, n));
    }
  }
  const Matrix w = b * b.transpose();
  const Vector vec_w = Eigen::Map<const Vector>(w.data(), n * n);
  const Vector vec_q = k.partialPivLu().solve(-vec_w);
  Matrix q = Eigen::Map<const Matrix>(vec_q.data(), n, n);
  return 0.5 * (q + q.transpose());
}

struct RandomSystemOptions {
  int min_dim = 2;
  int max_dim = 8;
  double min_margin = 0.3;
  double max_margin = 1.5;
  /// Draws whose Q_inf condition number exceeds this are rejected.
  double max_condition = 1e4;
};

/// Stable (A, B) with n in [min_dim, max_dim], m in [ceil(n/2), n], and
/// stability margin drawn uniformly in [min_margin, max_margin]. The same
/// seed always yields the same system.
inline LinearSystem RandomStableSystem(std::uint64_t seed, const RandomSystemOptions& opts = {}) {
  std::mt19937_64 gen(seed * 0x9E3779B97F4A7C15ULL + 17);
  std::normal_distribution<double> normal;
  std::uniform_int_distribution<int> dim(opts.min_dim, opts.max_dim);
  std::uniform_real_distribution<double> margin(opts.min_margin, opts.max_margin);
  for (;;) {
    const int n = dim(gen);
    std::uniform_int_distribution<int> inputs((n + 1) / 2, n);
    const int m = inputs(gen);
    Matrix a(n, n), b(n, m);
    for (Eigen::Index i = 0; i < a.size(); ++i) a(i) = normal(gen) / std::sqrt(n);
    for (Eigen::Index i = 0; i < b.size(); ++i) b(i) = normal(gen);
    const double re_max = Eigen::EigenSolver<Matrix>(a, false).eigenvalues().real().maxCoeff();
    a -= (re_max + margin(gen)) * Matrix::Identity(n, n);
    const Matrix q = KroneckerGramianInfinite(a, b);
    const Vector ev = Eigen::SelfAdjointEigenSolver<Matrix>(q, Eigen::EigenvaluesOnly).eigenvalues();
    if (ev(0) > 0.0 && ev(n - 1) / ev(0) <= opts.max_condition) return LinearSystem(a, b);
  }
}

/// Diagonal commuting system: A = -diag(lambda), B = diag(sqrt(b)).
inline LinearSystem RandomCommutingSystem(std::uint64_t seed, int n) {
  std::mt19937_64 gen(seed * 0xD1B54A32D192ED03ULL + 5);
  std::uniform_real_distribution<double> lam(0.5, 4.0);
  std::uniform_real_distribution<double> wt(0.5, 2.0);
  Vector l(n), w(n);
  for (int i = 0; i < n; ++i) {
    l(i) = lam(gen);
    w(i) = wt(gen);
  }
  std::sort(l.data(), l.data() + n);
  return LinearSystem(Matrix((-l).asDiagonal()), Matrix(w.cwiseSqrt().asDiagonal()));
}

inline Vector RandomVector(std::uint64_t seed, int n) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> normal;
  Vector v(n);
  for (int i = 0; i < n; ++i) v(i) = normal(gen);
  return v;
}

inline double RelDiff(const Matrix& a, const Matrix& b) {
  return (a - b).norm() / std::max(b.norm(), 1e-300);
}

}  // namespace mincontrol::testing
