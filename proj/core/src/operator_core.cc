#include "mincontrol/operator_core.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <unsupported/Eigen/MatrixFunctions>

#include "mincontrol/errors.h"

namespace mincontrol {

RankPolicy::RankPolicy(double rel_threshold) : rel_threshold_(rel_threshold) {
  if (!(rel_threshold > 0.0 && rel_threshold < 1.0)) {
    std::ostringstream os;
    os << "RankPolicy: rel_threshold must lie in (0, 1), got " << rel_threshold;
    throw DomainError(os.str());
  }
}

double RankPolicy::InclusionTolerance() const { return std::sqrt(rel_threshold_); }

// ---------------------------------------------------------------------------
// SymmetricPSD

SymmetricPSD::SymmetricPSD(const Matrix& m, RankPolicy policy)
    : matrix_(m), policy_(policy) {
  RequireSquare(matrix_, "SymmetricPSD");
  RequireFinite(matrix_, "SymmetricPSD");
  const double scale = MaxAbs(matrix_);
  const double asym = MaxAbs(matrix_ - matrix_.transpose());
  if (asym > 1e-12 * scale) {
    std::ostringstream os;
    os << "SymmetricPSD: matrix is not symmetric (max|M - M^T| = " << asym
       << ", max|M| = " << scale << ")";
    throw DimensionError(os.str());
  }
  Decompose();
}

SymmetricPSD::SymmetricPSD(Matrix m, RankPolicy policy, bool /*validated*/)
    : matrix_(std::move(m)), policy_(policy) {
  Decompose();
}

SymmetricPSD SymmetricPSD::FromNearlySymmetric(const Matrix& m,
                                               RankPolicy policy) {
  RequireSquare(m, "SymmetricPSD");
  RequireFinite(m, "SymmetricPSD");
  return SymmetricPSD(Symmetrize(m), policy, true);
}

SymmetricPSD SymmetricPSD::Zero(int n, RankPolicy policy) {
  return SymmetricPSD(Matrix::Zero(n, n), policy, true);
}

void SymmetricPSD::Decompose() {
  const int n = size();
  if (n == 0) {
    eigenvalues_.resize(0);
    eigenvectors_.resize(0, 0);
    return;
  }
  Eigen::SelfAdjointEigenSolver<Matrix> eig(matrix_);
  eigenvalues_ = eig.eigenvalues();
  eigenvectors_ = eig.eigenvectors();
  const double lambda_max = std::max(eigenvalues_.maxCoeff(), 0.0);
  const double floor = -policy_.Cutoff(lambda_max);
  bool clipped = false;
  for (int i = 0; i < n; ++i) {
    if (eigenvalues_(i) < 0.0) {
      if (eigenvalues_(i) < floor) {
        std::ostringstream os;
        os << "SymmetricPSD: eigenvalue " << eigenvalues_(i)
           << " below -rank_tol * lambda_max = " << floor;
        throw NotPsdError(os.str(), eigenvalues_(i));
      }
      eigenvalues_(i) = 0.0;
      clipped = true;
    }
  }
  if (clipped) {
    matrix_ = eigenvectors_ * eigenvalues_.asDiagonal() * eigenvectors_.transpose();
    matrix_ = Symmetrize(matrix_);
  }
}

double SymmetricPSD::MaxEigenvalue() const {
  return eigenvalues_.size() == 0 ? 0.0 : eigenvalues_.maxCoeff();
}

int SymmetricPSD::Rank() const {
  const double lambda_max = MaxEigenvalue();
  if (lambda_max <= 0.0) return 0;
  const double cut = policy_.Cutoff(lambda_max);
  return static_cast<int>((eigenvalues_.array() > cut).count());
}

Matrix SymmetricPSD::RangeBasis() const {
  const int r = Rank();
  return eigenvectors_.rightCols(r);
}

Matrix SymmetricPSD::KernelBasis() const {
  const int r = Rank();
  return eigenvectors_.leftCols(size() - r);
}

Matrix SymmetricPSD::RangeProjector() const {
  const Matrix basis = RangeBasis();
  return basis * basis.transpose();
}

Matrix SymmetricPSD::Pinv() const {
  const int n = size();
  const int r = Rank();
  Matrix out = Matrix::Zero(n, n);
  for (int i = n - r; i < n; ++i) {
    out += eigenvectors_.col(i) * eigenvectors_.col(i).transpose() / eigenvalues_(i);
  }
  return Symmetrize(out);
}

Matrix SymmetricPSD::PinvSqrt() const {
  const int n = size();
  const int r = Rank();
  Matrix out = Matrix::Zero(n, n);
  for (int i = n - r; i < n; ++i) {
    out += eigenvectors_.col(i) * eigenvectors_.col(i).transpose() /
           std::sqrt(eigenvalues_(i));
  }
  return Symmetrize(out);
}

// ---------------------------------------------------------------------------
// Free functions

Matrix Expm(const Matrix& a, double t, bool allow_negative_time) {
  RequireSquare(a, "Expm");
  RequireFinite(a, "Expm");
  if (!std::isfinite(t)) throw DomainError("Expm: time must be finite");
  if (t < 0.0 && !allow_negative_time) {
    throw DomainError("Expm: negative time requires allow_negative_time");
  }
  const int n = static_cast<int>(a.rows());
  const Vector diag = a.diagonal();
  Matrix off = a;
  off.diagonal().setZero();
  if (off.isZero(0.0)) {
    Matrix out = Matrix::Zero(n, n);
    for (int i = 0; i < n; ++i) out(i, i) = std::exp(t * diag(i));
    return out;
  }
  if (t == 0.0) return Matrix::Identity(n, n);
  const Matrix scaled = t * a;
  return scaled.exp();
}

Matrix Pinv(const Matrix& m, RankPolicy policy) {
  RequireFinite(m, "Pinv");
  if (m.size() == 0) return Matrix::Zero(m.cols(), m.rows());
  Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& s = svd.singularValues();
  Matrix out = Matrix::Zero(m.cols(), m.rows());
  if (s.size() == 0 || s(0) <= 0.0) return out;
  const double cut = policy.Cutoff(s(0));
  for (int i = 0; i < s.size(); ++i) {
    if (s(i) <= cut) break;
    out += svd.matrixV().col(i) * svd.matrixU().col(i).transpose() / s(i);
  }
  return out;
}

SymmetricPSD PsdSqrt(const SymmetricPSD& m) {
  const int n = m.size();
  const int r = m.Rank();
  Matrix root = Matrix::Zero(n, n);
  for (int i = n - r; i < n; ++i) {
    root += std::sqrt(m.eigenvalues()(i)) * m.eigenvectors().col(i) *
            m.eigenvectors().col(i).transpose();
  }
  return SymmetricPSD::FromNearlySymmetric(root, m.policy());
}

bool Commutes(const Matrix& a, const Matrix& k, double tol) {
  RequireSquare(a, "Commutes");
  RequireSquare(k, "Commutes");
  if (a.rows() != k.rows()) {
    throw DimensionError("Commutes: operands have different dimensions");
  }
  const double scale = MaxAbs(a) * MaxAbs(k);
  return MaxAbs(a * k - k * a) <= tol * scale;
}

Matrix RangeBasis(const Matrix& m, RankPolicy policy) {
  if (m.size() == 0) return Matrix::Zero(m.rows(), 0);
  Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeThinU);
  const Vector& s = svd.singularValues();
  if (s.size() == 0 || s(0) <= 0.0) return Matrix::Zero(m.rows(), 0);
  const double cut = policy.Cutoff(s(0));
  int r = 0;
  while (r < s.size() && s(r) > cut) ++r;
  return svd.matrixU().leftCols(r);
}

Matrix RangeProjector(const Matrix& m, RankPolicy policy) {
  const Matrix basis = RangeBasis(m, policy);
  return basis * basis.transpose();
}

RangeInclusionResult RangeInclusion(const Matrix& a1, const Matrix& a2,
                                    RankPolicy policy) {
  RequireFinite(a1, "RangeInclusion");
  RequireFinite(a2, "RangeInclusion");
  if (a1.rows() != a2.rows()) {
    throw DimensionError("RangeInclusion: operands must share the row dimension");
  }
  RangeInclusionResult result;
  const Matrix projector = RangeProjector(a2, policy);
  const Matrix escape = a1 - projector * a1;
  const double norm1 = SpectralNorm(a1);
  result.residual = SpectralNorm(escape);
  if (norm1 == 0.0) {
    result.included = true;
    result.constant_k = 0.0;
    return result;
  }
  result.included = result.residual <= policy.InclusionTolerance() * norm1;
  if (result.included) {
    result.constant_k = SpectralNorm(Pinv(a2, policy) * a1);
  } else {
    result.constant_k = std::numeric_limits<double>::infinity();
    Eigen::JacobiSVD<Matrix> svd(escape, Eigen::ComputeThinU);
    result.witness = svd.matrixU().col(0);
  }
  return result;
}

Matrix CommutingPinvCompose(const Matrix& a1, const SymmetricPSD& a2,
                            double commute_tol) {
  RequireSquare(a1, "CommutingPinvCompose");
  if (a1.rows() != a2.size()) {
    throw DimensionError("CommutingPinvCompose: dimension mismatch");
  }
  if (!Commutes(a1, a2.matrix(), commute_tol)) {
    throw PreconditionError("CommutingPinvCompose: A1 and A2 do not commute");
  }
  const RangeInclusionResult inc = RangeInclusion(a1, a2.matrix(), a2.policy());
  if (!inc.included) {
    std::ostringstream os;
    os << "CommutingPinvCompose: R(A1) is not contained in R(A2) (residual "
       << inc.residual << ")";
    throw PreconditionError(os.str());
  }
  return a2.Pinv() * a1;
}

Vector PrincipalAngleCosines(const Matrix& basis1, const Matrix& basis2) {
  if (basis1.cols() == 0 || basis2.cols() == 0) return Vector(0);
  Eigen::JacobiSVD<Matrix> svd(basis1.transpose() * basis2);
  return svd.singularValues().cwiseMin(1.0);
}

Matrix Symmetrize(const Matrix& m) { return 0.5 * (m + m.transpose()); }

double MaxAbs(const Matrix& m) {
  return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

double SpectralNorm(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  if (m.cols() == 1) return m.norm();
  Eigen::JacobiSVD<Matrix> svd(m);
  return svd.singularValues()(0);
}

void RequireFinite(const Matrix& m, const char* what) {
  if (!m.allFinite()) {
    throw DomainError(std::string(what) + ": non-finite entry");
  }
}

void RequireSquare(const Matrix& m, const char* what) {
  if (m.rows() != m.cols()) {
    std::ostringstream os;
    os << what << ": expected a square matrix, got " << m.rows() << "x" << m.cols();
    throw DimensionError(os.str());
  }
}

double StabilityMargin(const Matrix& a) {
  RequireSquare(a, "StabilityMargin");
  if (a.size() == 0) return 0.0;
  Eigen::EigenSolver<Matrix> eig(a, false);
  const double abscissa = eig.eigenvalues().real().maxCoeff();
  return std::max(0.0, -abscissa);
}

NegativeTypeEstimate EstimateNegativeType(const Matrix& a, int samples) {
  NegativeTypeEstimate est;
  est.omega = StabilityMargin(a);
  est.m = 1.0;
  const int k = std::max(samples, 2);
  for (int i = 0; i < k; ++i) {
    const double t = static_cast<double>(i) / (k - 1);
    est.m = std::max(est.m, SpectralNorm(Expm(a, t)) * std::exp(est.omega * t));
  }
  return est;
}

}  // namespace mincontrol
