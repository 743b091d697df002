#pragma once

#include <array>
#include <vector>

#include <Eigen/Dense>

namespace mincontrol {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Relative rank policy shared by every pseudoinverse, square root and range
/// test in the library: a singular value (or eigenvalue) s is treated as zero
/// when s <= rel_threshold * s_max.
class RankPolicy {
 public:
  static constexpr double kDefaultThreshold = 1e-10;

  /// Throws DomainError unless 0 < rel_threshold < 1.
  explicit RankPolicy(double rel_threshold = kDefaultThreshold);

  double rel_threshold() const { return rel_threshold_; }
  double Cutoff(double largest) const { return rel_threshold_ * largest; }

  /// Relative residual ||(I - P)A1|| / ||A1|| accepted by RangeInclusion.
  /// Taken as sqrt(rel_threshold): range bases computed from Gramians carry
  /// errors well above rel_threshold but far below genuine escapes.
  double InclusionTolerance() const;

 private:
  double rel_threshold_;
};

/// Symmetric positive semidefinite matrix with its eigendecomposition cached
/// at construction. Eigenvalues in [-rank_tol * lambda_max, 0) are clipped to
/// zero; anything more negative is rejected with NotPsdError.
class SymmetricPSD {
 public:
  /// Requires max|M - M^T| <= 1e-12 * max|M|; throws DimensionError otherwise.
  explicit SymmetricPSD(const Matrix& m, RankPolicy policy = RankPolicy{});

  /// Symmetrizes (M + M^T)/2 before validating. Use for numerically
  /// assembled matrices (quadrature, ODE output).
  static SymmetricPSD FromNearlySymmetric(const Matrix& m,
                                          RankPolicy policy = RankPolicy{});

  static SymmetricPSD Zero(int n, RankPolicy policy = RankPolicy{});

  const Matrix& matrix() const { return matrix_; }
  /// Ascending, clipped at zero.
  const Vector& eigenvalues() const { return eigenvalues_; }
  const Matrix& eigenvectors() const { return eigenvectors_; }
  const RankPolicy& policy() const { return policy_; }
  int size() const { return static_cast<int>(matrix_.rows()); }

  double MaxEigenvalue() const;
  int Rank() const;

  /// Orthonormal basis of the range (eigenvectors above the rank cutoff).
  Matrix RangeBasis() const;
  /// Orthonormal basis of the kernel (eigenvectors at or below the cutoff).
  Matrix KernelBasis() const;
  Matrix RangeProjector() const;

  Matrix Pinv() const;
  /// Pseudoinverse of the square root.
  Matrix PinvSqrt() const;

 private:
  SymmetricPSD(Matrix m, RankPolicy policy, bool validated);
  void Decompose();

  Matrix matrix_;
  RankPolicy policy_;
  Vector eigenvalues_;
  Matrix eigenvectors_;
};

/// e^{tA}. Diagonal A takes an exact path (diag(e^{t a_ii})); everything else
/// uses Pade scaling and squaring. Negative t is accepted only when the
/// caller asserts that A generates a group.
Matrix Expm(const Matrix& a, double t, bool allow_negative_time = false);

/// Moore-Penrose pseudoinverse under the rank policy. Rank-0 input yields
/// the zero matrix of transposed shape.
Matrix Pinv(const Matrix& m, RankPolicy policy = RankPolicy{});

/// Principal square root S with S*S = M; ker(S) = ker(M) under M's policy.
SymmetricPSD PsdSqrt(const SymmetricPSD& m);

/// True iff max|AK - KA| <= tol * max|A| * max|K|.
bool Commutes(const Matrix& a, const Matrix& k, double tol = 1e-10);

struct RangeInclusionResult {
  bool included = false;
  /// Smallest k with ||A1^T x|| <= k ||A2^T x|| for all x; +inf when
  /// the inclusion fails.
  double constant_k = 0.0;
  /// ||(I - P_range(A2)) A1|| (spectral norm).
  double residual = 0.0;
  /// When not included: unit vector x with A2^T x = 0 but A1^T x != 0.
  Vector witness;
};

/// Decides R(A1) subset R(A2) through the orthogonal projector onto R(A2).
RangeInclusionResult RangeInclusion(const Matrix& a1, const Matrix& a2,
                                    RankPolicy policy = RankPolicy{});

/// A2^+ A1 for commuting A1, A2 with R(A1) subset R(A2). Throws
/// PreconditionError when either hypothesis fails.
Matrix CommutingPinvCompose(const Matrix& a1, const SymmetricPSD& a2,
                            double commute_tol = 1e-9);

/// Orthonormal basis of R(M) from the SVD under the rank policy.
Matrix RangeBasis(const Matrix& m, RankPolicy policy = RankPolicy{});
Matrix RangeProjector(const Matrix& m, RankPolicy policy = RankPolicy{});

/// Cosines of the principal angles between the column spans of two
/// orthonormal bases (descending).
Vector PrincipalAngleCosines(const Matrix& basis1, const Matrix& basis2);

Matrix Symmetrize(const Matrix& m);
double MaxAbs(const Matrix& m);
double SpectralNorm(const Matrix& m);

/// Throws DomainError if any entry is NaN or infinite.
void RequireFinite(const Matrix& m, const char* what);
void RequireSquare(const Matrix& m, const char* what);

/// max(0, -max Re lambda(A)).
double StabilityMargin(const Matrix& a);

struct NegativeTypeEstimate {
  double m = 1.0;
  double omega = 0.0;
};

/// omega = StabilityMargin(A); M = max ||e^{tA}|| e^{omega t} over samples
/// of t in [0, 1].
NegativeTypeEstimate EstimateNegativeType(const Matrix& a, int samples = 101);

/// 8-point Gauss-Legendre rule on [-1, 1].
struct GaussLegendre8 {
  static constexpr std::array<double, 8> kNodes = {
      -0.9602898564975363, -0.7966664774136267, -0.5255324099163290,
      -0.1834346424956498, 0.1834346424956498,  0.5255324099163290,
      0.7966664774136267,  0.9602898564975363};
  static constexpr std::array<double, 8> kWeights = {
      0.1012285362903763, 0.2223810344533745, 0.3137066458778873,
      0.3626837833783620, 0.3626837833783620, 0.3137066458778873,
      0.2223810344533745, 0.1012285362903763};
};

/// Composite 8-point Gauss-Legendre integral of a scalar function over
/// [a, b] split at the sorted breakpoints strictly inside (a, b).
template <typename F>
double IntegratePiecewise(F&& f, double a, double b,
                          const std::vector<double>& breakpoints = {}) {
  double total = 0.0;
  double left = a;
  auto panel = [&](double lo, double hi) {
    const double half = 0.5 * (hi - lo);
    const double mid = 0.5 * (hi + lo);
    double s = 0.0;
    for (int i = 0; i < 8; ++i) {
      s += GaussLegendre8::kWeights[i] * f(mid + half * GaussLegendre8::kNodes[i]);
    }
    return s * half;
  };
  for (double bp : breakpoints) {
    if (bp <= left || bp >= b) continue;
    total += panel(left, bp);
    left = bp;
  }
  if (b > left) total += panel(left, b);
  return total;
}

}  // namespace mincontrol
