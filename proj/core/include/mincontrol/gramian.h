#pragma once

#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "mincontrol/operator_core.h"

namespace mincontrol {

inline constexpr double kInfiniteHorizon = std::numeric_limits<double>::infinity();

/// Finite-dimensional control system y' = Ay + Bu.
class LinearSystem {
 public:
  /// Throws DimensionError when A is not square or B's row count differs,
  /// DomainError on non-finite entries.
  LinearSystem(Matrix a, Matrix b);

  const Matrix& a() const { return a_; }
  const Matrix& b() const { return b_; }
  /// BB^T.
  const Matrix& control_weight() const { return bbt_; }
  int state_dim() const { return static_cast<int>(a_.rows()); }
  int input_dim() const { return static_cast<int>(b_.cols()); }

  /// Largest omega >= 0 with Re lambda(A) <= -omega; zero when unstable.
  double stability_margin() const { return omega_; }
  bool is_stable() const { return omega_ > 0.0; }
  bool is_symmetric() const;
  /// A symmetric and AB B^T = BB^T A.
  bool is_commuting(double tol = 1e-10) const;

  /// FNV-1a hash over the dimensions and raw entries of A and B.
  std::uint64_t Fingerprint() const { return fingerprint_; }

 private:
  Matrix a_;
  Matrix b_;
  Matrix bbt_;
  double omega_ = 0.0;
  std::uint64_t fingerprint_ = 0;
};

enum class GramianMethod {
  kQuadrature,
  kLyapunovOde,
  kClosedForm,
  kAlgebraic,
  kBlockExponential,
};

std::string ToString(GramianMethod method);

struct GramianDiagnostics {
  /// Quadrature panels or ODE steps of the accepted result.
  int refinements = 0;
  /// Relative change between the last two refinement levels.
  double last_change = 0.0;
  bool converged = true;
};

/// Controllability Gramian Q_t = int_0^t e^{rA} BB^T e^{rA^T} dr (t may be
/// infinite) tagged with the producing method and system.
class Gramian {
 public:
  Gramian(SymmetricPSD q, double horizon, std::uint64_t system_fingerprint,
          GramianMethod method, GramianDiagnostics diagnostics = {});

  const SymmetricPSD& psd() const { return q_; }
  const Matrix& matrix() const { return q_.matrix(); }
  double horizon() const { return horizon_; }
  bool is_infinite() const { return horizon_ == kInfiniteHorizon; }
  std::uint64_t system_fingerprint() const { return fingerprint_; }
  GramianMethod method() const { return method_; }
  const GramianDiagnostics& diagnostics() const { return diagnostics_; }

 private:
  SymmetricPSD q_;
  double horizon_;
  std::uint64_t fingerprint_;
  GramianMethod method_;
  GramianDiagnostics diagnostics_;
};

struct QuadratureOptions {
  /// Minimum total Gauss-Legendre node count (>= 2); rounded up to whole
  /// 8-point panels.
  int nodes = 16;
  /// Double the panel count until two successive results agree.
  bool adaptive = true;
  double rel_tol = 1e-10;
  int max_panels = 1 << 14;
};

/// Composite 8-point Gauss-Legendre quadrature of e^{rA}BB^Te^{rA^T} on
/// [0, t]. Throws DomainError for t <= 0 or non-finite t.
Gramian GramianQuadrature(const LinearSystem& sys, double t,
                          const QuadratureOptions& options = {},
                          RankPolicy policy = RankPolicy{});

struct LyapunovOdeOptions {
  int initial_steps = 16;
  /// Relative agreement between successive halvings.
  double rel_tol = 1e-9;
  int max_steps = 1 << 22;
};

/// Integrates Q' = AQ + QA^T + BB^T, Q(0) = 0 with classical RK4, halving the
/// step until successive results agree, and returns the Richardson-corrected
/// result. Throws StiffnessError when max_steps is exceeded.
Gramian GramianLyapunovOde(const LinearSystem& sys, double t,
                           const LyapunovOdeOptions& options = {},
                           RankPolicy policy = RankPolicy{});

/// Ordering of the n(n+1)/2 symmetric unknowns in the algebraic Lyapunov
/// solve.
enum class SymmetricOrdering { kRowMajorUpper, kColumnMajorLower };

/// Q_inf solving AQ + QA^T + BB^T = 0 by a dense solve over symmetric
/// matrices. Throws UnstableSystemError when the system is not of negative
/// type.
Gramian GramianInfinite(const LinearSystem& sys,
                        SymmetricOrdering ordering = SymmetricOrdering::kRowMajorUpper,
                        RankPolicy policy = RankPolicy{});

/// 1/2 A^{-1}(e^{2tA} - I)BB^T (finite t) or -1/2 A^{-1}BB^T (t infinite).
/// Requires A symmetric, invertible and commuting with BB^T; throws
/// PreconditionError otherwise.
Gramian GramianCommutingClosedForm(const LinearSystem& sys, double t,
                                   RankPolicy policy = RankPolicy{});

/// Q_inf - e^{tA} Q_inf e^{tA^T} from a precomputed Q_inf.
Gramian GramianAlgebraic(const LinearSystem& sys, const Gramian& q_inf, double t);

/// Block-exponential (Van Loan) evaluation: the (1,2) block of
/// exp(t [[A, BB^T], [0, -A^T]]) times e^{tA^T}. Valid for unstable systems.
Gramian GramianBlockExponential(const LinearSystem& sys, double t,
                                RankPolicy policy = RankPolicy{});

/// Smooth, cached t -> Q_t for one system. Stable systems use
/// Q_inf - e^{tA}Q_inf e^{tA^T}; others use the block exponential. Entries
/// are write-once per time key; concurrent readers are safe.
class GramianFamily {
 public:
  explicit GramianFamily(LinearSystem sys, RankPolicy policy = RankPolicy{});

  const LinearSystem& system() const { return sys_; }
  const RankPolicy& policy() const { return policy_; }
  /// Throws UnstableSystemError for unstable systems.
  const Gramian& Infinite() const;
  bool has_infinite() const { return q_inf_.has_value(); }

  /// Q_t as a matrix without caching (used for finite differences).
  Matrix MatrixAt(double t) const;
  /// Q_t with write-once caching; t = 0 yields the zero Gramian.
  std::shared_ptr<const Gramian> At(double t) const;
  std::size_t cache_size() const;

 private:
  LinearSystem sys_;
  RankPolicy policy_;
  std::optional<Gramian> q_inf_;
  mutable std::shared_mutex mutex_;
  mutable std::map<double, std::shared_ptr<const Gramian>> cache_;
};

struct KernelChainLink {
  double t = 0.0;
  int kernel_dim = 0;
  /// ||Q_prev N_t|| / ||Q_prev|| for the kernel basis N_t of this time and
  /// the previous (smaller) time; zero for the first link.
  double containment_residual = 0.0;
  /// ||B^T N_t|| / ||B||.
  double control_residual = 0.0;
  /// Cosines of principal angles between ker Q_t and ker B^T.
  Vector angle_cosines_to_control_kernel;
};

struct KernelChainReport {
  std::vector<KernelChainLink> links;
  int control_kernel_dim = 0;
  bool commuting = false;
  /// All inclusions hold under the rank policy.
  bool inclusions_hold = true;
  /// Commuting case only: every kernel equals ker B^T.
  bool equalities_hold = true;
  std::vector<std::string> violations;
  /// First offending kernel vector, if any.
  Vector offending_vector;
};

/// Verifies ker Q_t subset ker Q_s subset ker B^T for s <= t along the
/// ascending time list, and equality of all of them in the commuting case.
KernelChainReport KernelChainCheck(const LinearSystem& sys,
                                   const std::vector<double>& times,
                                   RankPolicy policy = RankPolicy{});

struct RangeEqualityReport {
  double t = 0.0;
  double t0 = 0.0;
  /// R(Q_t^{1/2}) subset R(Q_inf^{1/2}) and its constant.
  RangeInclusionResult finite_in_infinite;
  /// R(Q_inf^{1/2}) subset R(Q_t^{1/2}) and its constant.
  RangeInclusionResult infinite_in_finite;
  bool equal = false;
  /// Commuting case: R(Q_t) = R(Q_inf) as well.
  std::optional<bool> full_ranges_equal;
  /// Equality is predicted for t >= T0, or for every t in the commuting case.
  bool equality_expected = false;
  bool verdict = false;
};

RangeEqualityReport RangeEqualityCheck(const LinearSystem& sys, double t, double t0,
                                       RankPolicy policy = RankPolicy{});

}  // namespace mincontrol
