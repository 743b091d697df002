#include "mincontrol/gramian.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <mutex>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include "mincontrol/errors.h"

namespace mincontrol {
namespace {

constexpr std::uint64_t kFnvOffset = 1469598103934665603ULL;
constexpr std::uint64_t kFnvPrime = 1099511628211ULL;

void HashBytes(std::uint64_t* h, const void* data, std::size_t len) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < len; ++i) {
    *h ^= p[i];
    *h *= kFnvPrime;
  }
}

void HashMatrix(std::uint64_t* h, const Matrix& m) {
  const std::int64_t dims[2] = {m.rows(), m.cols()};
  HashBytes(h, dims, sizeof(dims));
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      double v = m(i, j);
      if (v == 0.0) v = 0.0;  // fold -0.0
      HashBytes(h, &v, sizeof(v));
    }
  }
}

void RequireHorizon(double t, const char* what) {
  if (!std::isfinite(t) || t <= 0.0) {
    std::ostringstream os;
    os << what << ": horizon must be positive and finite, got " << t;
    throw DomainError(os.str());
  }
}

double RelativeChange(const Matrix& coarse, const Matrix& fine) {
  const double scale = MaxAbs(fine);
  const double diff = MaxAbs(fine - coarse);
  if (scale == 0.0) return diff == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  return diff / scale;
}

// Sum over panels of S_p J S_p^T with S_p = e^{p w A}, J the one-panel rule.
Matrix QuadratureAtPanels(const LinearSystem& sys, double t, int panels) {
  const int n = sys.state_dim();
  const double w = t / panels;
  const double half = 0.5 * w;
  Matrix j = Matrix::Zero(n, n);
  for (int k = 0; k < 8; ++k) {
    const Matrix e = Expm(sys.a(), half * (1.0 + GaussLegendre8::kNodes[k]));
    j += (GaussLegendre8::kWeights[k] * half) * (e * sys.control_weight() * e.transpose());
  }
  const Matrix step = Expm(sys.a(), w);
  Matrix s = Matrix::Identity(n, n);
  Matrix q = Matrix::Zero(n, n);
  for (int p = 0; p < panels; ++p) {
    q.noalias() += s * j * s.transpose();
    s = step * s;
  }
  return Symmetrize(q);
}

Matrix LyapunovRhs(const LinearSystem& sys, const Matrix& q) {
  return sys.a() * q + q * sys.a().transpose() + sys.control_weight();
}

Matrix Rk4(const LinearSystem& sys, double t, int steps) {
  const int n = sys.state_dim();
  const double h = t / steps;
  Matrix q = Matrix::Zero(n, n);
  for (int s = 0; s < steps; ++s) {
    const Matrix k1 = LyapunovRhs(sys, q);
    const Matrix k2 = LyapunovRhs(sys, q + 0.5 * h * k1);
    const Matrix k3 = LyapunovRhs(sys, q + 0.5 * h * k2);
    const Matrix k4 = LyapunovRhs(sys, q + h * k3);
    q += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    q = Symmetrize(q);
    if (!q.allFinite()) break;
  }
  return q;
}

std::string EigenvalueSpread(const Matrix& a) {
  Eigen::EigenSolver<Matrix> eig(a, false);
  const auto mags = eig.eigenvalues().cwiseAbs();
  std::ostringstream os;
  os << "|lambda| in [" << mags.minCoeff() << ", " << mags.maxCoeff() << "]";
  return os.str();
}

// Eigen-decomposition based f(A)BB^T for symmetric A.
Matrix SymmetricFunctionTimesWeight(const LinearSystem& sys, double t) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(Symmetrize(sys.a()));
  const Vector& lam = eig.eigenvalues();
  const double scale = lam.cwiseAbs().maxCoeff();
  Vector f(lam.size());
  for (int i = 0; i < lam.size(); ++i) {
    if (std::abs(lam(i)) <= 1e-12 * scale || lam(i) == 0.0) {
      throw PreconditionError("GramianCommutingClosedForm: A is not invertible");
    }
    if (t == kInfiniteHorizon) {
      if (lam(i) >= 0.0) {
        throw UnstableSystemError(
            "GramianCommutingClosedForm: infinite horizon needs a stable A");
      }
      f(i) = -0.5 / lam(i);
    } else {
      f(i) = std::expm1(2.0 * t * lam(i)) / (2.0 * lam(i));
    }
  }
  const Matrix& v = eig.eigenvectors();
  return Symmetrize(v * f.asDiagonal() * v.transpose() * sys.control_weight());
}

std::vector<std::pair<int, int>> SymmetricUnknowns(int n, SymmetricOrdering ordering) {
  std::vector<std::pair<int, int>> out;
  out.reserve(static_cast<std::size_t>(n) * (n + 1) / 2);
  if (ordering == SymmetricOrdering::kRowMajorUpper) {
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j) out.emplace_back(i, j);
  } else {
    for (int j = 0; j < n; ++j)
      for (int i = j; i < n; ++i) out.emplace_back(j, i);
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------

LinearSystem::LinearSystem(Matrix a, Matrix b) : a_(std::move(a)), b_(std::move(b)) {
  RequireSquare(a_, "LinearSystem");
  if (b_.rows() != a_.rows()) {
    std::ostringstream os;
    os << "LinearSystem: B has " << b_.rows() << " rows, A is " << a_.rows() << "x"
       << a_.cols();
    throw DimensionError(os.str());
  }
  RequireFinite(a_, "LinearSystem A");
  RequireFinite(b_, "LinearSystem B");
  bbt_ = b_ * b_.transpose();
  omega_ = StabilityMargin(a_);
  fingerprint_ = kFnvOffset;
  HashMatrix(&fingerprint_, a_);
  HashMatrix(&fingerprint_, b_);
}

bool LinearSystem::is_symmetric() const {
  return MaxAbs(a_ - a_.transpose()) <= 1e-12 * MaxAbs(a_);
}

bool LinearSystem::is_commuting(double tol) const {
  return is_symmetric() && Commutes(a_, bbt_, tol);
}

std::string ToString(GramianMethod method) {
  switch (method) {
    case GramianMethod::kQuadrature: return "quadrature";
    case GramianMethod::kLyapunovOde: return "lyapunov_ode";
    case GramianMethod::kClosedForm: return "closed_form";
    case GramianMethod::kAlgebraic: return "algebraic";
    case GramianMethod::kBlockExponential: return "block_exponential";
  }
  return "unknown";
}

Gramian::Gramian(SymmetricPSD q, double horizon, std::uint64_t system_fingerprint,
                 GramianMethod method, GramianDiagnostics diagnostics)
    : q_(std::move(q)),
      horizon_(horizon),
      fingerprint_(system_fingerprint),
      method_(method),
      diagnostics_(diagnostics) {
  if (!(horizon_ > 0.0)) {
    throw DomainError("Gramian: horizon must be positive");
  }
}

Gramian GramianQuadrature(const LinearSystem& sys, double t,
                          const QuadratureOptions& options, RankPolicy policy) {
  RequireHorizon(t, "GramianQuadrature");
  if (options.nodes < 2) throw DomainError("GramianQuadrature: nodes must be >= 2");
  int panels = std::max(1, (options.nodes + 7) / 8);
  GramianDiagnostics diag;
  Matrix q = QuadratureAtPanels(sys, t, panels);
  if (options.adaptive) {
    diag.converged = false;
    while (panels < options.max_panels) {
      const int next = std::min(2 * panels, options.max_panels);
      Matrix fine = QuadratureAtPanels(sys, t, next);
      diag.last_change = RelativeChange(q, fine);
      q = std::move(fine);
      panels = next;
      if (diag.last_change <= options.rel_tol) {
        diag.converged = true;
        break;
      }
    }
  }
  diag.refinements = panels;
  return Gramian(SymmetricPSD::FromNearlySymmetric(q, policy), t, sys.Fingerprint(),
                 GramianMethod::kQuadrature, diag);
}

Gramian GramianLyapunovOde(const LinearSystem& sys, double t,
                           const LyapunovOdeOptions& options, RankPolicy policy) {
  RequireHorizon(t, "GramianLyapunovOde");
  // RK4 is stable for h * rho < 2.78; rho <= 2 ||A||_1 bounds the Lyapunov
  // operator's spectrum.
  const double rho = 2.0 * sys.a().cwiseAbs().colwise().sum().maxCoeff();
  int steps = std::max(options.initial_steps, 1);
  if (rho > 0.0) {
    const double needed = std::ceil(t * rho / 2.5);
    if (needed > steps) steps = static_cast<int>(std::min<double>(needed, options.max_steps));
  }
  Matrix coarse = Rk4(sys, t, steps);
  GramianDiagnostics diag;
  while (true) {
    if (2LL * steps > options.max_steps) {
      std::ostringstream os;
      os << "GramianLyapunovOde: no " << options.rel_tol << " agreement within "
         << options.max_steps << " RK4 steps (last change " << diag.last_change
         << "); eigenvalue spread " << EigenvalueSpread(sys.a());
      throw StiffnessError(os.str());
    }
    steps *= 2;
    Matrix fine = Rk4(sys, t, steps);
    diag.last_change = fine.allFinite() && coarse.allFinite()
                           ? RelativeChange(coarse, fine)
                           : std::numeric_limits<double>::infinity();
    if (diag.last_change <= options.rel_tol) {
      const Matrix extrapolated = (16.0 * fine - coarse) / 15.0;
      diag.refinements = steps;
      return Gramian(SymmetricPSD::FromNearlySymmetric(extrapolated, policy), t,
                     sys.Fingerprint(), GramianMethod::kLyapunovOde, diag);
    }
    coarse = std::move(fine);
  }
}

Gramian GramianInfinite(const LinearSystem& sys, SymmetricOrdering ordering,
                        RankPolicy policy) {
  if (!sys.is_stable()) {
    throw UnstableSystemError(
        "GramianInfinite: A is not of negative type (max Re lambda >= 0); Q_inf "
        "does not exist and only finite-horizon Gramians are available");
  }
  const int n = sys.state_dim();
  const auto unknowns = SymmetricUnknowns(n, ordering);
  const int p = static_cast<int>(unknowns.size());
  const Matrix& a = sys.a();
  Matrix op(p, p);
  for (int c = 0; c < p; ++c) {
    const auto [i, j] = unknowns[c];
    // L(E) = A E + E A^T for E = e_i e_j^T + e_j e_i^T (or e_i e_i^T).
    Matrix e = Matrix::Zero(n, n);
    e(i, j) = 1.0;
    e(j, i) = 1.0;
    const Matrix image = a * e + e * a.transpose();
    for (int r = 0; r < p; ++r) op(r, c) = image(unknowns[r].first, unknowns[r].second);
  }
  auto unpack = [&](const Vector& x) {
    Matrix q(n, n);
    for (int c = 0; c < p; ++c) {
      q(unknowns[c].first, unknowns[c].second) = x(c);
      q(unknowns[c].second, unknowns[c].first) = x(c);
    }
    return q;
  };
  auto pack = [&](const Matrix& m) {
    Vector v(p);
    for (int r = 0; r < p; ++r) v(r) = m(unknowns[r].first, unknowns[r].second);
    return v;
  };
  Eigen::PartialPivLU<Matrix> lu(op);
  Vector x = lu.solve(pack(-sys.control_weight()));
  // Two rounds of iterative refinement on the full residual.
  for (int it = 0; it < 2; ++it) {
    const Matrix q = unpack(x);
    const Matrix res = LyapunovRhs(sys, q);
    x -= lu.solve(pack(res));
  }
  return Gramian(SymmetricPSD::FromNearlySymmetric(unpack(x), policy), kInfiniteHorizon,
                 sys.Fingerprint(), GramianMethod::kAlgebraic);
}

Gramian GramianCommutingClosedForm(const LinearSystem& sys, double t, RankPolicy policy) {
  if (!(t > 0.0) || std::isnan(t)) {
    throw DomainError("GramianCommutingClosedForm: horizon must be positive");
  }
  if (!sys.is_symmetric()) {
    throw PreconditionError("GramianCommutingClosedForm: A is not symmetric");
  }
  if (!Commutes(sys.a(), sys.control_weight(), 1e-10)) {
    throw PreconditionError("GramianCommutingClosedForm: A does not commute with BB^T");
  }
  const Matrix q = SymmetricFunctionTimesWeight(sys, t);
  return Gramian(SymmetricPSD::FromNearlySymmetric(q, policy), t, sys.Fingerprint(),
                 GramianMethod::kClosedForm);
}

Gramian GramianAlgebraic(const LinearSystem& sys, const Gramian& q_inf, double t) {
  RequireHorizon(t, "GramianAlgebraic");
  if (!q_inf.is_infinite() || q_inf.system_fingerprint() != sys.Fingerprint()) {
    throw PreconditionError("GramianAlgebraic: expected Q_inf of the same system");
  }
  const Matrix e = Expm(sys.a(), t);
  const Matrix q = q_inf.matrix() - e * q_inf.matrix() * e.transpose();
  return Gramian(SymmetricPSD::FromNearlySymmetric(q, q_inf.psd().policy()), t,
                 sys.Fingerprint(), GramianMethod::kAlgebraic);
}

Gramian GramianBlockExponential(const LinearSystem& sys, double t, RankPolicy policy) {
  RequireHorizon(t, "GramianBlockExponential");
  const int n = sys.state_dim();
  Matrix m = Matrix::Zero(2 * n, 2 * n);
  m.topLeftCorner(n, n) = sys.a();
  m.topRightCorner(n, n) = sys.control_weight();
  m.bottomRightCorner(n, n) = -sys.a().transpose();
  const Matrix e = Expm(m, t);
  const Matrix q = e.topRightCorner(n, n) * e.topLeftCorner(n, n).transpose();
  return Gramian(SymmetricPSD::FromNearlySymmetric(q, policy), t, sys.Fingerprint(),
                 GramianMethod::kBlockExponential);
}

// ---------------------------------------------------------------------------
// GramianFamily

GramianFamily::GramianFamily(LinearSystem sys, RankPolicy policy)
    : sys_(std::move(sys)), policy_(policy) {
  if (!sys_.is_stable()) return;
  if (sys_.is_commuting()) {
    q_inf_ = GramianCommutingClosedForm(sys_, kInfiniteHorizon, policy_);
  } else {
    q_inf_ = GramianInfinite(sys_, SymmetricOrdering::kRowMajorUpper, policy_);
  }
}

const Gramian& GramianFamily::Infinite() const {
  if (!q_inf_) {
    throw UnstableSystemError(
        "GramianFamily: Q_inf requested for a system that is not of negative type");
  }
  return *q_inf_;
}

Matrix GramianFamily::MatrixAt(double t) const {
  if (t == 0.0) return Matrix::Zero(sys_.state_dim(), sys_.state_dim());
  RequireHorizon(t, "GramianFamily");
  if (sys_.is_commuting()) {
    return SymmetricFunctionTimesWeight(sys_, t);
  }
  if (q_inf_) {
    const Matrix e = Expm(sys_.a(), t);
    return Symmetrize(q_inf_->matrix() - e * q_inf_->matrix() * e.transpose());
  }
  return GramianBlockExponential(sys_, t, policy_).matrix();
}

std::shared_ptr<const Gramian> GramianFamily::At(double t) const {
  {
    std::shared_lock lock(mutex_);
    auto it = cache_.find(t);
    if (it != cache_.end()) return it->second;
  }
  std::shared_ptr<const Gramian> g;
  if (t == 0.0) {
    // Represent Q_0 = 0 with a nominal positive horizon tag.
    g = std::make_shared<const Gramian>(SymmetricPSD::Zero(sys_.state_dim(), policy_),
                                        std::numeric_limits<double>::min(),
                                        sys_.Fingerprint(), GramianMethod::kClosedForm);
  } else {
    const GramianMethod method =
        sys_.is_commuting() ? GramianMethod::kClosedForm
        : q_inf_            ? GramianMethod::kAlgebraic
                            : GramianMethod::kBlockExponential;
    g = std::make_shared<const Gramian>(
        SymmetricPSD::FromNearlySymmetric(MatrixAt(t), policy_), t, sys_.Fingerprint(),
        method);
  }
  std::unique_lock lock(mutex_);
  auto [it, inserted] = cache_.emplace(t, std::move(g));
  return it->second;
}

std::size_t GramianFamily::cache_size() const {
  std::shared_lock lock(mutex_);
  return cache_.size();
}

// ---------------------------------------------------------------------------
// Structural checks

KernelChainReport KernelChainCheck(const LinearSystem& sys,
                                   const std::vector<double>& times, RankPolicy policy) {
  if (times.empty()) throw DomainError("KernelChainCheck: empty time list");
  for (std::size_t i = 0; i < times.size(); ++i) {
    RequireHorizon(times[i], "KernelChainCheck");
    if (i > 0 && !(times[i] > times[i - 1])) {
      throw DomainError("KernelChainCheck: times must be strictly ascending");
    }
  }
  KernelChainReport report;
  report.commuting = sys.is_commuting();
  const double tol = policy.InclusionTolerance();
  const SymmetricPSD weight = SymmetricPSD::FromNearlySymmetric(sys.control_weight(), policy);
  const Matrix control_kernel = weight.KernelBasis();
  report.control_kernel_dim = static_cast<int>(control_kernel.cols());
  const double b_norm = SpectralNorm(sys.b());

  auto flag = [&](const std::string& msg, const Vector& v) {
    report.violations.push_back(msg);
    if (report.offending_vector.size() == 0) report.offending_vector = v;
  };

  std::optional<Matrix> previous;
  for (double t : times) {
    const Gramian g = GramianQuadrature(sys, t, {}, policy);
    const Matrix kernel = g.psd().KernelBasis();
    KernelChainLink link;
    link.t = t;
    link.kernel_dim = static_cast<int>(kernel.cols());
    if (kernel.cols() > 0) {
      if (previous) {
        const double scale = SpectralNorm(*previous);
        if (scale > 0.0) {
          const Matrix image = (*previous) * kernel;
          link.containment_residual = SpectralNorm(image) / scale;
          if (link.containment_residual > tol) {
            Eigen::Index worst;
            image.colwise().norm().maxCoeff(&worst);
            std::ostringstream os;
            os << "ker Q_" << t << " not contained in the kernel of the previous Gramian"
               << " (residual " << link.containment_residual << ")";
            report.inclusions_hold = false;
            flag(os.str(), kernel.col(worst));
          }
        }
      }
      if (b_norm > 0.0) {
        const Matrix image = sys.b().transpose() * kernel;
        link.control_residual = SpectralNorm(image) / b_norm;
        if (link.control_residual > tol) {
          Eigen::Index worst;
          image.colwise().norm().maxCoeff(&worst);
          std::ostringstream os;
          os << "ker Q_" << t << " not contained in ker B^T (residual "
             << link.control_residual << ")";
          report.inclusions_hold = false;
          flag(os.str(), kernel.col(worst));
        }
      }
    }
    link.angle_cosines_to_control_kernel = PrincipalAngleCosines(kernel, control_kernel);
    if (report.commuting) {
      const bool same_dim = kernel.cols() == control_kernel.cols();
      const bool aligned =
          link.angle_cosines_to_control_kernel.size() == 0 ||
          link.angle_cosines_to_control_kernel.minCoeff() >= 1.0 - tol;
      if (!same_dim || !aligned) {
        std::ostringstream os;
        os << "commuting case: ker Q_" << t << " (dim " << kernel.cols()
           << ") differs from ker B^T (dim " << control_kernel.cols() << ")";
        report.equalities_hold = false;
        flag(os.str(), control_kernel.cols() > 0 ? Vector(control_kernel.col(0))
                                                 : Vector(Vector::Zero(sys.state_dim())));
      }
    }
    report.links.push_back(std::move(link));
    previous = g.matrix();
  }
  return report;
}

RangeEqualityReport RangeEqualityCheck(const LinearSystem& sys, double t, double t0,
                                       RankPolicy policy) {
  RequireHorizon(t, "RangeEqualityCheck");
  if (!(t0 > 0.0)) throw DomainError("RangeEqualityCheck: T0 must be positive");
  const GramianFamily family(sys, policy);
  const Gramian& q_inf = family.Infinite();
  const SymmetricPSD q_t = SymmetricPSD::FromNearlySymmetric(family.MatrixAt(t), policy);
  const Matrix root_t = PsdSqrt(q_t).matrix();
  const Matrix root_inf = PsdSqrt(q_inf.psd()).matrix();

  RangeEqualityReport report;
  report.t = t;
  report.t0 = t0;
  report.finite_in_infinite = RangeInclusion(root_t, root_inf, policy);
  report.infinite_in_finite = RangeInclusion(root_inf, root_t, policy);
  report.equal = report.finite_in_infinite.included && report.infinite_in_finite.included;
  const bool commuting = sys.is_commuting();
  if (commuting) {
    report.full_ranges_equal = RangeInclusion(q_t.matrix(), q_inf.matrix(), policy).included &&
                               RangeInclusion(q_inf.matrix(), q_t.matrix(), policy).included;
  }
  report.equality_expected = commuting || t >= t0;
  report.verdict = !report.equality_expected ||
                   (report.equal && report.full_ranges_equal.value_or(true));
  return report;
}

}  // namespace mincontrol
