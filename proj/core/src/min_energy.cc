#include "mincontrol/min_energy.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include <Eigen/SVD>

#include "mincontrol/errors.h"

namespace mincontrol {
namespace {

double MembershipTolerance(const RankPolicy& policy, const Vector& x) {
  return policy.InclusionTolerance() * x.norm();
}

void RequireTargetDim(const Gramian& qt, const Vector& x, const char* what) {
  if (x.size() != qt.psd().size()) {
    std::ostringstream os;
    os << what << ": target has dimension " << x.size() << ", Gramian is "
       << qt.psd().size();
    throw DimensionError(os.str());
  }
}

Vector RequireRangeQ(const Gramian& qt, const Vector& x, const char* what) {
  RequireTargetDim(qt, x, what);
  const Reachability r = ClassifyTarget(qt, x);
  if (r.cls != ReachabilityClass::kInRangeQ) {
    std::ostringstream os;
    os << what << ": target is not in R(Q_t) (defect " << r.defect_q
       << "); the optimal control formula needs Q_t^{-1} x";
    throw ReachabilityError(os.str(), r.defect_q);
  }
  return qt.psd().Pinv() * x;
}

}  // namespace

std::string ToString(ReachabilityClass c) {
  switch (c) {
    case ReachabilityClass::kInRangeQ: return "in_range_Q";
    case ReachabilityClass::kInRangeQHalfOnly: return "in_range_Qhalf_only";
    case ReachabilityClass::kUnreachable: return "unreachable";
  }
  return "unknown";
}

Reachability ClassifyTarget(const Gramian& qt, const Vector& x) {
  RequireTargetDim(qt, x, "ClassifyTarget");
  Reachability out;
  const SymmetricPSD& q = qt.psd();
  const SymmetricPSD root = PsdSqrt(q);
  out.defect = (x - root.RangeProjector() * x).norm();
  out.defect_q = (x - q.RangeProjector() * x).norm();
  const double tol = MembershipTolerance(q.policy(), x);
  if (out.defect_q <= tol) {
    out.cls = ReachabilityClass::kInRangeQ;
  } else if (out.defect <= tol) {
    out.cls = ReachabilityClass::kInRangeQHalfOnly;
  } else {
    out.cls = ReachabilityClass::kUnreachable;
  }
  return out;
}

double ValueFunction(const Gramian& qt, const Vector& x) {
  const Reachability r = ClassifyTarget(qt, x);
  if (r.cls == ReachabilityClass::kUnreachable) {
    std::ostringstream os;
    os << "ValueFunction: target is outside R(Q_t^{1/2}) (defect " << r.defect << ")";
    throw ReachabilityError(os.str(), r.defect);
  }
  const Vector z = PsdSqrt(qt.psd()).Pinv() * x;
  return 0.5 * z.squaredNorm();
}

// ---------------------------------------------------------------------------

ControlSignal::ControlSignal(Vector grid, Matrix values)
    : grid_(std::move(grid)), values_(std::move(values)) {
  if (grid_.size() < 2) throw DomainError("ControlSignal: grid needs at least two nodes");
  if (values_.cols() != grid_.size()) {
    throw DimensionError("ControlSignal: one value column per grid node required");
  }
  for (int i = 1; i < grid_.size(); ++i) {
    if (!(grid_(i) > grid_(i - 1))) {
      throw DomainError("ControlSignal: grid must be strictly ascending");
    }
  }
  if (grid_(grid_.size() - 1) != 0.0) throw DomainError("ControlSignal: grid must end at 0");
  RequireFinite(values_, "ControlSignal");
}

double ControlSignal::Energy() const {
  double e = 0.0;
  for (int i = 1; i < grid_.size(); ++i) {
    const double h = grid_(i) - grid_(i - 1);
    e += 0.5 * h * (values_.col(i - 1).squaredNorm() + values_.col(i).squaredNorm());
  }
  return 0.5 * e;
}

Vector ControlSignal::Evaluate(double r) const {
  const int k = static_cast<int>(grid_.size());
  if (r <= grid_(0)) return values_.col(0);
  if (r >= grid_(k - 1)) return values_.col(k - 1);
  const auto* begin = grid_.data();
  const auto* it = std::upper_bound(begin, begin + k, r);
  const int i = static_cast<int>(it - begin);
  const double w = (r - grid_(i - 1)) / (grid_(i) - grid_(i - 1));
  return (1.0 - w) * values_.col(i - 1) + w * values_.col(i);
}

Vector UniformGrid(double t, int count) {
  if (!(t > 0.0) || !std::isfinite(t)) throw DomainError("UniformGrid: t must be positive");
  if (count < 2) throw DomainError("UniformGrid: need at least two nodes");
  Vector g(count);
  for (int i = 0; i < count; ++i) {
    g(i) = -t + t * static_cast<double>(i) / (count - 1);
  }
  g(count - 1) = 0.0;
  return g;
}

ControlSignal OptimalControl(const LinearSystem& sys, const Gramian& qt, const Vector& x,
                             const Vector& grid) {
  const Vector costate = RequireRangeQ(qt, x, "OptimalControl");
  const Matrix at = sys.a().transpose();
  Matrix values(sys.input_dim(), grid.size());
  for (int i = 0; i < grid.size(); ++i) {
    values.col(i) = sys.b().transpose() * (Expm(at, -grid(i)) * costate);
  }
  return ControlSignal(grid, std::move(values));
}

Matrix OptimalTrajectory(const GramianFamily& family, const Vector& x, double t,
                         const Vector& grid) {
  const auto qt = family.At(t);
  const Vector costate = RequireRangeQ(*qt, x, "OptimalTrajectory");
  const Matrix at = family.system().a().transpose();
  Matrix path(x.size(), grid.size());
  for (int i = 0; i < grid.size(); ++i) {
    const double r = grid(i);
    const double elapsed = std::max(0.0, t + r);
    path.col(i) = family.At(elapsed)->matrix() * (Expm(at, -r) * costate);
  }
  return path;
}

Matrix SimulateForward(const LinearSystem& sys, const ControlSignal& u, const Vector& y0) {
  const int n = sys.state_dim();
  const int m = sys.input_dim();
  if (u.input_dim() != m) throw DimensionError("SimulateForward: control dimension");
  if (y0.size() != n) throw DimensionError("SimulateForward: initial state dimension");
  const Vector& grid = u.grid();
  Matrix path(n, grid.size());
  path.col(0) = y0;
  // z = (y, u, u') with z' = [[A, B, 0], [0, 0, I], [0, 0, 0]] z.
  Matrix gen = Matrix::Zero(n + 2 * m, n + 2 * m);
  gen.topLeftCorner(n, n) = sys.a();
  gen.block(0, n, n, m) = sys.b();
  gen.block(n, n + m, m, m) = Matrix::Identity(m, m);
  std::map<double, Matrix> propagators;
  for (int i = 1; i < grid.size(); ++i) {
    const double h = grid(i) - grid(i - 1);
    auto it = propagators.find(h);
    if (it == propagators.end()) it = propagators.emplace(h, Expm(gen, h)).first;
    const Matrix& e = it->second;
    const Vector u0 = u.values().col(i - 1);
    const Vector slope = (u.values().col(i) - u0) / h;
    path.col(i) = e.topLeftCorner(n, n) * path.col(i - 1) + e.block(0, n, n, m) * u0 +
                  e.block(0, n + m, n, m) * slope;
  }
  return path;
}

Matrix FeedbackGain(const GramianFamily& family, double s) {
  if (!(s > 0.0)) throw DomainError("FeedbackGain: s must be positive");
  return family.system().b().transpose() * family.At(s)->psd().Pinv();
}

Matrix ClosedLoopGenerator(const GramianFamily& family, double s) {
  return family.system().a() + family.system().b() * FeedbackGain(family, s);
}

double FeedbackConsistency(const GramianFamily& family, const Vector& x, double t,
                           const Vector& grid) {
  const ControlSignal u = OptimalControl(family.system(), *family.At(t), x, grid);
  const Matrix path = OptimalTrajectory(family, x, t, grid);
  double worst = 0.0;
  double scale = 0.0;
  for (int i = 0; i < grid.size(); ++i) {
    scale = std::max(scale, u.values().col(i).norm());
    const double s = t + grid(i);
    if (s <= 1e-12 * t) continue;
    const Vector fb = FeedbackGain(family, s) * path.col(i);
    worst = std::max(worst, (fb - u.values().col(i)).norm());
  }
  return scale > 0.0 ? worst / scale : worst;
}

BruteForceResult BruteForceMinEnergy(const LinearSystem& sys, const Vector& x, double t,
                                     int n_steps, RankPolicy policy) {
  if (!(t > 0.0) || !std::isfinite(t)) {
    throw DomainError("BruteForceMinEnergy: t must be positive and finite");
  }
  if (n_steps < 1) throw DomainError("BruteForceMinEnergy: n_steps must be >= 1");
  const int n = sys.state_dim();
  const int m = sys.input_dim();
  if (x.size() != n) throw DimensionError("BruteForceMinEnergy: target dimension");
  const double h = t / n_steps;
  // exp(h [[A, B], [0, 0]]) = [[e^{hA}, int_0^h e^{sA} B ds], [0, I]].
  Matrix gen = Matrix::Zero(n + m, n + m);
  gen.topLeftCorner(n, n) = sys.a();
  gen.topRightCorner(n, m) = sys.b();
  const Matrix e = Expm(gen, h);
  const Matrix step = e.topLeftCorner(n, n);
  Matrix block = e.topRightCorner(n, m);

  BruteForceResult out;
  out.weighted_map.resize(n, static_cast<Eigen::Index>(m) * n_steps);
  const double inv_sqrt_h = 1.0 / std::sqrt(h);
  for (int k = n_steps - 1; k >= 0; --k) {
    out.weighted_map.block(0, static_cast<Eigen::Index>(k) * m, n, m) = inv_sqrt_h * block;
    block = step * block;
  }
  if (x.isZero(0.0)) {
    out.weighted_controls = Vector::Zero(out.weighted_map.cols());
  } else {
    Eigen::JacobiSVD<Matrix> svd(out.weighted_map.transpose(),
                                 Eigen::ComputeThinU | Eigen::ComputeThinV);
    // L^T = U S V^T, so L^+ x = U S^+ V^T x.
    const Vector& s = svd.singularValues();
    Vector coeff = svd.matrixV().transpose() * x;
    const double cut = s.size() > 0 ? policy.Cutoff(s(0)) : 0.0;
    for (int i = 0; i < s.size(); ++i) coeff(i) = s(i) > cut ? coeff(i) / s(i) : 0.0;
    out.weighted_controls = svd.matrixU() * coeff;
  }
  out.feasibility_residual = (out.weighted_map * out.weighted_controls - x).norm();
  if (out.feasibility_residual > policy.InclusionTolerance() * x.norm()) {
    std::ostringstream os;
    os << "BruteForceMinEnergy: target not attainable (residual "
       << out.feasibility_residual << ")";
    throw ReachabilityError(os.str(), out.feasibility_residual);
  }
  out.energy = 0.5 * out.weighted_controls.squaredNorm();
  out.controls = Eigen::Map<const Matrix>(out.weighted_controls.data(), m, n_steps) *
                 inv_sqrt_h;
  return out;
}

NullControllability NullControllabilityTest(const LinearSystem& sys, double t0,
                                            RankPolicy policy) {
  if (!(t0 > 0.0) || !std::isfinite(t0)) {
    throw DomainError("NullControllabilityTest: T0 must be positive and finite");
  }
  const GramianFamily family(sys, policy);
  const SymmetricPSD q = SymmetricPSD::FromNearlySymmetric(family.MatrixAt(t0), policy);
  const RangeInclusionResult inc =
      RangeInclusion(Expm(sys.a(), t0), PsdSqrt(q).matrix(), policy);
  NullControllability out;
  out.satisfied = inc.included;
  out.constant = inc.included ? inc.constant_k * inc.constant_k : inc.constant_k;
  out.residual = inc.residual;
  out.witness = inc.witness;
  return out;
}

// ---------------------------------------------------------------------------

HGeometry::HGeometry(Gramian q_inf)
    : q_inf_(std::move(q_inf)),
      sqrt_(PsdSqrt(q_inf_.psd())),
      pinv_sqrt_(sqrt_.Pinv()),
      metric_(q_inf_.psd().Pinv()) {
  if (!q_inf_.is_infinite()) {
    throw PreconditionError("HGeometry: expected an infinite-horizon Gramian");
  }
}

double HGeometry::Defect(const Vector& x) const {
  if (x.size() != size()) throw DimensionError("HGeometry: vector dimension");
  return (x - sqrt_.RangeProjector() * x).norm();
}

double HGeometry::Norm(const Vector& x) const {
  const double defect = Defect(x);
  if (defect > q_inf_.psd().policy().InclusionTolerance() * x.norm()) {
    std::ostringstream os;
    os << "HGeometry: vector is not in H = R(Q_inf^{1/2}) (defect " << defect << ")";
    throw ReachabilityError(os.str(), defect);
  }
  return (pinv_sqrt_ * x).norm();
}

double HGeometry::Inner(const Vector& x, const Vector& y) const {
  return x.dot(metric_ * y);
}

}  // namespace mincontrol
