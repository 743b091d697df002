#include "mincontrol/delay.h"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "mincontrol/errors.h"

namespace mincontrol {
namespace {

double Horner(const Vector& c, double x) {
  double v = 0.0;
  for (Eigen::Index i = c.size() - 1; i >= 0; --i) v = v * x + c(i);
  return v;
}

// Integral of f over [0, tau] with `panels` equal 8-point Gauss-Legendre panels.
template <typename F>
double Gauss(F&& f, double tau, int panels) {
  if (tau <= 0.0) return 0.0;
  const double w = tau / panels;
  double total = 0.0;
  for (int p = 0; p < panels; ++p) {
    const double mid = (p + 0.5) * w;
    double s = 0.0;
    for (int i = 0; i < 8; ++i) {
      s += GaussLegendre8::kWeights[i] * f(mid + 0.5 * w * GaussLegendre8::kNodes[i]);
    }
    total += 0.5 * w * s;
  }
  return total;
}

}  // namespace

DelaySystem::DelaySystem(double a0, double a1, double b0, double d, int mesh)
    : a0_(a0), a1_(a1), b0_(b0), d_(d), mesh_(mesh) {
  if (!std::isfinite(a0) || !std::isfinite(a1) || !std::isfinite(b0) || !std::isfinite(d)) {
    throw DomainError("DelaySystem: non-finite parameter");
  }
  if (a1 == 0.0) throw DomainError("DelaySystem: a1 must be nonzero");
  if (b0 == 0.0) throw DomainError("DelaySystem: b0 must be nonzero");
  if (!(d > 0.0)) throw DomainError("DelaySystem: delay d must be positive");
  if (mesh < 4) {
    throw ResolutionError("DelaySystem: mesh must have at least 4 cells");
  }
  const double delta = d / mesh;
  if (delta * (std::abs(a0) + std::abs(a1)) > 1.0) {
    std::ostringstream os;
    os << "DelaySystem: mesh too coarse, cell width " << delta
       << " exceeds 1 / (|a0| + |a1|) = " << 1.0 / (std::abs(a0) + std::abs(a1));
    throw ResolutionError(os.str());
  }
}

// ---------------------------------------------------------------------------

DelayFundamentalSolution::DelayFundamentalSolution(const DelaySystem& sys, double t_max)
    : a0_(sys.a0()), d_(sys.d()), t_max_(t_max) {
  if (!(t_max >= 0.0) || !std::isfinite(t_max)) {
    throw DomainError("DelayFundamentalSolution: t_max must be finite and >= 0");
  }
  const int count = static_cast<int>(std::floor(t_max / d_)) + 2;
  const double c = sys.a1() * std::exp(-sys.a0() * d_);
  segments_.reserve(count);
  segments_.push_back(Vector::Ones(1));
  for (int k = 1; k < count; ++k) {
    const Vector& prev = segments_.back();
    Vector next = Vector::Zero(prev.size() + 1);
    next(0) = Horner(prev, d_);
    for (Eigen::Index i = 0; i < prev.size(); ++i) next(i + 1) = c * prev(i) / (i + 1.0);
    segments_.push_back(std::move(next));
  }
  g_at_start_.assign(count, 0.0);
  gg_at_start_.assign(count, 0.0);
  for (int k = 1; k < count; ++k) {
    g_at_start_[k] = g_at_start_[k - 1] + SegmentIntegral(k - 1, d_);
    gg_at_start_[k] =
        gg_at_start_[k - 1] + g_at_start_[k - 1] * d_ + SegmentDoubleIntegral(k - 1, d_);
  }
}

double DelayFundamentalSolution::SegmentIntegral(int k, double tau) const {
  const Vector& p = segments_[k];
  const double start = k * d_;
  const int panels = 1 + static_cast<int>(std::ceil(2.0 * std::abs(a0_) * tau)) +
                     static_cast<int>(p.size() / 8);
  return Gauss([&](double s) { return std::exp(a0_ * (start + s)) * Horner(p, s); }, tau,
               panels);
}

double DelayFundamentalSolution::SegmentDoubleIntegral(int k, double tau) const {
  const Vector& p = segments_[k];
  const double start = k * d_;
  const int panels = 1 + static_cast<int>(std::ceil(2.0 * std::abs(a0_) * tau)) +
                     static_cast<int>((p.size() + 1) / 8);
  return Gauss(
      [&](double s) { return (tau - s) * std::exp(a0_ * (start + s)) * Horner(p, s); }, tau,
      panels);
}

double DelayFundamentalSolution::Evaluate(double t) const {
  if (t < 0.0) return 0.0;
  if (t > t_max_ * (1.0 + 1e-12) + 1e-300) {
    throw DomainError("DelayFundamentalSolution: t beyond t_max");
  }
  const int k = std::min(static_cast<int>(std::floor(t / d_)),
                         static_cast<int>(segments_.size()) - 1);
  return std::exp(a0_ * t) * Horner(segments_[k], t - k * d_);
}

double DelayFundamentalSolution::Integral(double t) const {
  if (t <= 0.0) return 0.0;
  if (t > t_max_ * (1.0 + 1e-12)) throw DomainError("DelayFundamentalSolution: t beyond t_max");
  const int k = std::min(static_cast<int>(std::floor(t / d_)),
                         static_cast<int>(segments_.size()) - 1);
  return g_at_start_[k] + SegmentIntegral(k, t - k * d_);
}

double DelayFundamentalSolution::DoubleIntegral(double t) const {
  if (t <= 0.0) return 0.0;
  if (t > t_max_ * (1.0 + 1e-12)) throw DomainError("DelayFundamentalSolution: t beyond t_max");
  const int k = std::min(static_cast<int>(std::floor(t / d_)),
                         static_cast<int>(segments_.size()) - 1);
  const double tau = t - k * d_;
  return gg_at_start_[k] + g_at_start_[k] * tau + SegmentDoubleIntegral(k, tau);
}

// ---------------------------------------------------------------------------

Gramian DelayGramian(const DelaySystem& sys, double t, RankPolicy policy) {
  if (!(t > 0.0) || !std::isfinite(t)) {
    throw DomainError("DelayGramian: t must be positive and finite");
  }
  const int m = sys.mesh();
  const int n = sys.state_dim();
  const double delta = sys.cell_width();
  const double root = std::sqrt(delta);
  const DelayFundamentalSolution g(sys, t + 1e-9 * (1.0 + t));
  // Panels aligned to the delta lattice, where every kink of the integrand lies.
  const int full = static_cast<int>(std::floor(t / delta + 1e-12));
  std::vector<std::pair<double, double>> panels;
  for (int i = 0; i < full; ++i) {
    panels.emplace_back(i * sys.d() / m, (i + 1) * sys.d() / m);
  }
  if (panels.empty() || panels.back().second < t) {
    const double lo = panels.empty() ? 0.0 : panels.back().second;
    if (t - lo > 1e-14 * t) panels.emplace_back(lo, t);
  }
  Matrix phi(n, 8 * static_cast<Eigen::Index>(panels.size()));
  Eigen::Index col = 0;
  for (const auto& [lo, hi] : panels) {
    const double half = 0.5 * (hi - lo);
    const double mid = 0.5 * (hi + lo);
    for (int i = 0; i < 8; ++i) {
      const double r = mid + half * GaussLegendre8::kNodes[i];
      const double w = std::sqrt(GaussLegendre8::kWeights[i] * half);
      phi(0, col) = w * g.Evaluate(r);
      for (int j = 0; j < m; ++j) {
        const double avg = (g.Integral(r - j * delta) - g.Integral(r - (j + 1) * delta)) / delta;
        phi(j + 1, col) = w * root * avg;
      }
      ++col;
    }
  }
  const Matrix q = (sys.b0() * sys.b0()) * (phi * phi.transpose());
  // No finite generator matrix exists for the fingerprint; hash the parameters.
  Matrix params(1, 5);
  params << sys.a0(), sys.a1(), sys.b0(), sys.d(), static_cast<double>(m);
  const LinearSystem tag(Matrix::Zero(1, 1), params);
  return Gramian(SymmetricPSD::FromNearlySymmetric(q, policy), t, tag.Fingerprint(),
                 GramianMethod::kQuadrature);
}

Matrix DelaySemigroup(const DelaySystem& sys, double t) {
  if (!(t >= 0.0) || !std::isfinite(t)) {
    throw DomainError("DelaySemigroup: t must be finite and >= 0");
  }
  const int m = sys.mesh();
  const int n = sys.state_dim();
  const double d = sys.d();
  const double delta = sys.cell_width();
  const double root = std::sqrt(delta);
  const double a1 = sys.a1();
  const DelayFundamentalSolution g(sys, t + d + 1e-9 * (1.0 + t + d));
  Matrix e = Matrix::Zero(n, n);
  // Column 0: x0 = 1, zero history.
  e(0, 0) = t == 0.0 ? 1.0 : g.Evaluate(t);
  for (int k = 0; k < m; ++k) {
    const double hi = t - k * delta;
    const double lo = t - (k + 1) * delta;
    e(k + 1, 0) = root * (g.Integral(hi) - g.Integral(lo)) / delta;
  }
  // Columns j + 1: history 1/sqrt(delta) on cell j.
  for (int j = 0; j < m; ++j) {
    const double c_hi = (j + 1) * delta - d;
    const double c_lo = j * delta - d;
    const double scale = a1 / root;
    if (t > 0.0) e(0, j + 1) = scale * (g.Integral(t + c_hi) - g.Integral(t + c_lo));
    const double cell_lo = -(j + 1) * delta;
    const double cell_hi = -j * delta;
    for (int k = 0; k < m; ++k) {
      const double s_hi = t - k * delta;
      const double s_lo = t - (k + 1) * delta;
      double integral = 0.0;
      // Part of the window at or after time 0: propagated history.
      const double p_lo = std::max(s_lo, 0.0);
      if (s_hi > p_lo) {
        integral += scale * (g.DoubleIntegral(s_hi + c_hi) - g.DoubleIntegral(p_lo + c_hi) -
                             g.DoubleIntegral(s_hi + c_lo) + g.DoubleIntegral(p_lo + c_lo));
      }
      // Part before time 0: the initial history itself.
      const double h_lo = std::max(s_lo, cell_lo);
      const double h_hi = std::min(std::min(s_hi, 0.0), cell_hi);
      if (h_hi > h_lo) integral += (h_hi - h_lo) / root;
      e(k + 1, j + 1) = root * integral / delta;
    }
  }
  return e;
}

double DelayBoundaryResidual(const DelaySystem& sys, const Gramian& q) {
  const double root = std::sqrt(sys.cell_width());
  const Matrix& m = q.matrix();
  double worst = 0.0;
  for (Eigen::Index i = 0; i < m.cols(); ++i) {
    const Vector v = m.col(i);
    const double x0 = v(0);
    const Vector c = v.tail(v.size() - 1) / root;
    const double scale = std::max(std::abs(x0), c.cwiseAbs().maxCoeff());
    if (scale == 0.0) continue;
    const double extrapolated = 1.5 * c(0) - 0.5 * c(1);
    worst = std::max(worst, std::abs(x0 - extrapolated) / scale);
  }
  return worst;
}

DelayNullControllability DelayNullControllabilityTest(const DelaySystem& sys, double t0,
                                                      RankPolicy policy) {
  const Gramian q = DelayGramian(sys, t0, policy);
  const Matrix e = DelaySemigroup(sys, t0);
  const RangeInclusionResult inc = RangeInclusion(e, PsdSqrt(q.psd()).matrix(), policy);
  DelayNullControllability out;
  out.t0 = t0;
  out.satisfied = inc.included;
  out.constant = inc.included ? inc.constant_k * inc.constant_k : inc.constant_k;
  out.residual = inc.residual;
  out.expected = t0 > sys.d();
  out.witness = inc.witness;
  return out;
}

}  // namespace mincontrol
