#include "mincontrol/riccati.h"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include "mincontrol/errors.h"

namespace mincontrol {
namespace {

using MatrixFn = std::function<Matrix(double)>;

// Returns a positive step for central differences, or a negative one when t
// sits too close to t_min and the difference has to look forward only.
double ChooseStep(double t, double t_min, double requested) {
  if (t < t_min || (t_min == 0.0 && t <= 0.0)) {
    std::ostringstream os;
    os << "derivative requested at t = " << t << " below the lower limit " << t_min;
    throw DomainError(os.str());
  }
  double h = requested > 0.0 ? requested : 1e-4 * std::max(1.0, t);
  const double room = t - t_min;
  if (h < room) return h;
  if (room >= 0.2 * h) return 0.5 * room;
  return -h;
}

// Central (h > 0) or forward (h < 0) second-order differences with steps h
// and h/2 combined by Richardson.
Matrix Derivative(const MatrixFn& f, double t, double h) {
  if (h < 0.0) {
    const Matrix f0 = f(t);
    auto forward = [&](double s) {
      return Matrix((-3.0 * f0 + 4.0 * f(t + s) - f(t + 2.0 * s)) / (2.0 * s));
    };
    return (4.0 * forward(-0.5 * h) - forward(-h)) / 3.0;
  }
  auto central = [&](double s) { return Matrix((f(t + s) - f(t - s)) / (2.0 * s)); };
  return (4.0 * central(0.5 * h) - central(h)) / 3.0;
}

struct EquationTerms {
  Matrix lhs;
  std::vector<Matrix> rhs;
};

using TermsFn = std::function<EquationTerms(double t, double h)>;

ResidualReport EvaluateResidual(const std::string& equation, const std::vector<double>& times,
                                const Matrix& probes, const ResidualOptions& options,
                                double t_min, const TermsFn& terms) {
  if (times.empty()) throw DomainError(equation + ": empty time list");
  if (probes.cols() == 0) throw DomainError(equation + ": empty probe set");
  ResidualReport report;
  report.equation = equation;
  report.tolerance = options.tolerance;
  const int k = static_cast<int>(probes.cols());
  Vector norms(k);
  for (int i = 0; i < k; ++i) norms(i) = probes.col(i).norm();
  for (double t : times) {
    const double h = ChooseStep(t, t_min, options.step);
    const EquationTerms et = terms(t, h);
    Matrix rhs = Matrix::Zero(et.lhs.rows(), et.lhs.cols());
    double scale = SpectralNorm(et.lhs);
    for (const Matrix& term : et.rhs) {
      rhs += term;
      scale += SpectralNorm(term);
    }
    const Matrix lhs_p = probes.transpose() * et.lhs * probes;
    const Matrix rhs_p = probes.transpose() * rhs * probes;
    double worst = 0.0;
    for (int i = 0; i < k; ++i) {
      for (int j = 0; j < k; ++j) {
        ResidualSample s;
        s.t = t;
        s.probe_i = i;
        s.probe_j = j;
        s.lhs = lhs_p(i, j);
        s.rhs = rhs_p(i, j);
        s.residual = std::abs(s.lhs - s.rhs);
        const double sc = norms(i) * norms(j) * scale;
        s.scaled = sc > 0.0 ? s.residual / sc : s.residual;
        worst = std::max(worst, s.scaled);
        if (options.keep_samples) report.samples.push_back(s);
      }
    }
    report.times.push_back(t);
    report.steps.push_back(h);
    report.max_scaled_per_time.push_back(worst);
    report.max_scaled = std::max(report.max_scaled, worst);
  }
  report.pass = report.max_scaled <= options.tolerance;
  return report;
}

Matrix ProbeMatrixCheck(const Matrix& probes, int n, const char* what) {
  if (probes.rows() != n) {
    std::ostringstream os;
    os << what << ": probes have dimension " << probes.rows() << ", expected " << n;
    throw DimensionError(os.str());
  }
  return probes;
}

void RequireCommutingCase(const LinearSystem& sys, const char* what) {
  if (!sys.is_commuting()) {
    throw PreconditionError(std::string(what) +
                            ": requires A symmetric and commuting with BB^T");
  }
}

// Restriction of M to H in orthonormal H coordinates: Q^{+1/2} M Q^{1/2} U.
Matrix HCoordinates(const HGeometry& geom, const Matrix& m) {
  const Matrix u = geom.sqrt().RangeBasis();
  return geom.pinv_sqrt() * m * geom.sqrt().matrix() * u;
}

void ValidateK(const HGeometry& geom, const Matrix& k, int n, const char* what) {
  if (k.rows() != n || k.cols() != n) throw DimensionError(std::string(what) + ": K shape");
  RequireFinite(k, what);
  if (HSymmetryDefect(geom, k) > 1e-9) {
    throw PreconditionError(std::string(what) + ": K is not symmetric in H");
  }
  if (HMinRayleigh(geom, k) < -1e-10) {
    throw PreconditionError(std::string(what) + ": K is not non-negative in H");
  }
}

Matrix InvertOrThrow(const Matrix& m, const char* what) {
  Eigen::FullPivLU<Matrix> lu(m);
  if (!lu.isInvertible()) throw PreconditionError(std::string(what) + ": singular operator");
  return lu.inverse();
}

// Natural cubic spline second derivatives for matrix-valued samples.
std::vector<Matrix> SplineMoments(const std::vector<double>& t, const std::vector<Matrix>& y) {
  const int k = static_cast<int>(t.size());
  const Matrix zero = Matrix::Zero(y[0].rows(), y[0].cols());
  std::vector<Matrix> m(k, zero);
  if (k < 3) return m;
  // Thomas algorithm on interior nodes 1..k-2.
  std::vector<double> diag(k, 0.0), upper(k, 0.0);
  std::vector<Matrix> rhs(k, zero);
  for (int i = 1; i < k - 1; ++i) {
    const double h0 = t[i] - t[i - 1];
    const double h1 = t[i + 1] - t[i];
    diag[i] = 2.0 * (h0 + h1);
    upper[i] = h1;
    rhs[i] = 6.0 * ((y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0);
    if (i > 1) {
      const double w = h0 / diag[i - 1];
      diag[i] -= w * upper[i - 1];
      rhs[i] -= w * rhs[i - 1];
    }
  }
  for (int i = k - 2; i >= 1; --i) {
    Matrix r = rhs[i];
    if (i < k - 2) r -= upper[i] * m[i + 1];
    m[i] = r / diag[i];
  }
  return m;
}

}  // namespace

// ---------------------------------------------------------------------------

RiccatiCandidate::RiccatiCandidate(Kind kind, Evaluator evaluator, std::string label,
                                   double t_min)
    : kind_(kind), evaluator_(std::move(evaluator)), label_(std::move(label)), t_min_(t_min) {}

Matrix RiccatiCandidate::At(double t) const {
  if (!std::isfinite(t) || t < t_min_ || (t_min_ == 0.0 && t <= 0.0)) {
    std::ostringstream os;
    os << "RiccatiCandidate '" << label_ << "': t = " << t << " outside its domain (t_min "
       << t_min_ << ")";
    throw DomainError(os.str());
  }
  return evaluator_(t);
}

std::string ToString(RiccatiCandidate::Kind kind) {
  switch (kind) {
    case RiccatiCandidate::Kind::kPvFamily: return "pv_family";
    case RiccatiCandidate::Kind::kCommutingClosedForm: return "commuting_closed_form";
    case RiccatiCandidate::Kind::kProjected: return "projected";
    case RiccatiCandidate::Kind::kTabulated: return "tabulated";
    case RiccatiCandidate::Kind::kCustom: return "custom";
  }
  return "unknown";
}

namespace {
SymmetricPSD UncachedGramian(const GramianFamily& family, double t) {
  return SymmetricPSD::FromNearlySymmetric(family.MatrixAt(t), family.policy());
}
}  // namespace

Matrix BuildPv(const GramianFamily& family, double t) {
  return family.Infinite().matrix() * UncachedGramian(family, t).Pinv();
}

Matrix BuildPvHExtension(const HGeometry& geom, const GramianFamily& family, double t) {
  const Matrix f = geom.sqrt().matrix() * UncachedGramian(family, t).PinvSqrt();
  const Matrix f_star = geom.q_inf().matrix() * f.transpose() * geom.metric();
  return f_star * f;
}

RiccatiCandidate PvCandidate(std::shared_ptr<const GramianFamily> family, double t0) {
  family->Infinite();  // throws for unstable systems
  const NullControllability nc =
      NullControllabilityTest(family->system(), t0, family->policy());
  if (!nc.satisfied) {
    std::ostringstream os;
    os << "PvCandidate: null controllability fails at T0 = " << t0;
    throw PreconditionError(os.str());
  }
  return RiccatiCandidate(
      RiccatiCandidate::Kind::kPvFamily,
      [family](double t) { return BuildPv(*family, t); }, "P_V", t0);
}

RiccatiCandidate InverseGramianCandidate(std::shared_ptr<const GramianFamily> family) {
  return RiccatiCandidate(
      RiccatiCandidate::Kind::kCustom,
      [family](double t) {
        return SymmetricPSD::FromNearlySymmetric(family->MatrixAt(t), family->policy())
            .Pinv();
      },
      "R_V");
}

RiccatiCandidate ShiftedCandidate(const RiccatiCandidate& base, double shift) {
  return RiccatiCandidate(
      RiccatiCandidate::Kind::kCustom,
      [base, shift](double t) {
        Matrix m = base.At(t);
        m.diagonal().array() += shift;
        return m;
      },
      base.label() + "+shift", base.t_min());
}

RiccatiCandidate ProjectedCandidate(const RiccatiCandidate& base, const Matrix& projection) {
  return RiccatiCandidate(
      RiccatiCandidate::Kind::kProjected,
      [base, projection](double t) { return Matrix(projection * base.At(t) * projection); },
      "P(" + base.label() + ")P", base.t_min());
}

RiccatiCandidate TabulatedCandidate(std::vector<double> times, std::vector<Matrix> values,
                                    std::string label) {
  if (times.size() < 4 || times.size() != values.size()) {
    throw DomainError("TabulatedCandidate: need >= 4 nodes with one matrix each");
  }
  for (std::size_t i = 1; i < times.size(); ++i) {
    if (!(times[i] > times[i - 1])) {
      throw DomainError("TabulatedCandidate: times must be strictly ascending");
    }
    if (values[i].rows() != values[0].rows() || values[i].cols() != values[0].cols()) {
      throw DimensionError("TabulatedCandidate: inconsistent matrix shapes");
    }
  }
  auto moments = std::make_shared<const std::vector<Matrix>>(SplineMoments(times, values));
  auto t_ptr = std::make_shared<const std::vector<double>>(std::move(times));
  auto y_ptr = std::make_shared<const std::vector<Matrix>>(std::move(values));
  const double lo = t_ptr->front();
  return RiccatiCandidate(
      RiccatiCandidate::Kind::kTabulated,
      [t_ptr, y_ptr, moments](double t) {
        const auto& ts = *t_ptr;
        const auto& ys = *y_ptr;
        const auto& ms = *moments;
        if (t > ts.back()) throw DomainError("TabulatedCandidate: t beyond the table");
        auto it = std::upper_bound(ts.begin(), ts.end(), t);
        std::size_t i = std::min<std::size_t>(it - ts.begin(), ts.size() - 1);
        if (i == 0) i = 1;
        const double h = ts[i] - ts[i - 1];
        const double a = (ts[i] - t) / h;
        const double b = (t - ts[i - 1]) / h;
        return Matrix(a * ys[i - 1] + b * ys[i] +
                      ((a * a * a - a) * ms[i - 1] + (b * b * b - b) * ms[i]) * (h * h / 6.0));
      },
      std::move(label), lo);
}

// ---------------------------------------------------------------------------
// H-space helpers

double HOperatorNorm(const HGeometry& geom, const Matrix& m) {
  return SpectralNorm(HCoordinates(geom, m));
}

double HSigmaMin(const HGeometry& geom, const Matrix& m) {
  const Matrix c = HCoordinates(geom, m);
  if (c.cols() == 0) return 0.0;
  Eigen::JacobiSVD<Matrix> svd(c);
  return svd.singularValues()(svd.singularValues().size() - 1);
}

double HSymmetryDefect(const HGeometry& geom, const Matrix& m) {
  const Matrix& g = geom.metric();
  const Matrix proj = geom.sqrt().RangeProjector();
  const double scale = SpectralNorm(g * m);
  const double defect = SpectralNorm(proj * (m.transpose() * g - g * m) * proj);
  if (scale == 0.0) return defect;
  return defect / scale;
}

double HMinRayleigh(const HGeometry& geom, const Matrix& m) {
  const Matrix u = geom.sqrt().RangeBasis();
  const Matrix root_u = geom.sqrt().matrix() * u;
  const Matrix form = Symmetrize(root_u.transpose() * m.transpose() * geom.metric() * root_u);
  if (form.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(form, Eigen::EigenvaluesOnly);
  const double top = eig.eigenvalues().cwiseAbs().maxCoeff();
  if (top == 0.0) return 0.0;
  return eig.eigenvalues()(0) / top;
}

Matrix RangeProbes(const SymmetricPSD& q, int n_random, std::uint64_t seed) {
  const Matrix basis = q.RangeBasis();
  const int r = static_cast<int>(basis.cols());
  if (r == 0) return Matrix::Zero(q.size(), 0);
  std::mt19937_64 gen(seed);
  // 53 random bits -> [-1, 1), independent of library distribution details.
  auto uniform = [&gen]() { return 2.0 * std::ldexp(static_cast<double>(gen() >> 11), -53) - 1.0; };
  Matrix probes(q.size(), r + std::max(n_random, 0));
  probes.leftCols(r) = basis;
  for (int k = 0; k < n_random; ++k) {
    Vector c(r);
    for (int i = 0; i < r; ++i) c(i) = uniform();
    Vector v = basis * c;
    if (v.norm() == 0.0) v = basis.col(0);
    probes.col(r + k) = v.normalized();
  }
  return probes;
}

// ---------------------------------------------------------------------------
// Residuals

ResidualReport RiccatiResidualH(const RiccatiCandidate& cand, const LinearSystem& sys,
                                const HGeometry& geom, const std::vector<double>& times,
                                const Matrix& probes, const ResidualOptions& options) {
  ProbeMatrixCheck(probes, sys.state_dim(), "RiccatiResidualH");
  const Matrix& a = sys.a();
  const Matrix& g = geom.metric();
  const Matrix& w = sys.control_weight();
  const MatrixFn f = [&cand](double t) { return cand.At(t); };
  return EvaluateResidual("riccati_H", times, probes, options, cand.t_min(),
                          [&](double t, double h) {
                            const Matrix p = cand.At(t);
                            const Matrix gp = g * p;
                            EquationTerms et;
                            et.lhs = Derivative(f, t, h).transpose() * g;
                            et.rhs = {-a.transpose() * gp, -gp.transpose() * a,
                                      -gp.transpose() * w * gp};
                            return et;
                          });
}

ResidualReport RiccatiResidualX(const RiccatiCandidate& cand, const LinearSystem& sys,
                                const std::vector<double>& times, const Matrix& probes,
                                const ResidualOptions& options) {
  ProbeMatrixCheck(probes, sys.state_dim(), "RiccatiResidualX");
  const Matrix& a = sys.a();
  const Matrix& w = sys.control_weight();
  const MatrixFn f = [&cand](double t) { return cand.At(t); };
  return EvaluateResidual("riccati_X", times, probes, options, cand.t_min(),
                          [&](double t, double h) {
                            const Matrix r = cand.At(t);
                            EquationTerms et;
                            et.lhs = Derivative(f, t, h).transpose();
                            et.rhs = {-a.transpose() * r, -r.transpose() * a,
                                      -r.transpose() * w * r};
                            return et;
                          });
}

ResidualReport RiccatiResidualCommuting(const RiccatiCandidate& cand, const LinearSystem& sys,
                                        const HGeometry& geom,
                                        const std::vector<double>& times, const Matrix& probes,
                                        const ResidualOptions& options) {
  RequireCommutingCase(sys, "RiccatiResidualCommuting");
  ProbeMatrixCheck(probes, sys.state_dim(), "RiccatiResidualCommuting");
  const Matrix& a = sys.a();
  const Matrix& g = geom.metric();
  const MatrixFn f = [&cand](double t) { return cand.At(t); };
  return EvaluateResidual("riccati_commuting", times, probes, options, cand.t_min(),
                          [&](double t, double h) {
                            const Matrix p = cand.At(t);
                            const Matrix gp = g * p;
                            EquationTerms et;
                            et.lhs = Derivative(f, t, h).transpose() * g;
                            et.rhs = {-a.transpose() * gp, -gp.transpose() * a,
                                      2.0 * (a * p).transpose() * gp};
                            return et;
                          });
}

double CommutingRhsConsistency(const RiccatiCandidate& cand, const LinearSystem& sys,
                               const HGeometry& geom, double t, const Matrix& probes) {
  RequireCommutingCase(sys, "CommutingRhsConsistency");
  ProbeMatrixCheck(probes, sys.state_dim(), "CommutingRhsConsistency");
  const Matrix& a = sys.a();
  const Matrix& g = geom.metric();
  const Matrix p = cand.At(t);
  const Matrix gp = g * p;
  const Matrix quad_general = -gp.transpose() * sys.control_weight() * gp;
  const Matrix quad_commuting = 2.0 * (a * p).transpose() * gp;
  const double scale = 2.0 * SpectralNorm(a.transpose() * gp) + SpectralNorm(quad_general) +
                       SpectralNorm(quad_commuting);
  const Matrix diff = probes.transpose() * (quad_commuting - quad_general) * probes;
  double worst = 0.0;
  for (int i = 0; i < probes.cols(); ++i) {
    for (int j = 0; j < probes.cols(); ++j) {
      const double sc = probes.col(i).norm() * probes.col(j).norm() * scale;
      const double v = std::abs(diff(i, j));
      worst = std::max(worst, sc > 0.0 ? v / sc : v);
    }
  }
  return worst;
}

double PvDerivativeIdentityGap(const GramianFamily& family, const HGeometry& geom, double t,
                               const Matrix& probes, double step) {
  const Matrix& g = geom.metric();
  const MatrixFn pv = [&family](double s) { return BuildPv(family, s); };
  const double h = ChooseStep(t, 0.0, step);
  const Matrix lhs = Derivative(pv, t, h).transpose() * g;
  const Matrix e = Expm(family.system().a(), t);
  const Matrix rhs = -UncachedGramian(family, t).Pinv() * e * family.system().control_weight() *
                     e.transpose() * g * BuildPv(family, t);
  const double scale = SpectralNorm(lhs) + SpectralNorm(rhs);
  const Matrix diff = probes.transpose() * (lhs - rhs) * probes;
  double worst = 0.0;
  for (int i = 0; i < probes.cols(); ++i) {
    for (int j = 0; j < probes.cols(); ++j) {
      const double sc = probes.col(i).norm() * probes.col(j).norm() * scale;
      const double v = std::abs(diff(i, j));
      worst = std::max(worst, sc > 0.0 ? v / sc : v);
    }
  }
  return worst;
}

// ---------------------------------------------------------------------------
// Uniqueness reconstruction

ReconstructionReport UniquenessReconstruction(const RiccatiCandidate& cand,
                                              const GramianFamily& family, double t0,
                                              const std::vector<double>& t_grid,
                                              double match_tol) {
  const HGeometry geom(family.Infinite());
  const LinearSystem& sys = family.system();
  const Matrix& q_inf = family.Infinite().matrix();
  const double w_norm = SpectralNorm(sys.control_weight());
  ReconstructionReport report;
  report.t0 = t0;
  const Matrix pv0 = BuildPv(family, t0);
  report.initial_mismatch = SpectralNorm(cand.At(t0) - pv0) / SpectralNorm(pv0);
  report.initial_condition_ok = report.initial_mismatch <= 1e-8;
  report.note =
      "domain and difference-quotient hypotheses are vacuous in finite dimensions; "
      "checked: invertibility on H, H-symmetry, match at t0, Lyapunov residual";

  const MatrixFn reconstructed = [&cand, &q_inf](double t) {
    return Matrix(Pinv(cand.At(t)) * q_inf);
  };
  bool all_ok = report.initial_condition_ok;
  for (double t : t_grid) {
    ReconstructionPoint pt;
    pt.t = t;
    const Matrix s = cand.At(t);
    pt.sigma_min = HSigmaMin(geom, s);
    pt.invertible = pt.sigma_min > 1e-12 * std::max(1.0, HOperatorNorm(geom, s));
    if (!pt.invertible || HSymmetryDefect(geom, s) > 1e-9) {
      all_ok = false;
      report.points.push_back(pt);
      continue;
    }
    const Matrix rec = reconstructed(t);
    const Matrix qt = family.MatrixAt(t);
    pt.mismatch = SpectralNorm(rec - qt) / SpectralNorm(qt);
    const double h = ChooseStep(t, cand.t_min(), 0.0);
    const Matrix d = Derivative(reconstructed, t, h);
    const Matrix res = d - sys.a() * rec - rec * sys.a().transpose() - sys.control_weight();
    pt.lyapunov_residual = w_norm > 0.0 ? SpectralNorm(res) / w_norm : SpectralNorm(res);
    if (pt.mismatch > match_tol || pt.lyapunov_residual > match_tol) all_ok = false;
    report.points.push_back(pt);
  }
  report.pass = all_ok;
  return report;
}

// ---------------------------------------------------------------------------
// Commuting case

Matrix CommutingFamily(const LinearSystem& sys, const HGeometry& geom, const Matrix& k,
                       double t, double margin) {
  RequireCommutingCase(sys, "CommutingFamily");
  const int n = sys.state_dim();
  ValidateK(geom, k, n, "CommutingFamily");
  const Matrix e = Expm(sys.a(), t, true);
  const Matrix eke = e * k * e;
  const double gap = 1.0 - HOperatorNorm(geom, eke);
  if (gap <= margin) {
    std::ostringstream os;
    os << "CommutingFamily: 1 - ||e^{tA}Ke^{tA}||_H = " << gap << " <= " << margin
       << " at t = " << t;
    throw MarginError(os.str(), gap);
  }
  const Matrix m = Matrix::Identity(n, n) - eke;
  return InvertOrThrow(m, "CommutingFamily");
}

T1Estimate DetectT1(const LinearSystem& sys, const HGeometry& geom, const Matrix& k,
                    double margin) {
  RequireCommutingCase(sys, "DetectT1");
  const int n = sys.state_dim();
  ValidateK(geom, k, n, "DetectT1");
  if (!sys.is_stable()) throw PreconditionError("DetectT1: A must be of negative type");
  T1Estimate est;
  // e^{tA} is an H-selfadjoint contraction here, so ||e^{tA}Ke^{tA}||_H is
  // non-increasing and 1 - ||.||_H (the smallest singular value of
  // I - e^{tA}Ke^{tA} once it is positive) crosses the margin exactly once.
  // Isolated singular times before the crossing are never missed.
  auto gap = [&](double t) {
    ++est.evaluations;
    const Matrix e = Expm(sys.a(), t);
    return 1.0 - HOperatorNorm(geom, e * k * e);
  };
  if (gap(0.0) > margin) {
    est.t1 = 0.0;
    est.margin_at_t1 = gap(0.0);
    return est;
  }
  double lo = 0.0;
  double hi = 1.0 / sys.stability_margin();
  for (int i = 0; i < 60 && gap(hi) <= margin; ++i) {
    lo = hi;
    hi *= 2.0;
  }
  for (int i = 0; i < 200 && hi - lo > 1e-14 * std::max(1.0, hi); ++i) {
    const double mid = 0.5 * (lo + hi);
    if (gap(mid) <= margin) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  est.t1 = hi;
  est.margin_at_t1 = gap(hi);
  return est;
}

RiccatiCandidate CommutingCandidate(const LinearSystem& sys, const HGeometry& geom,
                                    const Matrix& k, double t_ref, double t_min) {
  RequireCommutingCase(sys, "CommutingCandidate");
  ValidateK(geom, k, sys.state_dim(), "CommutingCandidate");
  auto g = std::make_shared<const HGeometry>(geom);
  const Matrix a = sys.a();
  const int n = sys.state_dim();
  return RiccatiCandidate(
      RiccatiCandidate::Kind::kCommutingClosedForm,
      [g, a, k, t_ref, n](double t) {
        const Matrix e = Expm(a, t - t_ref, true);
        const Matrix m = Matrix::Identity(n, n) - e * k * e;
        const double sigma = HSigmaMin(*g, m);
        if (sigma <= 1e-12) {
          std::ostringstream os;
          os << "commuting family: I - e^{(t-t_ref)A}Ke^{(t-t_ref)A} singular at t = " << t;
          throw MarginError(os.str(), sigma);
        }
        return InvertOrThrow(m, "CommutingCandidate");
      },
      "commuting(K)", t_min);
}

RecoverLReport RecoverL(const RiccatiCandidate& cand, const LinearSystem& sys,
                        const HGeometry& geom, double t_star, const std::vector<double>& grid,
                        double tol) {
  RequireCommutingCase(sys, "RecoverL");
  const int n = sys.state_dim();
  const Matrix s_star = cand.At(t_star);
  const double sigma = HSigmaMin(geom, s_star);
  if (!(sigma > 1e-10 * std::max(1.0, HOperatorNorm(geom, s_star)))) {
    std::ostringstream os;
    os << "RecoverL: S(T*) is not invertible on H (sigma_min " << sigma << ")";
    throw PreconditionError(os.str());
  }
  {
    std::vector<double> pre = {t_star + 0.5 / std::max(sys.stability_margin(), 1e-3)};
    if (t_star > cand.t_min() && t_star > 0.0) pre.insert(pre.begin(), t_star);
    ResidualOptions opts;
    opts.keep_samples = false;
    const Matrix probes = geom.sqrt().RangeBasis();
    const ResidualReport r = RiccatiResidualCommuting(cand, sys, geom, pre, probes, opts);
    if (!r.pass) {
      std::ostringstream os;
      os << "RecoverL: family fails the commuting residual pretest (scaled residual "
         << r.max_scaled << ")";
      throw PreconditionError(os.str());
    }
  }
  RecoverLReport report;
  report.t_star = t_star;
  report.l = Matrix::Identity(n, n) - InvertOrThrow(s_star, "RecoverL");
  for (double t : grid) {
    if (t < t_star) throw DomainError("RecoverL: grid must lie at or beyond T*");
    const Matrix e = Expm(sys.a(), t - t_star);
    const Matrix closed = InvertOrThrow(Matrix::Identity(n, n) - e * report.l * e, "RecoverL");
    const Matrix s = cand.At(t);
    const double err = SpectralNorm(s - closed) / std::max(SpectralNorm(s), 1e-300);
    report.grid.push_back(t);
    report.errors.push_back(err);
    report.max_error = std::max(report.max_error, err);
  }
  report.pass = report.max_error <= tol;
  return report;
}

ProjectedCheckReport ProjectedSolutionCheck(const RiccatiCandidate& cand, const Matrix& p,
                                            const LinearSystem& sys, const HGeometry& geom,
                                            const std::vector<double>& times,
                                            const Matrix& probes,
                                            const ResidualOptions& options) {
  RequireCommutingCase(sys, "ProjectedSolutionCheck");
  const int n = sys.state_dim();
  if (p.rows() != n || p.cols() != n) throw DimensionError("ProjectedSolutionCheck: P shape");
  if (MaxAbs(p * p - p) > 1e-10 * std::max(1.0, MaxAbs(p))) {
    throw PreconditionError("ProjectedSolutionCheck: P is not a projection (P^2 != P)");
  }
  if (HSymmetryDefect(geom, p) > 1e-9) {
    throw PreconditionError("ProjectedSolutionCheck: P is not orthogonal in H");
  }
  if (!Commutes(sys.a(), p, 1e-10)) {
    throw PreconditionError("ProjectedSolutionCheck: P does not commute with A");
  }
  ProjectedCheckReport report;
  const Matrix id = Matrix::Identity(n, n);
  const double tol = geom.q_inf().psd().policy().InclusionTolerance();
  for (double t : times) {
    const Matrix s = cand.At(t);
    const Matrix sp = s * p;
    const Matrix escape = (id - p) * sp;
    const double scale = std::max(SpectralNorm(s), 1e-300);
    for (int j = 0; j < probes.cols(); ++j) {
      const double z = probes.col(j).norm();
      if (z == 0.0) continue;
      const double d = (escape * probes.col(j)).norm() / (scale * z);
      if (d > report.range_defect) {
        report.range_defect = d;
        report.witness = probes.col(j);
        report.witness_time = t;
      }
    }
  }
  report.range_condition = report.range_defect <= tol;
  if (report.range_condition) {
    report.witness.resize(0);
    report.witness_time = 0.0;
  }
  const RiccatiCandidate projected = ProjectedCandidate(cand, p);
  ResidualOptions opts = options;
  opts.keep_samples = false;
  const ResidualReport r = RiccatiResidualCommuting(projected, sys, geom, times, probes, opts);
  report.is_solution = r.pass;
  report.residual = r.max_scaled;
  report.consistent = report.is_solution == report.range_condition;
  return report;
}

// ---------------------------------------------------------------------------
// Lyapunov residuals

LyapunovReport LyapunovResidualDifferential(const std::function<Matrix(double)>& q,
                                            const LinearSystem& sys,
                                            const std::vector<double>& times,
                                            double tolerance, double step) {
  if (times.empty()) throw DomainError("LyapunovResidualDifferential: empty time grid");
  LyapunovReport report;
  report.mode = "differential";
  report.tolerance = tolerance;
  const double w_norm = SpectralNorm(sys.control_weight());
  for (double t : times) {
    const double h = ChooseStep(t, 0.0, step);
    const Matrix qt = q(t);
    const Matrix res = Derivative(q, t, h) - sys.a() * qt - qt * sys.a().transpose() -
                       sys.control_weight();
    const double r = SpectralNorm(res);
    report.times.push_back(t);
    report.residuals.push_back(r);
    report.max_residual = std::max(report.max_residual, r);
  }
  report.max_scaled = w_norm > 0.0 ? report.max_residual / w_norm : report.max_residual;
  report.pass = report.max_scaled <= tolerance;
  return report;
}

LyapunovReport LyapunovResidualAlgebraic(const Matrix& q, const LinearSystem& sys,
                                         double tolerance) {
  if (q.rows() != sys.state_dim() || q.cols() != sys.state_dim()) {
    throw DimensionError("LyapunovResidualAlgebraic: Q shape");
  }
  LyapunovReport report;
  report.mode = "algebraic";
  report.tolerance = tolerance;
  const Matrix res = sys.a() * q + q * sys.a().transpose() + sys.control_weight();
  report.max_residual = SpectralNorm(res);
  report.residuals.push_back(report.max_residual);
  const double w_norm = SpectralNorm(sys.control_weight());
  report.max_scaled = w_norm > 0.0 ? report.max_residual / w_norm : report.max_residual;
  report.pass = report.max_scaled <= tolerance;
  return report;
}

}  // namespace mincontrol
