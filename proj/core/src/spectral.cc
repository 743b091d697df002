#include "mincontrol/spectral.h"

#include <cmath>
#include <iomanip>
#include <limits>
#include <regex>
#include <sstream>

#include "mincontrol/errors.h"

namespace mincontrol {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// log(e^x - 1) for x > 0 without overflow.
double LogExpm1(double x) {
  if (x > 30.0) return x + std::log1p(-std::exp(-x));
  return std::log(std::expm1(x));
}

std::string DomainLabel(double s) {
  // Round to the nearest 1/100 so that fitted exponents print cleanly.
  const double r = std::round(s * 100.0) / 100.0;
  std::ostringstream os;
  if (r == 0.0) return "X = D(A^0)";
  os << "D(A^" << r << ")";
  return os.str();
}

}  // namespace

SpectralSystem::SpectralSystem(Vector lambdas, Vector bs)
    : lambdas_(std::move(lambdas)), bs_(std::move(bs)) {
  if (lambdas_.size() != bs_.size()) {
    throw DimensionError("SpectralSystem: lambdas and bs differ in length");
  }
  log_bs_.resize(bs_.size());
  for (int i = 0; i < bs_.size(); ++i) {
    log_bs_(i) = bs_(i) > 0.0 ? std::log(bs_(i)) : -kInf;
  }
  Validate();
}

SpectralSystem SpectralSystem::FromLogB(Vector lambdas, Vector log_bs) {
  if (lambdas.size() != log_bs.size()) {
    throw DimensionError("SpectralSystem: lambdas and log_bs differ in length");
  }
  SpectralSystem s;
  s.lambdas_ = std::move(lambdas);
  s.log_bs_ = std::move(log_bs);
  s.bs_.resize(s.log_bs_.size());
  for (int i = 0; i < s.bs_.size(); ++i) s.bs_(i) = std::exp(s.log_bs_(i));
  s.Validate();
  return s;
}

void SpectralSystem::Validate() const {
  if (lambdas_.size() == 0) throw DomainError("SpectralSystem: no modes");
  for (int i = 0; i < lambdas_.size(); ++i) {
    if (!(lambdas_(i) > 0.0) || !std::isfinite(lambdas_(i))) {
      throw DomainError("SpectralSystem: lambda_n must be positive and finite");
    }
    if (i > 0 && !(lambdas_(i) > lambdas_(i - 1))) {
      throw DomainError("SpectralSystem: lambda_n must be strictly increasing");
    }
    if (!(bs_(i) >= 0.0) || !std::isfinite(bs_(i)) || std::isnan(log_bs_(i))) {
      throw DomainError("SpectralSystem: b_n must be finite and non-negative");
    }
  }
}

LinearSystem SpectralSystem::ToLinearSystem() const {
  const int n = size();
  Matrix a = Matrix::Zero(n, n);
  Matrix b = Matrix::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    a(i, i) = -lambdas_(i);
    b(i, i) = std::sqrt(bs_(i));
  }
  return LinearSystem(std::move(a), std::move(b));
}

double SpectralSystem::SupBOverLambda() const {
  return (bs_.array() / lambdas_.array()).maxCoeff();
}

Gramian SpectralGramian(const SpectralSystem& sys, double t, RankPolicy policy) {
  if (!(t > 0.0) || std::isnan(t)) throw DomainError("SpectralGramian: t must be positive");
  const int n = sys.size();
  Matrix q = Matrix::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    const double lam = sys.lambdas()(i);
    const double factor = t == kInfiniteHorizon ? 1.0 : -std::expm1(-2.0 * lam * t);
    q(i, i) = factor * sys.bs()(i) / (2.0 * lam);
  }
  return Gramian(SymmetricPSD(q, policy), t, sys.ToLinearSystem().Fingerprint(),
                 GramianMethod::kClosedForm);
}

SpectralNullControllability SpectralNullControllabilityTest(const SpectralSystem& sys,
                                                            double t0) {
  if (!(t0 > 0.0) || !std::isfinite(t0)) {
    throw DomainError("SpectralNullControllabilityTest: T0 must be positive and finite");
  }
  SpectralNullControllability out;
  const int n = sys.size();
  Vector log_ratio(n);
  out.all_positive = true;
  for (int i = 0; i < n; ++i) {
    const double lam = sys.lambdas()(i);
    const double lb = sys.log_bs()(i);
    if (!std::isfinite(lb)) {
      out.all_positive = false;
      log_ratio(i) = kInf;
    } else {
      log_ratio(i) = std::log(2.0 * lam) - lb - LogExpm1(2.0 * lam * t0);
    }
  }
  Eigen::Index arg = 0;
  out.log_constant = log_ratio.maxCoeff(&arg);
  out.argmax_mode = static_cast<int>(arg) + 1;
  out.constant = std::exp(out.log_constant);
  const int tail_start = n - std::max(2, n / 4);
  out.tail_non_increasing = true;
  for (int i = std::max(tail_start, 0) + 1; i < n; ++i) {
    if (log_ratio(i) > log_ratio(i - 1) + 1e-12 * std::max(1.0, std::abs(log_ratio(i - 1)))) {
      out.tail_non_increasing = false;
    }
  }
  out.satisfied = out.all_positive && std::isfinite(out.constant) && out.tail_non_increasing;
  return out;
}

SpectralHClassification ClassifySpectralH(const SpectralSystem& sys) {
  SpectralHClassification out;
  const int n = sys.size();
  int last_positive = -1;
  std::vector<int> support;
  for (int i = 0; i < n; ++i) {
    if (std::isfinite(sys.log_bs()(i))) {
      support.push_back(i);
      last_positive = i;
    }
  }
  out.support_size = static_cast<int>(support.size());
  // Finite support: b vanishes on a non-empty tail of the truncation.
  out.finite_support = last_positive < n - 1;
  out.tail_sensitivity = std::numeric_limits<double>::quiet_NaN();
  if (support.size() < 2) {
    out.slope = out.s_range = out.s_half = out.alpha = std::numeric_limits<double>::quiet_NaN();
    out.range_label = out.half_label = "finite-dimensional";
    return out;
  }
  const int k = static_cast<int>(support.size());
  Vector x(k), y(k);
  for (int j = 0; j < k; ++j) {
    const int i = support[j];
    x(j) = std::log(sys.lambdas()(i));
    y(j) = sys.log_bs()(i) - x(j);
  }
  const double xm = x.mean();
  const double ym = y.mean();
  const double sxx = (x.array() - xm).square().sum();
  out.slope = sxx > 0.0 ? ((x.array() - xm) * (y.array() - ym)).sum() / sxx : 0.0;
  const double intercept = ym - out.slope * xm;
  out.fit_residual = (y.array() - (intercept + out.slope * x.array())).abs().maxCoeff();
  out.s_range = -out.slope;
  out.s_half = 0.5 * out.s_range;
  out.alpha = 1.0 + out.slope;
  if (out.finite_support) {
    out.range_label = out.half_label = "finite-dimensional";
  } else {
    out.range_label = DomainLabel(out.s_range);
    out.half_label = DomainLabel(out.s_half);
  }
  return out;
}

SpectralSystem SpectralPreset::Truncate(int modes) const {
  if (modes < 1) throw DomainError("SpectralPreset: need at least one mode");
  Vector lam(modes), lb(modes);
  for (int i = 0; i < modes; ++i) {
    lam(i) = lambda(i + 1);
    lb(i) = log_b(i + 1);
  }
  return SpectralSystem::FromLogB(std::move(lam), std::move(lb));
}

SpectralPreset ParseSpectralPreset(const std::string& spec) {
  static const std::regex kPower(R"(spectral:power-law\(\s*([-+0-9.eE]+)\s*\))");
  static const std::regex kFinite(R"(spectral:finite-support\(\s*([0-9]+)\s*\))");
  SpectralPreset p;
  p.name = spec;
  std::smatch m;
  if (spec == "spectral:landau-ginzburg") {
    p.lambda = [](int n) { return static_cast<double>(n) * n; };
    p.log_b = [](int) { return 0.0; };
  } else if (std::regex_match(spec, m, kPower)) {
    const double alpha = std::stod(m[1].str());
    p.lambda = [](int n) { return static_cast<double>(n) * n; };
    p.log_b = [alpha](int n) { return alpha * std::log(static_cast<double>(n) * n); };
  } else if (std::regex_match(spec, m, kFinite)) {
    const int k = std::stoi(m[1].str());
    if (k < 1) throw DomainError("finite-support preset needs k >= 1");
    p.lambda = [](int n) { return static_cast<double>(n); };
    p.log_b = [k](int n) { return n <= k ? 0.0 : -kInf; };
  } else if (spec == "spectral:double-exp") {
    p.lambda = [](int n) { return static_cast<double>(n); };
    p.log_b = [](int n) { return -std::exp(static_cast<double>(n)); };
  } else {
    throw DomainError("unknown spectral preset '" + spec + "'");
  }
  return p;
}

SpectralHClassification ClassifySpectralPreset(const SpectralPreset& preset, int modes) {
  SpectralHClassification base = ClassifySpectralH(preset.Truncate(modes));
  const SpectralHClassification doubled = ClassifySpectralH(preset.Truncate(2 * modes));
  base.tail_sensitivity = std::abs(doubled.s_range - base.s_range);
  return base;
}

}  // namespace mincontrol
