#pragma once

#include <functional>
#include <string>

#include "mincontrol/gramian.h"

namespace mincontrol {

/// Diagonal model A e_n = -lambda_n e_n, BB^T e_n = b_n e_n on N modes.
class SpectralSystem {
 public:
  /// lambdas strictly increasing and positive, bs >= 0. Throws DomainError or
  /// DimensionError otherwise.
  SpectralSystem(Vector lambdas, Vector bs);
  /// Variant taking log b_n directly, for sequences that underflow
  /// (log b = -inf encodes b = 0).
  static SpectralSystem FromLogB(Vector lambdas, Vector log_bs);

  const Vector& lambdas() const { return lambdas_; }
  const Vector& bs() const { return bs_; }
  const Vector& log_bs() const { return log_bs_; }
  int size() const { return static_cast<int>(lambdas_.size()); }

  /// A = diag(-lambda), B = diag(sqrt(b)).
  LinearSystem ToLinearSystem() const;
  /// sup b_n / lambda_n over the truncation.
  double SupBOverLambda() const;

 private:
  SpectralSystem() = default;
  void Validate() const;

  Vector lambdas_;
  Vector bs_;
  Vector log_bs_;
};

/// diag((1 - e^{-2 lambda_n t}) b_n / (2 lambda_n)); t may be infinite.
Gramian SpectralGramian(const SpectralSystem& sys, double t, RankPolicy policy = RankPolicy{});

struct SpectralNullControllability {
  bool satisfied = false;
  /// sup_n 2 lambda_n / (b_n (e^{2 lambda_n T0} - 1)); +inf when some b_n = 0.
  double constant = 0.0;
  double log_constant = 0.0;
  int argmax_mode = 0;
  bool all_positive = false;
  /// Ratio is non-increasing over the last quarter of the truncation.
  bool tail_non_increasing = false;
};

/// Evaluates the diagonal null-controllability ratio in log space.
SpectralNullControllability SpectralNullControllabilityTest(const SpectralSystem& sys,
                                                            double t0);

struct SpectralHClassification {
  bool finite_support = false;
  int support_size = 0;
  /// Fitted slope of log(b_n / lambda_n) against log lambda_n.
  double slope = 0.0;
  /// R(Q_inf) ~ D(A^s) with s = -slope; R(Q_inf^{1/2}) ~ D(A^{s/2}).
  double s_range = 0.0;
  double s_half = 0.0;
  /// Power-law exponent alpha for b_n = lambda_n^alpha (alpha = 1 - s).
  double alpha = 0.0;
  /// Max deviation of the log data from the fitted line.
  double fit_residual = 0.0;
  std::string range_label;
  std::string half_label;
  /// |s(2N) - s(N)| when computed from a preset; NaN otherwise.
  double tail_sensitivity = 0.0;
};

SpectralHClassification ClassifySpectralH(const SpectralSystem& sys);

/// Named sequence generator (lambda_n, log b_n), n = 1, 2, ...
struct SpectralPreset {
  std::string name;
  std::function<double(int)> lambda;
  std::function<double(int)> log_b;
  int default_modes = 32;

  SpectralSystem Truncate(int modes) const;
};

/// spectral:landau-ginzburg, spectral:power-law(alpha),
/// spectral:finite-support(k), spectral:double-exp. Throws DomainError for
/// unknown names.
SpectralPreset ParseSpectralPreset(const std::string& spec);

/// Classification on N modes plus the N -> 2N tail sensitivity.
SpectralHClassification ClassifySpectralPreset(const SpectralPreset& preset, int modes);

}  // namespace mincontrol
