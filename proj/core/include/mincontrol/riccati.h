#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mincontrol/gramian.h"
#include "mincontrol/min_energy.h"

namespace mincontrol {

/// Time-parametrized operator family t -> S(t), represented in X coordinates
/// and tested in the H geometry.
class RiccatiCandidate {
 public:
  enum class Kind { kPvFamily, kCommutingClosedForm, kProjected, kTabulated, kCustom };
  using Evaluator = std::function<Matrix(double)>;

  RiccatiCandidate(Kind kind, Evaluator evaluator, std::string label, double t_min = 0.0);

  Kind kind() const { return kind_; }
  const std::string& label() const { return label_; }
  /// Lower end of the admissible time interval (exclusive when zero).
  double t_min() const { return t_min_; }

  /// Throws DomainError for t below t_min.
  Matrix At(double t) const;

 private:
  Kind kind_;
  Evaluator evaluator_;
  std::string label_;
  double t_min_;
};

std::string ToString(RiccatiCandidate::Kind kind);

/// P_V(t) = Q_inf Q_t^+.
Matrix BuildPv(const GramianFamily& family, double t);

/// The same operator assembled as F^{*H} F with F = Q_inf^{1/2}(Q_t^{1/2})^+
/// and F^{*H} = Q_inf F^T Q_inf^+.
Matrix BuildPvHExtension(const HGeometry& geom, const GramianFamily& family, double t);

/// P_V as a candidate on [t0, inf). Throws UnstableSystemError for unstable
/// systems and PreconditionError when null controllability fails at t0.
RiccatiCandidate PvCandidate(std::shared_ptr<const GramianFamily> family, double t0);

/// R_V(t) = Q_t^+ as an X-space candidate.
RiccatiCandidate InverseGramianCandidate(std::shared_ptr<const GramianFamily> family);

/// base(t) + shift * I.
RiccatiCandidate ShiftedCandidate(const RiccatiCandidate& base, double shift);

/// P S(t) P.
RiccatiCandidate ProjectedCandidate(const RiccatiCandidate& base, const Matrix& projection);

/// Entrywise natural cubic spline through tabulated (t_k, S_k); needs >= 4
/// strictly ascending nodes. Evaluation is limited to [t_0, t_last].
RiccatiCandidate TabulatedCandidate(std::vector<double> times, std::vector<Matrix> values,
                                    std::string label = "tabulated");

/// Largest-singular-value norm of M as an operator on H.
double HOperatorNorm(const HGeometry& geom, const Matrix& m);
/// Smallest singular value of M as an operator on H (restricted to H).
double HSigmaMin(const HGeometry& geom, const Matrix& m);
/// ||P_H (M^T G - G M) P_H|| / max(||G M||, tiny): zero iff M is H-symmetric.
double HSymmetryDefect(const HGeometry& geom, const Matrix& m);
/// Smallest eigenvalue of the H-quadratic form of M, relative to its norm.
double HMinRayleigh(const HGeometry& geom, const Matrix& m);

/// Orthonormal basis of R(q) followed by n_random seeded random vectors of
/// R(q) (unit length).
Matrix RangeProbes(const SymmetricPSD& q, int n_random, std::uint64_t seed);

struct ResidualSample {
  double t = 0.0;
  int probe_i = 0;
  int probe_j = 0;
  double lhs = 0.0;
  double rhs = 0.0;
  /// |lhs - rhs|.
  double residual = 0.0;
  /// residual / scale.
  double scaled = 0.0;
};

struct ResidualReport {
  std::string equation;
  std::vector<double> times;
  std::vector<double> steps;
  std::vector<double> max_scaled_per_time;
  std::vector<ResidualSample> samples;
  double max_scaled = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

struct ResidualOptions {
  /// Central-difference step; zero selects 1e-4 * max(1, t).
  double step = 0.0;
  double tolerance = 1e-6;
  /// Keep per-pair samples (needed for CSV output).
  bool keep_samples = true;
};

/// d/dt <P x, y>_H = -<Ax, Q_inf^+ P y> - <Q_inf^+ P x, Ay> - <B^T Q_inf^+ P x, B^T Q_inf^+ P y>.
ResidualReport RiccatiResidualH(const RiccatiCandidate& cand, const LinearSystem& sys,
                                const HGeometry& geom, const std::vector<double>& times,
                                const Matrix& probes, const ResidualOptions& options = {});

/// d/dt <R x, y> = -<Ax, R y> - <R x, Ay> - <B^T R x, B^T R y>.
ResidualReport RiccatiResidualX(const RiccatiCandidate& cand, const LinearSystem& sys,
                                const std::vector<double>& times, const Matrix& probes,
                                const ResidualOptions& options = {});

/// d/dt <P x, y>_H = -<Ax, P y>_H - <P x, Ay>_H + 2 <A P x, P y>_H. Requires
/// the commuting symmetric case (PreconditionError otherwise).
ResidualReport RiccatiResidualCommuting(const RiccatiCandidate& cand, const LinearSystem& sys,
                                        const HGeometry& geom,
                                        const std::vector<double>& times, const Matrix& probes,
                                        const ResidualOptions& options = {});

/// Max over probe pairs of |commuting RHS - general RHS| / scale at time t.
double CommutingRhsConsistency(const RiccatiCandidate& cand, const LinearSystem& sys,
                               const HGeometry& geom, double t, const Matrix& probes);

/// Max over probe pairs of the scaled gap between the finite-difference
/// derivative of <P_V x, y>_H and -<e^{tA}BB^Te^{tA^T} Q_t^+ x, P_V y>_H.
double PvDerivativeIdentityGap(const GramianFamily& family, const HGeometry& geom, double t,
                               const Matrix& probes, double step = 0.0);

struct ReconstructionPoint {
  double t = 0.0;
  double sigma_min = 0.0;
  bool invertible = true;
  /// ||S(t)^{-1} Q_inf - Q_t|| / ||Q_t||.
  double mismatch = 0.0;
  /// Differential Lyapunov residual of t -> S(t)^{-1} Q_inf, relative to ||BB^T||.
  double lyapunov_residual = 0.0;
};

struct ReconstructionReport {
  double t0 = 0.0;
  /// ||S(t0) - P_V(t0)|| / ||P_V(t0)||.
  double initial_mismatch = 0.0;
  bool initial_condition_ok = false;
  std::vector<ReconstructionPoint> points;
  bool pass = false;
  std::string note;
};

/// Forms S(t)^{-1} Q_inf on the grid, compares with Q_t and checks its
/// differential Lyapunov residual.
ReconstructionReport UniquenessReconstruction(const RiccatiCandidate& cand,
                                              const GramianFamily& family, double t0,
                                              const std::vector<double>& t_grid,
                                              double match_tol = 1e-6);

/// (I - e^{tA} K e^{tA})^{-1}. Throws PreconditionError outside the
/// commuting symmetric case or for K not H-symmetric non-negative, and
/// MarginError when 1 - ||e^{tA}Ke^{tA}||_H <= margin, i.e. for t <= T1.
Matrix CommutingFamily(const LinearSystem& sys, const HGeometry& geom, const Matrix& k,
                       double t, double margin = 1e-6);

struct T1Estimate {
  double t1 = 0.0;
  /// Smallest H singular value of I - e^{tA}Ke^{tA} at t1.
  double margin_at_t1 = 0.0;
  int evaluations = 0;
};

/// inf{t : sigma_min(I - e^{sA}Ke^{sA}) > margin for all s >= t}, found by
/// bisection on 1 - ||e^{tA}Ke^{tA}||_H, which is monotone in t.
T1Estimate DetectT1(const LinearSystem& sys, const HGeometry& geom, const Matrix& k,
                    double margin = 1e-6);

/// t -> (I - e^{(t - t_ref)A} K e^{(t - t_ref)A})^{-1} on (t_min, inf).
RiccatiCandidate CommutingCandidate(const LinearSystem& sys, const HGeometry& geom,
                                    const Matrix& k, double t_ref, double t_min);

struct RecoverLReport {
  Matrix l;
  double t_star = 0.0;
  std::vector<double> grid;
  std::vector<double> errors;
  double max_error = 0.0;
  bool pass = false;
};

/// L = I - S(T*)^{-1}, then checks S(t) = (I - e^{(t-T*)A} L e^{(t-T*)A})^{-1}
/// on the forward grid. Throws PreconditionError if S(T*) is not invertible
/// or S fails a residual pretest.
RecoverLReport RecoverL(const RiccatiCandidate& cand, const LinearSystem& sys,
                        const HGeometry& geom, double t_star, const std::vector<double>& grid,
                        double tol = 1e-6);

struct ProjectedCheckReport {
  /// Range condition S(t) P z in R(P) for every probe z and time.
  bool range_condition = false;
  double range_defect = 0.0;
  /// P S P passes the commuting residual.
  bool is_solution = false;
  double residual = 0.0;
  bool consistent = false;
  Vector witness;
  double witness_time = 0.0;
};

/// Tests the range condition and, independently, the commuting residual of
/// P S P. Throws PreconditionError unless P is an H-orthogonal projection
/// commuting with A.
ProjectedCheckReport ProjectedSolutionCheck(const RiccatiCandidate& cand, const Matrix& p,
                                            const LinearSystem& sys, const HGeometry& geom,
                                            const std::vector<double>& times,
                                            const Matrix& probes,
                                            const ResidualOptions& options = {});

struct LyapunovReport {
  std::string mode;
  std::vector<double> times;
  /// Spectral-norm residuals, absolute.
  std::vector<double> residuals;
  double max_residual = 0.0;
  /// max_residual / ||BB^T|| (or max_residual when BB^T = 0).
  double max_scaled = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

/// ||Q'(t) - AQ - QA^T - BB^T|| by Richardson-extrapolated central differences.
LyapunovReport LyapunovResidualDifferential(const std::function<Matrix(double)>& q,
                                            const LinearSystem& sys,
                                            const std::vector<double>& times,
                                            double tolerance = 1e-7, double step = 0.0);

/// ||AQ + QA^T + BB^T||.
LyapunovReport LyapunovResidualAlgebraic(const Matrix& q, const LinearSystem& sys,
                                         double tolerance = 1e-10);

}  // namespace mincontrol
