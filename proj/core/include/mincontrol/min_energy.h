#pragma once

#include <string>

#include "mincontrol/gramian.h"

namespace mincontrol {

enum class ReachabilityClass { kInRangeQ, kInRangeQHalfOnly, kUnreachable };

std::string ToString(ReachabilityClass c);

struct Reachability {
  ReachabilityClass cls = ReachabilityClass::kUnreachable;
  /// ||(I - P) x|| for the projector onto R(Q_t^{1/2}).
  double defect = 0.0;
  /// ||(I - P) x|| for the projector onto R(Q_t).
  double defect_q = 0.0;
};

/// Decides membership of x in R(Q_t) and R(Q_t^{1/2}). Under a relative rank
/// policy the root keeps eigenvalues down to rel^2 * lambda_max, so the two
/// ranges differ exactly on the weakly controllable directions.
Reachability ClassifyTarget(const Gramian& qt, const Vector& x);

/// 1/2 ||(Q_t^{1/2})^+ x||^2. Throws ReachabilityError for unreachable x.
double ValueFunction(const Gramian& qt, const Vector& x);

/// Piecewise-linear control on an ascending grid from -t to 0.
class ControlSignal {
 public:
  /// values: one column per grid node. Throws DomainError unless the grid is
  /// strictly ascending and ends at 0.
  ControlSignal(Vector grid, Matrix values);

  const Vector& grid() const { return grid_; }
  const Matrix& values() const { return values_; }
  int input_dim() const { return static_cast<int>(values_.rows()); }
  double horizon() const { return -grid_(0); }

  /// 1/2 int ||u||^2 by the trapezoid rule on the grid.
  double Energy() const;
  Vector Evaluate(double r) const;

 private:
  Vector grid_;
  Matrix values_;
};

/// count equally spaced nodes on [-t, 0] (count >= 2).
Vector UniformGrid(double t, int count);

/// u(r) = B^T e^{-rA^T} Q_t^+ x sampled on the grid. Requires x in R(Q_t);
/// throws ReachabilityError otherwise.
ControlSignal OptimalControl(const LinearSystem& sys, const Gramian& qt, const Vector& x,
                             const Vector& grid);

/// y(r) = Q_{t+r} e^{-rA^T} Q_t^+ x on the grid (one column per node), with
/// the Gramians taken from the family's cache.
Matrix OptimalTrajectory(const GramianFamily& family, const Vector& x, double t,
                         const Vector& grid);

/// Forward solution of y' = Ay + Bu, y(-t) = y0, exact for piecewise-linear u.
/// Returns one column per grid node.
Matrix SimulateForward(const LinearSystem& sys, const ControlSignal& u, const Vector& y0);

/// B^T Q_s^+. Throws DomainError for s <= 0.
Matrix FeedbackGain(const GramianFamily& family, double s);

/// A + BB^T Q_s^+, the generator of the closed loop driven by the feedback.
Matrix ClosedLoopGenerator(const GramianFamily& family, double s);

/// max_r ||B^T Q_{t+r}^+ y(r) - u(r)|| / max_r ||u(r)|| over grid nodes with
/// t + r > 0.
double FeedbackConsistency(const GramianFamily& family, const Vector& x, double t,
                           const Vector& grid);

struct BruteForceResult {
  double energy = 0.0;
  /// m x n_steps piecewise-constant control values.
  Matrix controls;
  /// Weighted control-to-endpoint map (columns scaled by 1/sqrt(h)), so that
  /// energy = 1/2 |v|^2 for weighted controls v.
  Matrix weighted_map;
  /// Weighted least-norm solution.
  Vector weighted_controls;
  double feasibility_residual = 0.0;
};

/// Least-norm piecewise-constant control steering 0 to x in time t.
/// Throws ReachabilityError when x is not attainable at the rank policy.
BruteForceResult BruteForceMinEnergy(const LinearSystem& sys, const Vector& x, double t,
                                     int n_steps, RankPolicy policy = RankPolicy{});

struct NullControllability {
  bool satisfied = false;
  /// Smallest c with ||e^{T0 A^T} x||^2 <= c <Q_{T0} x, x>; +inf if none.
  double constant = 0.0;
  double residual = 0.0;
  Vector witness;
};

/// Range test R(e^{T0 A}) subset R(Q_{T0}^{1/2}).
NullControllability NullControllabilityTest(const LinearSystem& sys, double t0,
                                            RankPolicy policy = RankPolicy{});

/// The space H = R(Q_inf^{1/2}) with <x, y>_H = <Q_inf^{-1/2} x, Q_inf^{-1/2} y>.
class HGeometry {
 public:
  /// Throws PreconditionError unless q_inf has infinite horizon.
  explicit HGeometry(Gramian q_inf);

  const Gramian& q_inf() const { return q_inf_; }
  const SymmetricPSD& sqrt() const { return sqrt_; }
  const Matrix& pinv_sqrt() const { return pinv_sqrt_; }
  /// Q_inf^+, the Gram matrix of the H inner product.
  const Matrix& metric() const { return metric_; }
  int size() const { return q_inf_.psd().size(); }

  /// Defect of x against R(Q_inf^{1/2}).
  double Defect(const Vector& x) const;
  /// Throws ReachabilityError ("not in H") carrying the defect.
  double Norm(const Vector& x) const;
  double Inner(const Vector& x, const Vector& y) const;

 private:
  Gramian q_inf_;
  SymmetricPSD sqrt_;
  Matrix pinv_sqrt_;
  Matrix metric_;
};

}  // namespace mincontrol
