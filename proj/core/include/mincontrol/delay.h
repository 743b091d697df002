#pragma once

#include <vector>

#include "mincontrol/gramian.h"
#include "mincontrol/min_energy.h"

namespace mincontrol {

/// x'(t) = a0 x(t) + a1 x(t - d) + b0 u(t) on the state space R x L^2(-d, 0).
/// The segment space is discretized by cell averages on `mesh` uniform cells;
/// cell j covers [-(j+1) delta, -j delta] with delta = d / mesh. Discrete
/// states use orthonormal coordinates (x0, sqrt(delta) c_0, ...).
class DelaySystem {
 public:
  /// Throws DomainError for a1 = 0, b0 = 0, d <= 0 and ResolutionError when
  /// the mesh cannot resolve the coefficients (mesh < 4 or
  /// delta (|a0| + |a1|) > 1).
  DelaySystem(double a0, double a1, double b0, double d, int mesh);

  double a0() const { return a0_; }
  double a1() const { return a1_; }
  double b0() const { return b0_; }
  double d() const { return d_; }
  int mesh() const { return mesh_; }
  double cell_width() const { return d_ / mesh_; }
  int state_dim() const { return mesh_ + 1; }

 private:
  double a0_, a1_, b0_, d_;
  int mesh_;
};

/// Fundamental solution g(t) = x(t; (1, 0), 0) = e^{a0 t} y(t), where y is a
/// polynomial of degree k on [k d, (k+1) d] produced by the method of steps.
class DelayFundamentalSolution {
 public:
  DelayFundamentalSolution(const DelaySystem& sys, double t_max);

  double t_max() const { return t_max_; }
  /// Coefficients of y on segment k in the local variable tau = t - k d,
  /// lowest order first.
  const std::vector<Vector>& segments() const { return segments_; }

  /// g(t); zero for t < 0. Throws DomainError beyond t_max.
  double Evaluate(double t) const;
  /// G(t) = int_0^t g; zero for t <= 0.
  double Integral(double t) const;
  /// int_0^t G.
  double DoubleIntegral(double t) const;

 private:
  double a0_, d_, t_max_;
  std::vector<Vector> segments_;
  // G and its integral at segment starts, for piecewise evaluation.
  std::vector<double> g_at_start_;
  std::vector<double> gg_at_start_;
  double SegmentIntegral(int k, double tau) const;
  double SegmentDoubleIntegral(int k, double tau) const;
};

/// b0^2 int_0^t phi(r) phi(r)^T dr with phi(r) = (g(r), sqrt(delta) *
/// cell averages of g(r + theta)), i.e. the Gramian compressed to the mesh.
Gramian DelayGramian(const DelaySystem& sys, double t, RankPolicy policy = RankPolicy{});

/// Cell-averaged free evolution over time t in orthonormal coordinates.
Matrix DelaySemigroup(const DelaySystem& sys, double t);

/// Max over columns v = (x0, sqrt(delta) c) of Q of
/// |x0 - (1.5 c_0 - 0.5 c_1)| / max(|x0|, max|c|), the discrete form of the
/// boundary condition x_1(0) = x_0 on R(Q).
double DelayBoundaryResidual(const DelaySystem& sys, const Gramian& q);

struct DelayNullControllability {
  double t0 = 0.0;
  bool satisfied = false;
  /// Smallest c with ||e^{T0 A^T} z||^2 <= c <Q_{T0} z, z>.
  double constant = 0.0;
  double residual = 0.0;
  /// Predicted by the delay threshold (T0 > d).
  bool expected = false;
  Vector witness;
};

DelayNullControllability DelayNullControllabilityTest(const DelaySystem& sys, double t0,
                                                      RankPolicy policy = RankPolicy{});

}  // namespace mincontrol
