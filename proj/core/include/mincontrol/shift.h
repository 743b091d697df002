#pragma once

#include <functional>

#include "mincontrol/operator_core.h"

namespace mincontrol {

/// Transport semigroup (e^{tA} f)(s) = f(s - t) 1[s > t] on L^2(0, 1),
/// discretized by m cell averages, with control u(t) chi_[0, 1/4].
class ShiftSystem {
 public:
  /// Throws DomainError unless m is a positive multiple of 4.
  explicit ShiftSystem(int m);

  int cells() const { return m_; }
  int control_cells() const { return m_ / 4; }
  double cell_width() const { return 1.0 / m_; }

 private:
  int m_;
};

/// Cell averages of the reachable state at time t under piecewise-constant
/// controls on steps of one cell width: column k is the response to u = 1 on
/// [k h, (k+1) h]. t must be a positive multiple of the cell width.
Matrix ShiftControlMap(const ShiftSystem& sys, double t);

/// Cell averages of f by 8-point Gauss-Legendre on each cell.
Vector CellAverages(int m, const std::function<double(double)>& f);

/// Exact cell averages of f(s) = min(s, 1/4).
Vector ShiftRampTarget(int m);

struct ShiftDefect {
  /// L^2 distance from the target to the reachable subspace.
  double defect = 0.0;
  /// L^2 norm of the target on (1/2, 1], the part no state reachable by
  /// t = 1/4 can carry.
  double tail_norm = 0.0;
  /// Least-squares controls (one per step).
  Vector controls;
};

ShiftDefect ShiftReachableDefect(const ShiftSystem& sys, double t, const Vector& target,
                                 RankPolicy policy = RankPolicy{});

}  // namespace mincontrol
