#include "mincontrol/shift.h"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/SVD>

#include "mincontrol/errors.h"

namespace mincontrol {

ShiftSystem::ShiftSystem(int m) : m_(m) {
  if (m <= 0 || m % 4 != 0) {
    std::ostringstream os;
    os << "ShiftSystem: cell count must be a positive multiple of 4, got " << m;
    throw DomainError(os.str());
  }
}

Matrix ShiftControlMap(const ShiftSystem& sys, double t) {
  const int m = sys.cells();
  const double h = sys.cell_width();
  const double steps_real = t * m;
  const int steps = static_cast<int>(std::lround(steps_real));
  if (!(t > 0.0) || steps < 1 || std::abs(steps_real - steps) > 1e-9 * std::max(1.0, steps_real)) {
    throw DomainError("ShiftControlMap: t must be a positive multiple of the cell width");
  }
  const int q = sys.control_cells();
  Matrix map = Matrix::Zero(m, steps);
  // Step k is applied over elapsed transport time sigma in [j h, (j+1) h],
  // j = steps - k - 1. Averaging chi_[0, qh](s - sigma) over cell i and that
  // window gives h, h/2 at the two edges, and 0 elsewhere.
  for (int k = 0; k < steps; ++k) {
    const int j = steps - k - 1;
    for (int i = j; i <= std::min(j + q, m - 1); ++i) {
      const int offset = i - j;
      map(i, k) = (offset == 0 || offset == q) ? 0.5 * h : h;
    }
  }
  return map;
}

Vector CellAverages(int m, const std::function<double(double)>& f) {
  if (m <= 0) throw DomainError("CellAverages: m must be positive");
  Vector out(m);
  const double h = 1.0 / m;
  for (int i = 0; i < m; ++i) {
    const double mid = (i + 0.5) * h;
    double s = 0.0;
    for (int k = 0; k < 8; ++k) {
      s += GaussLegendre8::kWeights[k] * f(mid + 0.5 * h * GaussLegendre8::kNodes[k]);
    }
    out(i) = 0.5 * s;
  }
  return out;
}

Vector ShiftRampTarget(int m) {
  if (m <= 0 || m % 4 != 0) throw DomainError("ShiftRampTarget: m must be a multiple of 4");
  const double h = 1.0 / m;
  const int q = m / 4;
  Vector out(m);
  for (int i = 0; i < m; ++i) out(i) = i < q ? (i + 0.5) * h : 0.25;
  return out;
}

ShiftDefect ShiftReachableDefect(const ShiftSystem& sys, double t, const Vector& target,
                                 RankPolicy policy) {
  const int m = sys.cells();
  if (target.size() != m) throw DimensionError("ShiftReachableDefect: target length");
  const Matrix map = ShiftControlMap(sys, t);
  const double h = sys.cell_width();
  ShiftDefect out;
  out.tail_norm = std::sqrt(h) * target.tail(m / 2).norm();
  if (target.isZero(0.0)) {
    out.controls = Vector::Zero(map.cols());
    return out;
  }
  Eigen::BDCSVD<Matrix> svd(map, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& s = svd.singularValues();
  const double cut = policy.Cutoff(s(0));
  int rank = 0;
  while (rank < s.size() && s(rank) > cut) ++rank;
  const Matrix u = svd.matrixU().leftCols(rank);
  const Vector coeff = u.transpose() * target;
  out.defect = std::sqrt(h) * (target - u * coeff).norm();
  out.controls = svd.matrixV().leftCols(rank) *
                 (coeff.array() / s.head(rank).array()).matrix();
  return out;
}

}  // namespace mincontrol
