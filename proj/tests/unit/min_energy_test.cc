#include "mincontrol/min_energy.h"

#include <cmath>
#include <memory>

#include <gtest/gtest.h>

#include "mincontrol/errors.h"
#include "test_systems.h"

namespace mincontrol {
namespace {

using testing::RandomStableSystem;
using testing::RandomVector;

LinearSystem Scalar() {
  return LinearSystem(Matrix::Constant(1, 1, -1.0), Matrix::Constant(1, 1, 1.0));
}

LinearSystem DoubleIntegrator() {
  Matrix a(2, 2);
  a << 0.0, 1.0, 0.0, 0.0;
  Matrix b(2, 1);
  b << 0.0, 1.0;
  return LinearSystem(a, b);
}

TEST(ValueFunctionTest, ScalarClosedForm) {
  const GramianFamily family(Scalar());
  const Vector x = Vector::Constant(1, 2.0);
  for (double t : {0.25, 1.0, 5.0}) {
    // V = 1/2 x^2 / Q_t with Q_t = (1 - e^{-2t}) / 2.
    const double want = 4.0 / (1.0 - std::exp(-2.0 * t));
    EXPECT_NEAR(ValueFunction(*family.At(t), x), want, 1e-13 * want);
  }
}

TEST(ValueFunctionTest, DoubleIntegratorClosedForm) {
  const GramianFamily family(DoubleIntegrator());
  const Vector x = (Vector(2) << 1.0, -0.5).finished();
  for (double t : {0.5, 2.0}) {
    Matrix qinv(2, 2);
    qinv << 12.0 / (t * t * t), -6.0 / (t * t), -6.0 / (t * t), 4.0 / t;
    const double want = 0.5 * x.dot(qinv * x);
    EXPECT_NEAR(ValueFunction(*family.At(t), x), want, 1e-11 * want);
  }
}

LinearSystem PartlyControlled() {
  Matrix a = Matrix::Zero(2, 2);
  a.diagonal() << -1.0, -2.0;
  Matrix b = Matrix::Zero(2, 1);
  b(0, 0) = 1.0;
  return LinearSystem(a, b);
}

TEST(ClassifyTargetTest, UncontrolledDirectionIsUnreachable) {
  const GramianFamily family(PartlyControlled());
  const Gramian& q = *family.At(1.0);
  EXPECT_EQ(ClassifyTarget(q, Vector::Unit(2, 0)).cls, ReachabilityClass::kInRangeQ);
  const Reachability r = ClassifyTarget(q, Vector::Unit(2, 1));
  EXPECT_EQ(r.cls, ReachabilityClass::kUnreachable);
  EXPECT_NEAR(r.defect, 1.0, 1e-12);
  EXPECT_THROW(ValueFunction(q, Vector::Unit(2, 1)), ReachabilityError);
  EXPECT_EQ(ValueFunction(q, Vector::Zero(2)), 0.0);
}

TEST(ClassifyTargetTest, DimensionMismatchThrows) {
  const GramianFamily family(Scalar());
  EXPECT_THROW(ClassifyTarget(*family.At(1.0), Vector::Zero(2)), DimensionError);
}

TEST(OptimalControlTest, SteersToTargetWithValueEnergy) {
  const LinearSystem sys = RandomStableSystem(11);
  const GramianFamily family(sys);
  const double t = 1.5;
  const Vector x = RandomVector(3, sys.state_dim());
  const Vector grid = UniformGrid(t, 2001);
  const ControlSignal u = OptimalControl(sys, *family.At(t), x, grid);
  const Matrix y = SimulateForward(sys, u, Vector::Zero(sys.state_dim()));
  EXPECT_LE((y.col(y.cols() - 1) - x).norm(), 1e-5 * x.norm());
  const double v = ValueFunction(*family.At(t), x);
  EXPECT_NEAR(u.Energy(), v, 1e-5 * v);
}

TEST(OptimalControlTest, TrajectoryStartsAtZeroAndEndsAtTarget) {
  const LinearSystem sys = RandomStableSystem(12);
  const GramianFamily family(sys);
  const Vector x = RandomVector(4, sys.state_dim());
  const Vector grid = UniformGrid(2.0, 41);
  const Matrix y = OptimalTrajectory(family, x, 2.0, grid);
  EXPECT_LE(y.col(0).norm(), 1e-12);
  EXPECT_LE((y.col(40) - x).norm(), 1e-10 * x.norm());
}

TEST(OptimalControlTest, FeedbackFormReproducesOpenLoop) {
  const LinearSystem sys = RandomStableSystem(13);
  const GramianFamily family(sys);
  const Vector x = RandomVector(5, sys.state_dim());
  EXPECT_LE(FeedbackConsistency(family, x, 1.0, UniformGrid(1.0, 21)), 1e-8);
}

TEST(ControlSignalTest, TrapezoidEnergyAndInterpolation) {
  const Vector grid = UniformGrid(1.0, 3);
  Matrix v(1, 3);
  v << 0.0, 1.0, 2.0;
  const ControlSignal u(grid, v);
  EXPECT_DOUBLE_EQ(u.horizon(), 1.0);
  // 1/2 int (2 r + 2)^2 on [-1, 0] by trapezoid on nodes {-1, -1/2, 0}.
  EXPECT_NEAR(u.Energy(), 0.5 * 0.5 * (0.5 * 0.0 + 1.0 + 0.5 * 4.0), 1e-15);
  EXPECT_NEAR(u.Evaluate(-0.25)(0), 1.5, 1e-15);
  EXPECT_THROW(ControlSignal(grid, Matrix::Zero(1, 2)), DimensionError);
}

TEST(BruteForceTest, ConvergesToValueFromAbove) {
  const LinearSystem sys = RandomStableSystem(14);
  const Vector x = RandomVector(6, sys.state_dim());
  const double v = ValueFunction(GramianQuadrature(sys, 1.0), x);
  double prev = std::numeric_limits<double>::infinity();
  for (int n : {100, 200, 400, 800}) {
    const BruteForceResult r = BruteForceMinEnergy(sys, x, 1.0, n);
    EXPECT_LE(r.energy, prev * (1 + 1e-12));
    EXPECT_GE(r.energy, v * (1 - 1e-10));
    EXPECT_LE(r.feasibility_residual, 1e-8 * x.norm());
    prev = r.energy;
  }
  EXPECT_LE(std::abs(prev - v) / v, 1e-4);
}

TEST(BruteForceTest, UnreachableTargetThrows) {
  EXPECT_THROW(BruteForceMinEnergy(PartlyControlled(), Vector::Unit(2, 1), 1.0, 50),
               ReachabilityError);
}

TEST(NullControllabilityTest, ScalarConstantClosedForm) {
  const double t0 = 0.7;
  const NullControllability r = NullControllabilityTest(Scalar(), t0);
  ASSERT_TRUE(r.satisfied);
  // sup_z |e^{T0 A} z|^2 / <Q_T0 z, z> = e^{-2 T0} / ((1 - e^{-2 T0}) / 2).
  const double want = 2.0 * std::exp(-2.0 * t0) / (1.0 - std::exp(-2.0 * t0));
  EXPECT_NEAR(r.constant, want, 1e-12 * want);
}

TEST(NullControllabilityTest, UncontrolledStableModeFails) {
  const NullControllability r = NullControllabilityTest(PartlyControlled(), 1.0);
  EXPECT_FALSE(r.satisfied);
  ASSERT_EQ(r.witness.size(), 2);
  EXPECT_NEAR(std::abs(r.witness(1)), 1.0, 1e-10);
}

TEST(HGeometryTest, NormAndDefect) {
  const GramianFamily family(RandomStableSystem(15));
  const HGeometry geom(family.Infinite());
  const Vector x = RandomVector(8, geom.size());
  const Matrix qinf = family.Infinite().matrix();
  const double want = std::sqrt(x.dot(qinf.inverse() * x));
  EXPECT_NEAR(geom.Norm(x), want, 1e-10 * want);
  EXPECT_NEAR(geom.Inner(x, x), want * want, 1e-9 * want * want);
  EXPECT_LE(geom.Defect(x), 1e-10);
}

TEST(HGeometryTest, NormOutsideRangeThrows) {
  const GramianFamily family(PartlyControlled());
  const HGeometry geom(family.Infinite());
  EXPECT_THROW(geom.Norm(Vector::Unit(2, 1)), ReachabilityError);
  EXPECT_NEAR(geom.Defect(Vector::Unit(2, 1)), 1.0, 1e-12);
}

}  // namespace
}  // namespace mincontrol
