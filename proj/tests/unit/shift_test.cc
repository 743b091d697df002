#include "mincontrol/shift.h"

#include <cmath>

#include <gtest/gtest.h>

#include "mincontrol/errors.h"

namespace mincontrol {
namespace {

TEST(ShiftSystemTest, CellCountMustBeMultipleOfFour) {
  EXPECT_THROW(ShiftSystem(30), DomainError);
  EXPECT_THROW(ShiftSystem(0), DomainError);
  EXPECT_EQ(ShiftSystem(32).control_cells(), 8);
}

TEST(ShiftControlMapTest, ConstantControlReachesRampAtTimeOne) {
  for (int m : {16, 64}) {
    const ShiftSystem sys(m);
    const Matrix map = ShiftControlMap(sys, 1.0);
    const Vector y = map * Vector::Ones(map.cols());
    EXPECT_LE((y - ShiftRampTarget(m)).cwiseAbs().maxCoeff(), 1e-14) << m;
  }
}

TEST(ShiftControlMapTest, StatesReachableByQuarterVanishBeyondHalf) {
  const ShiftSystem sys(64);
  const Matrix map = ShiftControlMap(sys, 0.25);
  EXPECT_EQ(map.bottomRows(32).norm(), 0.0);
  EXPECT_THROW(ShiftControlMap(sys, 0.3 / 64.0), DomainError);
}

TEST(ShiftTargetTest, RampMatchesCellAverages) {
  const Vector f = CellAverages(64, [](double s) { return std::min(s, 0.25); });
  EXPECT_LE((f - ShiftRampTarget(64)).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(ShiftDefectTest, ZeroTargetHasZeroDefect) {
  const ShiftSystem sys(32);
  EXPECT_EQ(ShiftReachableDefect(sys, 0.25, Vector::Zero(32)).defect, 0.0);
}

TEST(ShiftDefectTest, QuarterTimeDefectBoundedByTail) {
  const double tail = 1.0 / (4.0 * std::sqrt(2.0));
  for (int m : {64, 128, 256}) {
    const ShiftSystem sys(m);
    const ShiftDefect d = ShiftReachableDefect(sys, 0.25, ShiftRampTarget(m));
    EXPECT_NEAR(d.tail_norm, tail, 1e-14);
    EXPECT_GE(d.defect, tail - 1e-12);
    EXPECT_LE(ShiftReachableDefect(sys, 1.0, ShiftRampTarget(m)).defect, 1e-10);
  }
}

TEST(ShiftDefectTest, WrongTargetLengthThrows) {
  EXPECT_THROW(ShiftReachableDefect(ShiftSystem(16), 1.0, Vector::Zero(8)), DimensionError);
}

}  // namespace
}  // namespace mincontrol
