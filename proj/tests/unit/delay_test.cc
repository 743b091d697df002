#include "mincontrol/delay.h"

#include <algorithm>
#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "mincontrol/errors.h"

namespace mincontrol {
namespace {

// Fundamental solution by classical RK4 on a grid commensurate with d, with
// the delayed term read from stored nodes and midpoints interpolated.
std::vector<double> Rk4Fundamental(double a0, double a1, double d, double t_max, int per_d) {
  const double h = d / per_d;
  const int steps = static_cast<int>(std::lround(t_max / h));
  std::vector<double> g(steps + 1);
  g[0] = 1.0;
  auto past = [&](int idx2) -> double {
    // idx2 indexes half steps; value of g at (idx2 / 2) h, zero before 0.
    if (idx2 < 0) return 0.0;
    if (idx2 % 2 == 0) return g[idx2 / 2];
    // Cubic through four nodes of the same delay segment, since g' jumps
    // at multiples of d.
    const int i = idx2 / 2;
    const int seg0 = (i / per_d) * per_d;
    const int j = std::clamp(i - 1, seg0, seg0 + per_d - 3);
    const double x = (i + 0.5) - j;
    double sum = 0.0;
    for (int a = 0; a < 4; ++a) {
      double w = 1.0;
      for (int b = 0; b < 4; ++b) {
        if (b != a) w *= (x - b) / (a - b);
      }
      sum += w * g[j + a];
    }
    return sum;
  };
  for (int k = 0; k < steps; ++k) {
    const int lag2 = 2 * per_d;
    const double d0 = past(2 * k - lag2);
    const double dm = past(2 * k + 1 - lag2);
    // The history jumps from 0 to 1 at 0, so the step ending at t = d sees
    // the left limit.
    const double d1 = 2 * k + 2 == lag2 ? 0.0 : past(2 * k + 2 - lag2);
    const double y = g[k];
    const double k1 = a0 * y + a1 * d0;
    const double k2 = a0 * (y + 0.5 * h * k1) + a1 * dm;
    const double k3 = a0 * (y + 0.5 * h * k2) + a1 * dm;
    const double k4 = a0 * (y + h * k3) + a1 * d1;
    g[k + 1] = y + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
  }
  return g;
}

TEST(DelaySystemTest, ConstructionChecks) {
  EXPECT_THROW(DelaySystem(0.0, 0.0, 1.0, 1.0, 16), DomainError);
  EXPECT_THROW(DelaySystem(0.0, 1.0, 0.0, 1.0, 16), DomainError);
  EXPECT_THROW(DelaySystem(0.0, 1.0, 1.0, -1.0, 16), DomainError);
  EXPECT_THROW(DelaySystem(0.0, 1.0, 1.0, 1.0, 2), ResolutionError);
  EXPECT_THROW(DelaySystem(20.0, 1.0, 1.0, 1.0, 8), ResolutionError);
  EXPECT_EQ(DelaySystem(0.0, 1.0, 1.0, 1.0, 8).state_dim(), 9);
}

TEST(FundamentalSolutionTest, HandDerivedSegments) {
  const DelayFundamentalSolution g(DelaySystem(0.0, 1.0, 1.0, 1.0, 8), 3.0);
  ASSERT_GE(g.segments().size(), 3u);
  EXPECT_EQ(g.segments()[0](0), 1.0);
  EXPECT_EQ(g.segments()[1](0), 1.0);
  EXPECT_EQ(g.segments()[1](1), 1.0);
  EXPECT_EQ(g.segments()[2](0), 2.0);
  EXPECT_EQ(g.segments()[2](1), 1.0);
  EXPECT_EQ(g.segments()[2](2), 0.5);
  EXPECT_EQ(g.Evaluate(0.5), 1.0);
  EXPECT_DOUBLE_EQ(g.Evaluate(1.5), 1.5);
  EXPECT_DOUBLE_EQ(g.Evaluate(2.5), 1.0 + 1.5 + 0.125);
  EXPECT_EQ(g.Evaluate(-0.1), 0.0);
  EXPECT_THROW(g.Evaluate(3.5), DomainError);
}

TEST(FundamentalSolutionTest, MatchesIndependentIntegrator) {
  const double a0 = 0.3, a1 = -0.7, d = 0.5, t_max = 2.0;
  const int per_d = 400;
  const DelayFundamentalSolution g(DelaySystem(a0, a1, 1.0, d, 16), t_max);
  const std::vector<double> ref = Rk4Fundamental(a0, a1, d, t_max, per_d);
  const double h = d / per_d;
  double worst = 0.0;
  for (std::size_t k = 0; k < ref.size(); k += 10) {
    worst = std::max(worst, std::abs(g.Evaluate(k * h) - ref[k]));
  }
  EXPECT_LE(worst, 1e-8);
  EXPECT_NEAR(g.Evaluate(0.3), std::exp(a0 * 0.3), 1e-15);
}

TEST(FundamentalSolutionTest, IntegralsMatchQuadrature) {
  const DelayFundamentalSolution g(DelaySystem(-0.4, 0.9, 1.0, 1.0, 16), 3.0);
  for (double t : {0.7, 1.6, 2.9}) {
    std::vector<double> breaks;
    for (double b : {1.0, 2.0}) {
      if (b < t) breaks.push_back(b);
    }
    const double want = IntegratePiecewise([&](double s) { return g.Evaluate(s); }, 0.0, t, breaks);
    EXPECT_NEAR(g.Integral(t), want, 1e-13);
    const double want2 =
        IntegratePiecewise([&](double s) { return g.Integral(s); }, 0.0, t, breaks);
    EXPECT_NEAR(g.DoubleIntegral(t), want2, 1e-13);
  }
}

TEST(DelayGramianTest, SymmetricPsdAndCornerEntryExact) {
  const DelaySystem sys(-0.5, 0.8, 2.0, 1.0, 16);
  const DelayFundamentalSolution g(sys, 2.0);
  const Gramian q = DelayGramian(sys, 2.0);
  EXPECT_EQ(q.matrix(), q.matrix().transpose());
  EXPECT_GE(q.psd().eigenvalues()(0), 0.0);
  // Present-state entry: b0^2 int_0^t g^2.
  const double want =
      4.0 * IntegratePiecewise([&](double s) { return g.Evaluate(s) * g.Evaluate(s); }, 0.0, 2.0,
                               {1.0});
  EXPECT_NEAR(q.matrix()(0, 0), want, 1e-12 * want);
}

TEST(DelayGramianTest, ScalesWithInputGainSquared) {
  const Gramian q1 = DelayGramian(DelaySystem(0.1, 0.6, 1.0, 1.0, 16), 1.5);
  const Gramian q3 = DelayGramian(DelaySystem(0.1, 0.6, 3.0, 1.0, 16), 1.5);
  EXPECT_LE((q3.matrix() - 9.0 * q1.matrix()).norm(), 1e-12 * q3.matrix().norm());
  const DelayNullControllability c1 =
      DelayNullControllabilityTest(DelaySystem(0.1, 0.6, 1.0, 1.0, 16), 2.0);
  const DelayNullControllability c3 =
      DelayNullControllabilityTest(DelaySystem(0.1, 0.6, 3.0, 1.0, 16), 2.0);
  EXPECT_NEAR(c3.constant, c1.constant / 9.0, 1e-8 * c1.constant);
}

TEST(DelayGramianTest, MeshRefinementConverges) {
  std::vector<double> top;
  std::vector<double> boundary;
  for (int mesh : {8, 16, 32, 64}) {
    const DelaySystem sys(-0.5, 0.8, 2.0, 1.0, mesh);
    const Gramian q = DelayGramian(sys, 2.0);
    top.push_back(q.psd().MaxEigenvalue());
    boundary.push_back(DelayBoundaryResidual(sys, q));
  }
  for (std::size_t i = 2; i < top.size(); ++i) {
    const double ratio = std::abs(top[i - 1] - top[i - 2]) / std::abs(top[i] - top[i - 1]);
    EXPECT_GE(ratio, 3.0) << i;
  }
  for (std::size_t i = 1; i < boundary.size(); ++i) EXPECT_LT(boundary[i], boundary[i - 1]);
}

TEST(DelayNullControllabilityTest, ThresholdAtDelay) {
  const DelaySystem sys(0.3, 1.0, 1.0, 1.0, 32);
  const DelayNullControllability late = DelayNullControllabilityTest(sys, 2.0);
  EXPECT_TRUE(late.expected);
  EXPECT_TRUE(late.satisfied);
  EXPECT_TRUE(std::isfinite(late.constant));
  const DelayNullControllability early = DelayNullControllabilityTest(sys, 0.5);
  EXPECT_FALSE(early.expected);
  EXPECT_FALSE(early.satisfied);
  EXPECT_EQ(early.witness.size(), sys.state_dim());
}

TEST(DelaySemigroupTest, PresentStateDecaysAsFundamentalSolution) {
  const DelaySystem sys(-0.3, 0.5, 1.0, 1.0, 32);
  const DelayFundamentalSolution g(sys, 1.5);
  const Matrix e = DelaySemigroup(sys, 1.5);
  EXPECT_NEAR(e(0, 0), g.Evaluate(1.5), 1e-12);
}

}  // namespace
}  // namespace mincontrol
