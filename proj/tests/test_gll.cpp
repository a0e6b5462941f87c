#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "specwave/gll.hpp"

using namespace specwave;

namespace {

// Legendre derivative by finite recurrence, used as an independent check of node placement.
double legendre(int n, double x) {
  double p0 = 1, p1 = x;
  if (n == 0) return p0;
  for (int k = 2; k <= n; ++k) {
    const double p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
    p0 = p1;
    p1 = p2;
  }
  return p1;
}

double legendre_derivative(int n, double x) {
  const double h = 1e-6;
  return (legendre(n, x + h) - legendre(n, x - h)) / (2 * h);
}

}  // namespace

TEST(Gll, DegreeFourClosedForm) {
  const auto r = gll_rule(4);
  ASSERT_EQ(r.points(), 5);
  const double a = std::sqrt(3.0 / 7.0);
  const double nodes[] = {-1, -a, 0, a, 1};
  const double weights[] = {0.1, 49.0 / 90, 32.0 / 45, 49.0 / 90, 0.1};
  for (int i = 0; i < 5; ++i) {
    EXPECT_NEAR(r.nodes[i], nodes[i], 1e-15);
    EXPECT_NEAR(r.weights[i], weights[i], 1e-15);
  }
}

TEST(Gll, DegreeTwo) {
  const auto r = gll_rule(2);
  EXPECT_DOUBLE_EQ(r.nodes[1], 0.0);
  EXPECT_NEAR(r.weights[0], 1.0 / 3, 1e-15);
  EXPECT_NEAR(r.weights[1], 4.0 / 3, 1e-15);
}

TEST(Gll, RejectsBadDegree) {
  EXPECT_THROW(gll_rule(0), Error);
  EXPECT_THROW(gll_rule(kMaxDegree + 1), Error);
  try {
    gll_rule(-3);
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::InvalidDegree);
  }
}

class GllAllDegrees : public ::testing::TestWithParam<int> {};

TEST_P(GllAllDegrees, NodesAreSymmetricRootsOfLegendreDerivative) {
  const int n = GetParam();
  const auto r = gll_rule(n);
  EXPECT_EQ(r.nodes.front(), -1.0);
  EXPECT_EQ(r.nodes.back(), 1.0);
  for (int i = 0; i <= n; ++i) {
    EXPECT_NEAR(r.nodes[i], -r.nodes[n - i], 1e-15);
    if (i > 0) {
      EXPECT_LT(r.nodes[i - 1], r.nodes[i]);
      if (i < n) EXPECT_NEAR(legendre_derivative(n, r.nodes[i]), 0.0, 1e-7);
    }
  }
}

TEST_P(GllAllDegrees, WeightsPositiveSumToTwo) {
  const auto r = gll_rule(GetParam());
  for (double w : r.weights) EXPECT_GT(w, 0.0);
  EXPECT_NEAR(std::accumulate(r.weights.begin(), r.weights.end(), 0.0), 2.0, 1e-14);
}

TEST_P(GllAllDegrees, QuadratureExactToDegree2NMinus1) {
  const int n = GetParam();
  const auto r = gll_rule(n);
  for (int p = 0; p <= 2 * n - 1; ++p) {
    double q = 0;
    for (int i = 0; i <= n; ++i) q += r.weights[i] * std::pow(r.nodes[i], p);
    const double exact = (p % 2 == 1) ? 0.0 : 2.0 / (p + 1);
    EXPECT_NEAR(q, exact, 1e-13) << "monomial degree " << p;
  }
}

TEST_P(GllAllDegrees, LagrangeCardinalAndPartitionOfUnity) {
  const auto r = gll_rule(GetParam());
  const LagrangeTable t(r);
  for (int i = 0; i < r.points(); ++i)
    for (int j = 0; j < r.points(); ++j)
      EXPECT_NEAR(t.value(i, r.nodes[j]), i == j ? 1.0 : 0.0, 1e-13);
  for (double xi : {-0.93, -0.4, 0.1, 0.77}) {
    double s = 0, ds = 0;
    for (int i = 0; i < r.points(); ++i) {
      s += t.value(i, xi);
      ds += t.derivative(i, xi);
    }
    EXPECT_NEAR(s, 1.0, 1e-13);
    EXPECT_NEAR(ds, 0.0, 1e-11);
  }
}

TEST_P(GllAllDegrees, DerivativeMatrixExactOnPolynomials) {
  const int n = GetParam();
  const auto r = gll_rule(n);
  const LagrangeTable t(r);
  for (int p = 0; p <= n; ++p) {
    std::vector<double> f(n + 1);
    for (int i = 0; i <= n; ++i) f[i] = std::pow(r.nodes[i], p);
    const auto d = t.differentiate(f);
    for (int i = 0; i <= n; ++i) {
      const double exact = p == 0 ? 0.0 : p * std::pow(r.nodes[i], p - 1);
      EXPECT_NEAR(d[i], exact, 1e-10 * (1 + n * n));
    }
  }
  for (int i = 0; i <= n; ++i) {
    double row = 0;
    for (int j = 0; j <= n; ++j) row += t.deriv(i, j);
    EXPECT_NEAR(row, 0.0, 1e-12);
  }
}

TEST_P(GllAllDegrees, PointDerivativeMatchesMatrixAtNodes) {
  const auto r = gll_rule(GetParam());
  const LagrangeTable t(r);
  for (int i = 0; i < r.points(); ++i)
    for (int j = 0; j < r.points(); ++j) EXPECT_NEAR(t.derivative(j, r.nodes[i]), t.deriv(i, j), 1e-10);
}

INSTANTIATE_TEST_SUITE_P(Degrees, GllAllDegrees, ::testing::Range(1, kMaxDegree + 1));

TEST(Gll, LagrangeEvalDomainChecks) {
  const auto r = gll_rule(3);
  EXPECT_THROW(lagrange_eval(r, 0, 1.5), Error);
  EXPECT_THROW(lagrange_eval(r, 4, 0.0), Error);
  EXPECT_NEAR(lagrange_eval(r, 0, -1.0), 1.0, 1e-15);
}
