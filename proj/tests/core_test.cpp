#include "robust_phase/core.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <vector>

using namespace robust_phase;

TEST(SignalVec, RejectsEmptyAndNonFinite) {
  EXPECT_THROW(SignalVec(Eigen::VectorXd(0)), InvalidArgument);
  EXPECT_THROW((SignalVec{1.0, std::numeric_limits<double>::quiet_NaN()}), InvalidArgument);
  EXPECT_THROW((SignalVec{std::numeric_limits<double>::infinity()}), InvalidArgument);
  EXPECT_THROW(SignalVec::basis(2, 2), InvalidArgument);
}

TEST(SignalVec, Arithmetic) {
  const SignalVec a{1.0, 2.0};
  const SignalVec b{3.0, -1.0};
  EXPECT_EQ(a + b, (SignalVec{4.0, 1.0}));
  EXPECT_EQ(a - b, (SignalVec{-2.0, 3.0}));
  EXPECT_EQ(2.0 * a, (SignalVec{2.0, 4.0}));
  EXPECT_DOUBLE_EQ(dot(a, b), 1.0);
  EXPECT_DOUBLE_EQ(a.squared_norm(), 5.0);
  EXPECT_TRUE(SignalVec::zeros(3).is_zero());
  EXPECT_THROW(a + SignalVec{1.0}, InvalidArgument);
}

TEST(IndexSet, SortsAndRejectsDuplicates) {
  const IndexSet s(std::vector<std::size_t>{4, 1, 3});
  EXPECT_EQ(s.indices(), (std::vector<std::size_t>{1, 3, 4}));
  EXPECT_TRUE(s.contains(3));
  EXPECT_FALSE(s.contains(2));
  EXPECT_TRUE(s.within(5));
  EXPECT_FALSE(s.within(4));
  EXPECT_THROW(IndexSet(std::vector<std::size_t>{1, 1}), InvalidArgument);
  EXPECT_EQ(IndexSet::all(3).size(), 3u);
}

TEST(SignInvariantDistance, Examples) {
  const SignalVec t{0.3, -0.7, 1.2};
  EXPECT_DOUBLE_EQ(sign_invariant_distance(t, -t), 0.0);
  EXPECT_DOUBLE_EQ(sign_invariant_distance(SignalVec{1.0, 0.0}, SignalVec{0.0, 1.0}), std::sqrt(2.0));
  EXPECT_DOUBLE_EQ(sign_invariant_distance(SignalVec{2.0, 0.0}, SignalVec{1.0, 0.0}), 1.0);
  EXPECT_THROW(sign_invariant_distance(SignalVec{1.0}, SignalVec{1.0, 0.0}), InvalidArgument);
}

TEST(SignInvariantDistance, SymmetricAndSignBlind) {
  const SignalVec a{0.5, 1.5, -2.0};
  const SignalVec b{-1.0, 0.25, 0.75};
  const double d = sign_invariant_distance(a, b);
  EXPECT_DOUBLE_EQ(d, sign_invariant_distance(b, a));
  EXPECT_DOUBLE_EQ(d, sign_invariant_distance(-a, b));
  EXPECT_DOUBLE_EQ(d, sign_invariant_distance(a, -b));
  EXPECT_GE(d, 0.0);
}

TEST(RegimeParams, Validation) {
  EXPECT_THROW(RegimeParams(-1, 10), InvalidArgument);
  EXPECT_THROW(RegimeParams(10, 10), InvalidArgument);
  EXPECT_THROW(RegimeParams(0, 0), InvalidArgument);
  EXPECT_DOUBLE_EQ(RegimeParams(25, 100).epsilon(), 0.25);
}

TEST(Delta, Examples) {
  EXPECT_EQ(delta(RegimeParams(0, 100)), 0.0);
  // frozen from an independent evaluation in double precision
  EXPECT_NEAR(delta(RegimeParams(100, 10000)), 0.45510772879737316, 1e-12);
  EXPECT_EQ(delta(RegimeParams(1, 2)), 0.0);
}

namespace {

std::vector<RegimeParams> probe(double (*rule)(double)) {
  std::vector<RegimeParams> out;
  for (double n : {1e3, 1e4, 1e5, 1e6})
    out.emplace_back(static_cast<long>(std::ceil(rule(n))), static_cast<long>(n));
  return out;
}

}  // namespace

TEST(FavorableRegime, Examples) {
  EXPECT_TRUE(in_favorable_regime(probe([](double n) { return std::sqrt(n); })));
  EXPECT_FALSE(in_favorable_regime(probe([](double n) { return 0.25 * n; })));
  EXPECT_FALSE(in_favorable_regime(probe([](double n) { return 0.6 * n; })));
}

TEST(FavorableRegime, RejectsBadProbes) {
  EXPECT_THROW(in_favorable_regime({}), InvalidArgument);
  const std::vector<RegimeParams> unordered{RegimeParams(1, 100), RegimeParams(1, 50)};
  EXPECT_THROW(in_favorable_regime(unordered), InvalidArgument);
}

TEST(PsiDiagnostic, Examples) {
  EXPECT_DOUBLE_EQ(psi_diagnostic(RegimeParams(0, 100), 0.0), 1.0);
  // sqrt(6 (1 + D)) / (0.97 (1 - D) - D) with D = Delta(100, 10^4); independent evaluation
  EXPECT_NEAR(psi_diagnostic(RegimeParams(100, 10000), 5.0), 40.23497103418846, 1e-9);
  EXPECT_THROW(psi_diagnostic(RegimeParams(4000, 10000), 1.0), InvalidArgument);
  EXPECT_THROW(psi_diagnostic(RegimeParams(0, 100), -1.0), InvalidArgument);
}

TEST(PsiDiagnostic, MonotoneInEtaMax) {
  const RegimeParams r(50, 10000);
  double prev = 0.0;
  for (double eta : {0.0, 0.5, 1.0, 5.0, 50.0}) {
    const double p = psi_diagnostic(r, eta);
    EXPECT_GT(p, prev);
    prev = p;
  }
}

TEST(FormatReal, RoundTrips) {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 1e22}) EXPECT_EQ(std::stod(format_real(v)), v);
}
