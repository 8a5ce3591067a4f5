#include "robust_phase/verify.hpp"

#include <Eigen/Eigenvalues>
#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

using namespace robust_phase;

namespace {

// Golub-Welsch for the standard normal: nodes are the eigenvalues of the
// Jacobi matrix of the probabilists' Hermite recurrence, weights the squared
// first eigenvector components.
std::pair<Eigen::VectorXd, Eigen::VectorXd> gauss_hermite(int m) {
  Eigen::MatrixXd j = Eigen::MatrixXd::Zero(m, m);
  for (int i = 1; i < m; ++i) j(i, i - 1) = j(i - 1, i) = std::sqrt(static_cast<double>(i));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(j);
  Eigen::VectorXd w = es.eigenvectors().row(0).transpose().array().square();
  return {es.eigenvalues(), w};
}

MeasurementSet toy(double x, double y) {
  CovariateMatrix m(1, 1);
  m(0, 0) = x;
  return MeasurementSet(std::move(m), {y});
}

}  // namespace

TEST(GaussianMoments, MatchQuadrature) {
  const auto [nodes, weights] = gauss_hermite(20);
  for (std::size_t p = 0; p < kGaussianMoments.size(); ++p) {
    const double q = (weights.array() * nodes.array().pow(static_cast<double>(p))).sum();
    EXPECT_NEAR(kGaussianMoments[p], q, 1e-10) << "moment " << p;
  }
  EXPECT_DOUBLE_EQ(gaussian_moment_constant(4, 0, ProbeDirection::aligned), 3.0);
  EXPECT_DOUBLE_EQ(gaussian_moment_constant(2, 2, ProbeDirection::orthogonal), 1.0);
  EXPECT_DOUBLE_EQ(gaussian_moment_constant(3, 1, ProbeDirection::orthogonal), 0.0);
}

TEST(FiniteDiff, Validation) {
  const auto d = toy(1.0, 0.0);
  EXPECT_THROW(finite_diff_gradient(d, IndexSet::all(1), SignalVec{1.0}, 0.0), InvalidArgument);
  EXPECT_THROW(finite_diff_curvature(d, IndexSet::all(1), SignalVec{1.0}, SignalVec{1.0}, -1.0),
               InvalidArgument);
  // f = theta^4 / 4 has curvature 3 theta^2
  EXPECT_NEAR(finite_diff_curvature(d, IndexSet::all(1), SignalVec{2.0}, SignalVec{1.0}, 1e-4), 12.0, 1e-6);
}

TEST(BruteForce, TrivialSizes) {
  Rng rng({1, 0});
  const auto inst = random_small_instance(rng, 4, 10);
  const IndexSet all = IndexSet::all(inst.data.n());
  EXPECT_EQ(brute_force_select(inst.data, all, inst.theta, all.size()), all);

  const auto one = brute_force_select(inst.data, all, inst.theta, 1);
  ASSERT_EQ(one.size(), 1u);
  for (std::size_t i : all)
    EXPECT_LE(sample_residual(inst.data, one[0], inst.theta), sample_residual(inst.data, i, inst.theta));

  EXPECT_THROW(brute_force_select(inst.data, all, inst.theta, all.size() + 1), InvalidArgument);
}

TEST(BruteForce, GuardsLargeSearches) {
  Rng rng({2, 0});
  const auto data = generate_clean(1, 40, SignalVec{1.0}, {2, 1});
  EXPECT_THROW(brute_force_select(data, IndexSet::all(40), SignalVec{0.5}, 20), InvalidArgument);
  EXPECT_DOUBLE_EQ(binomial(5, 2), 10.0);
  EXPECT_DOUBLE_EQ(binomial(3, 4), 0.0);
}

TEST(MaxChiSq, DefaultThresholdPasses) {
  for (std::size_t n : {100u, 1000u, 10000u}) {
    const auto r = max_chisq_tail_check(n, 1000, {3, n});
    EXPECT_TRUE(r.passed) << r.name << " " << r.observed << " > " << r.threshold;
  }
  EXPECT_TRUE(max_chisq_tail_check(2, 1000, {3, 2}).passed);
}

TEST(MaxChiSq, LowerThresholdHasPower) {
  // at 2 ln n the exceedance rate is about 1 - exp(-n P[chi2 > 2 ln n]) ~ 0.16, far above 2/n
  const auto r = max_chisq_tail_check(10000, 200, {4, 0}, 2.0);
  EXPECT_FALSE(r.passed);
  EXPECT_GT(r.observed, 0.05);
  EXPECT_LT(r.observed, 0.35);
}

TEST(MaxChiSq, Validation) {
  EXPECT_THROW(max_chisq_tail_check(1, 1000, {}), InvalidArgument);
  EXPECT_THROW(max_chisq_tail_check(10, 10, {}), InvalidArgument);
}

TEST(Concentration, MomentProbes) {
  const auto a = concentration_probe(10, 100000, 4, 0, 1, {5, 0});
  EXPECT_TRUE(a.passed) << a.detail;
  EXPECT_LE(a.observed, 0.15);
  const auto b = concentration_probe(10, 100000, 2, 2, 1, {5, 1});
  EXPECT_TRUE(b.passed) << b.detail;
  EXPECT_LE(b.observed, 0.1);
  const auto c = concentration_probe(10, 100000, 3, 1, 1, {5, 2});
  EXPECT_TRUE(c.passed) << c.detail;
  EXPECT_LE(c.observed, 0.1);
  EXPECT_THROW(concentration_probe(10, 100, 1, 1, 1, {}), InvalidArgument);
  EXPECT_THROW(concentration_probe(1, 100, 2, 2, 1, {}), InvalidArgument);
}

TEST(Checks, FaultInjectionIsCaught) {
  EXPECT_TRUE(gradient_fd_check(20, {6, 0}).passed);
  EXPECT_FALSE(gradient_fd_check(20, {6, 0}, FaultInjection{true}).passed);
}

TEST(Registry, FilterAndRun) {
  const auto reg = default_checks();
  EXPECT_EQ(reg.size(), 9u);
  EXPECT_EQ(reg.filtered("max_chisq").size(), 3u);
  EXPECT_TRUE(reg.filtered("no-such-check").empty());
  const auto picked = reg.filtered("selection").run_all();
  ASSERT_EQ(picked.size(), 1u);
  EXPECT_TRUE(picked[0].passed);
}

TEST(Report, JsonLine) {
  std::ostringstream os;
  write_report_jsonl(os, {"x", true, 0.5, 1.0, "ignored"});
  const auto j = nlohmann::json::parse(os.str());
  EXPECT_EQ(j["name"], "x");
  EXPECT_EQ(j["passed"], true);
  EXPECT_EQ(j["observed"], 0.5);
  EXPECT_EQ(j["threshold"], 1.0);
  EXPECT_FALSE(j.contains("detail"));
}
