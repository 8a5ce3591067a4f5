#include "robust_phase/datagen.hpp"
#include "robust_phase/oracle.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

using namespace robust_phase;

namespace {

MeasurementSet scalar_data(std::vector<double> x, std::vector<double> y) {
  CovariateMatrix m(static_cast<Eigen::Index>(x.size()), 1);
  for (std::size_t i = 0; i < x.size(); ++i) m(static_cast<Eigen::Index>(i), 0) = x[i];
  return MeasurementSet(std::move(m), std::move(y));
}

MeasurementSet shifted(const MeasurementSet& clean, double c) {
  CorruptionPlan plan;
  plan.kind = corruption::Constant{c};
  plan.k = clean.n();
  return apply_corruption(clean, plan, {0, 0});
}

SignalVec unit(std::size_t d, std::uint64_t seed) { return Rng({seed, 77}).unit_sphere(d); }

}  // namespace

TEST(KappaMoments, ConstantResponses) {
  const auto data = scalar_data({1, 2, 3, 4}, {1, 1, 1, 1});
  EXPECT_DOUBLE_EQ(kappa_sq_moments(data, IndexSet::all(4)), 1.0 / 3.0);
  EXPECT_THROW(kappa_sq_moments(data, IndexSet::all(1)), InvalidArgument);
}

TEST(KappaMoments, CleanAndShifted) {
  const auto clean = generate_clean(5, 100000, unit(5, 1), {1, 0});
  const auto all = IndexSet::all(clean.n());
  EXPECT_NEAR(kappa_sq_moments(clean, all), 1.0, 0.05);
  EXPECT_LE(kappa_sq_moments(shifted(clean, -3.6), all), 0.0);
}

TEST(KappaTrace, Examples) {
  const auto d1 = generate_clean(1, 100000, SignalVec{1.0}, {2, 0});
  EXPECT_NEAR(kappa_sq_trace(d1, IndexSet::all(d1.n())), 1.0, 0.05);

  const auto d10 = generate_clean(10, 100000, unit(10, 2), {2, 1});
  EXPECT_NEAR(kappa_sq_trace(d10, IndexSet::all(d10.n())), 1.0, 0.05);
  EXPECT_NEAR(kappa_sq_trace(shifted(d10, 1.5), IndexSet::all(d10.n())), 1.5, 0.1);

  EXPECT_THROW(kappa_sq_trace(d1, IndexSet{}), InvalidArgument);
}

TEST(Split, Examples) {
  const SignalVec e1{1.0, 0.0};
  auto [a, b] = signal_orthogonal_split(e1, e1, 1.0);
  EXPECT_DOUBLE_EQ(a, 1.0);
  EXPECT_DOUBLE_EQ(b, 0.0);

  std::tie(a, b) = signal_orthogonal_split(SignalVec{0.0, 3.0}, e1, 2.0);
  EXPECT_DOUBLE_EQ(a, 0.0);
  EXPECT_DOUBLE_EQ(b, 3.0);

  // theta = kappa theta* with kappa = 2, theta* = (1.5, 0): a = kappa^2 |t*|^2 = 9,
  // b = kappa |t*| |1 - kappa |t*|| = 3 * 2 = 6 (substituted into the definitions)
  std::tie(a, b) = signal_orthogonal_split(SignalVec{3.0, 0.0}, SignalVec{1.5, 0.0}, 2.0);
  EXPECT_DOUBLE_EQ(a, 9.0);
  EXPECT_DOUBLE_EQ(b, 6.0);

  EXPECT_THROW(signal_orthogonal_split(e1, SignalVec{0.0, 0.0}, 1.0), InvalidArgument);
  EXPECT_THROW(signal_orthogonal_split(e1, e1, 0.0), InvalidArgument);
}

TEST(Config, Validation) {
  OracleConfig cfg;
  EXPECT_EQ(cfg.resolved_max_iters(10), static_cast<int>(std::ceil(40.0 * std::log(10.0))));
  EXPECT_EQ(cfg.resolved_max_iters(1), static_cast<int>(std::ceil(40.0 * std::log(2.0))));
  cfg.step_scale_c = 0.0;
  EXPECT_THROW(cfg.validate(), InvalidArgument);
  cfg = {};
  cfg.max_iters_T = 0;
  EXPECT_THROW(cfg.validate(), InvalidArgument);
  cfg = {};
  cfg.grad_tol = -1.0;
  EXPECT_THROW(cfg.validate(), InvalidArgument);
}

TEST(GradientDescent, ScalarFixedPoint) {
  const auto data = scalar_data({1.0}, {4.0});
  const auto out = gradient_descent(data, IndexSet::all(1), SignalVec{1.0}, 0.1, 1000, 1e-12);
  EXPECT_NEAR(out.theta[0], 2.0, 1e-10);
}

TEST(GradientDescent, DivergenceReportsIteration) {
  const auto data = scalar_data({1.0}, {4.0});
  try {
    gradient_descent(data, IndexSet::all(1), SignalVec{10.0}, 10.0, 1000, 0.0);
    FAIL() << "expected divergence";
  } catch (const NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("step size too large"), std::string::npos);
    EXPECT_GT(e.iteration(), 0);
  }
}

TEST(RunOracle, ConvexBranchReturnsZero) {
  const auto clean = generate_clean(4, 5000, unit(4, 3), {3, 0});
  const auto data = shifted(clean, -3.6);
  const auto res = run_oracle(data, IndexSet::all(data.n()), OracleConfig{}, {3, 1});
  ASSERT_LE(res.kappa_sq, 0.0);
  EXPECT_EQ(res.branch, OracleBranch::convex_zero);
  EXPECT_TRUE(res.theta.is_zero());
  EXPECT_EQ(res.iters_run, 0);
}

TEST(RunOracle, CleanConvergence) {
  int ok = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const SignalVec t = unit(10, seed);
    const auto data = generate_clean(10, 2000, t, {seed, 0});
    OracleConfig cfg;
    cfg.max_iters_T = 400;
    const auto res = run_oracle(data, IndexSet::all(2000), cfg, {seed, 1});
    EXPECT_EQ(res.branch, OracleBranch::gd);
    EXPECT_LE(res.iters_run, 400);
    if (sign_invariant_distance(res.theta, t) <= 1e-3) ++ok;
  }
  EXPECT_GE(ok, 18);
}

TEST(RunOracle, DeterministicAndTrajectory) {
  const SignalVec t = unit(6, 4);
  const auto data = generate_clean(6, 800, t, {4, 0});
  OracleConfig cfg;
  cfg.record_trajectory = true;
  cfg.probe = TrajectoryProbe{t, 1.0};
  const auto r1 = run_oracle(data, IndexSet::all(800), cfg, {4, 1});
  const auto r2 = run_oracle(data, IndexSet::all(800), cfg, {4, 1});
  EXPECT_EQ(r1.theta, r2.theta);
  ASSERT_EQ(r1.trajectory.size(), static_cast<std::size_t>(r1.iters_run) + 1);
  // starts on the sphere of radius sqrt(kappa_sq)
  const auto& p0 = r1.trajectory.front();
  EXPECT_EQ(p0.iter, 0);
  EXPECT_GT(r1.trajectory.back().a / std::max(r1.trajectory.back().b, 1e-300), p0.a / p0.b);

  std::ostringstream os;
  write_trajectory_csv(os, r1.trajectory);
  EXPECT_EQ(os.str().substr(0, os.str().find('\n')), "iter,a_t,b_t,loss,grad_norm");
}

TEST(StepSize, UsesMeanPositiveResponse) {
  const auto data = scalar_data({1, 1, 1}, {2.0, -5.0, 4.0});
  EXPECT_DOUBLE_EQ(oracle_step_size(data, IndexSet::all(3), 0.1), 0.1 / 3.0);
  const auto neg = scalar_data({1}, {-1.0});
  EXPECT_DOUBLE_EQ(oracle_step_size(neg, IndexSet::all(1), 0.1), 0.1 / 1e-8);
}
