#include "robust_phase/experiment.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <sstream>

using namespace robust_phase;

TEST(Expression, Arithmetic) {
  const Bindings v{{"n", 1000.0}, {"d", 50.0}};
  EXPECT_DOUBLE_EQ(evaluate_expression("1 + 2 * 3", v), 7.0);
  EXPECT_DOUBLE_EQ(evaluate_expression("(1 + 2) * 3", v), 9.0);
  EXPECT_DOUBLE_EQ(evaluate_expression("2^3^2", v), 512.0);
  EXPECT_DOUBLE_EQ(evaluate_expression("-2^2", v), -4.0);
  EXPECT_DOUBLE_EQ(evaluate_expression("n / 4 - d", v), 200.0);
  EXPECT_DOUBLE_EQ(evaluate_expression("sqrt(ceil(15.2))", v), 4.0);
  EXPECT_DOUBLE_EQ(evaluate_expression("ln(1)", v), 0.0);
}

TEST(Expression, Errors) {
  const Bindings v{{"n", 10.0}};
  EXPECT_THROW(evaluate_expression("", v), InvalidArgument);
  EXPECT_THROW(evaluate_expression("1 +", v), InvalidArgument);
  EXPECT_THROW(evaluate_expression("(1", v), InvalidArgument);
  EXPECT_THROW(evaluate_expression("m", v), InvalidArgument);
  EXPECT_THROW(evaluate_expression("1 2", v), InvalidArgument);
  EXPECT_THROW(evaluate_count("0 - n", v), InvalidArgument);
  EXPECT_THROW(evaluate_count("ln(0)", v), InvalidArgument);
}

TEST(Expression, DefaultSweepSizes) {
  const long n = evaluate_count("ceil(10*d*ln(d))", {{"d", 50.0}});
  EXPECT_EQ(n, 1957);
  const Bindings v{{"n", static_cast<double>(n)}};
  EXPECT_EQ(evaluate_count(parse_regime("sqrt_n").k_expr, v), 45);
  EXPECT_EQ(evaluate_count(parse_regime("n_2_3").k_expr, v), 157);
  EXPECT_EQ(evaluate_count(parse_regime("const_0.25").k_expr, v), 490);
}

TEST(Regimes, Parsing) {
  const auto custom = parse_regime("tiny: 2*d");
  EXPECT_EQ(custom.label, "tiny");
  EXPECT_EQ(custom.k_expr, "2*d");
  EXPECT_THROW(parse_regime("bogus"), InvalidArgument);
  EXPECT_THROW(parse_regime("const_0.6"), InvalidArgument);
}

TEST(Corruption, Parsing) {
  EXPECT_TRUE(std::holds_alternative<corruption::None>(parse_corruption("none", 5).kind));
  EXPECT_EQ(parse_corruption("none", 5).k, 0u);
  const auto u = parse_corruption("uniform(-5, 5)", 3);
  ASSERT_TRUE(std::holds_alternative<corruption::Uniform>(u.kind));
  EXPECT_EQ(std::get<corruption::Uniform>(u.kind).lo, -5.0);
  EXPECT_EQ(u.k, 3u);
  EXPECT_EQ(std::get<corruption::Constant>(parse_corruption("constant(1.5)", 1).kind).value, 1.5);
  EXPECT_EQ(parse_corruption("signflip", 2).selection, Selection::adversarial_rule);
  EXPECT_THROW(parse_corruption("uniform(5,-5)", 1), InvalidArgument);
  EXPECT_THROW(parse_corruption("constant(1,2)", 1), InvalidArgument);
  EXPECT_THROW(parse_corruption("gaussian(0,1)", 1), InvalidArgument);
}

TEST(KeyValue, ParseAndOverride) {
  std::istringstream is("# comment\nd = 10, 20\n\nregimes=sqrt_n # trailing\nbeta=1e-3\n");
  auto cfg = KeyValueConfig::parse(is);
  EXPECT_EQ(cfg.get_list("d"), (std::vector<std::string>{"10", "20"}));
  EXPECT_EQ(cfg.get_or("regimes", ""), "sqrt_n");
  EXPECT_DOUBLE_EQ(cfg.get_real("beta", 0.0), 1e-3);
  cfg.set_assignment("beta=2e-3");
  EXPECT_DOUBLE_EQ(cfg.get_real("beta", 0.0), 2e-3);
  EXPECT_THROW(cfg.set_assignment("novalue"), InvalidArgument);
  EXPECT_THROW(cfg.get_int("beta", 0), InvalidArgument);
  std::istringstream bad("just text\n");
  EXPECT_THROW(KeyValueConfig::parse(bad), InvalidArgument);
  std::ostringstream echo;
  cfg.echo(echo);
  EXPECT_EQ(echo.str(), "# beta=2e-3\n# d=10, 20\n# regimes=sqrt_n\n");
}

TEST(ExperimentConfig, Validation) {
  KeyValueConfig kv;
  EXPECT_THROW(ExperimentConfig::from(kv), InvalidArgument);  // no d
  kv.set("d", "10");
  kv.set("regimes", "");
  EXPECT_THROW(ExperimentConfig::from(kv), InvalidArgument);  // empty regimes
  kv.set("regimes", "half:ceil(n/2)");
  EXPECT_THROW(ExperimentConfig::from(kv), InvalidArgument);  // 2k >= n
  kv.set("regimes", "sqrt_n");
  const auto e = ExperimentConfig::from(kv);
  EXPECT_EQ(e.seeds.size(), 5u);
  EXPECT_EQ(e.sizes(10, e.regimes[0]), (std::pair<std::size_t, std::size_t>{231, 16}));
}

TEST(SolverConfig, Keys) {
  KeyValueConfig kv;
  kv.set("beta", "auto");
  kv.set("max_iters", "77");
  kv.set("kappa", "trace");
  const auto c = solver_config(kv, 3);
  EXPECT_EQ(c.k, 3u);
  EXPECT_FALSE(c.beta.has_value());
  EXPECT_EQ(*c.oracle_cfg.max_iters_T, 77);
  EXPECT_EQ(c.oracle_cfg.kappa_estimator, KappaEstimator::trace);
  kv.set("kappa", "median");
  EXPECT_THROW(solver_config(kv, 3), InvalidArgument);
}

namespace {

ExperimentConfig small_sweep() {
  KeyValueConfig kv;
  kv.set("d", "5,8");
  kv.set("regimes", "sqrt_n,const_0.25");
  kv.set("seeds", "3,1,2");
  return ExperimentConfig::from(kv);
}

std::string csv_without_timing(const std::vector<TrialOutcome>& out) {
  std::ostringstream os;
  write_trials_csv(os, records_of(out));
  std::istringstream is(os.str());
  std::string line, s;
  while (std::getline(is, line)) s += line.substr(0, line.rfind(',')) + '\n';
  return s;
}

}  // namespace

TEST(Sweep, SortedAndDeterministic) {
  const auto exp = small_sweep();
  const auto a = run_sweep(exp, 1);
  ASSERT_EQ(a.size(), 12u);
  for (std::size_t i = 1; i < a.size(); ++i) {
    const auto& p = a[i - 1].record;
    const auto& q = a[i].record;
    EXPECT_LE(std::tie(p.regime_label, p.d, p.seed), std::tie(q.regime_label, q.d, q.seed));
  }
  EXPECT_EQ(csv_without_timing(a), csv_without_timing(run_sweep(exp, 3)));
}

TEST(Sweep, CellsShareProblemAcrossRegimes) {
  // theta* and covariates depend on (seed, d) only
  const auto p1 = make_problem(6, 40, 1.0, parse_corruption("none", 0), 9, {1, 1});
  CorruptionPlan plan = parse_corruption("constant(2)", 4);
  const auto p2 = make_problem(6, 40, 1.0, plan, 9, {2, 2});
  EXPECT_EQ(p1.theta_star, p2.theta_star);
  EXPECT_EQ(p1.data.covariates(), p2.data.covariates());
  EXPECT_NEAR(p1.theta_star.norm(), 1.0, 1e-15);
}

TEST(Sweep, OracleErrorIsRecorded) {
  KeyValueConfig kv;
  kv.set("d", "4");
  kv.set("regimes", "sqrt_n");
  kv.set("seeds", "1");
  kv.set("step_scale", "100");
  kv.set("max_iters", "5000");
  const auto out = run_sweep(ExperimentConfig::from(kv), 1);
  ASSERT_EQ(out.size(), 1u);
  ASSERT_TRUE(out[0].result.has_value());
  EXPECT_EQ(out[0].record.termination, "oracle_error");
}

TEST(Parallelism, EnvironmentOverride) {
  ::setenv("ROBUST_PHASE_THREADS", "3", 1);
  EXPECT_EQ(resolve_parallelism(std::optional<long>(7)), 3u);
  ::unsetenv("ROBUST_PHASE_THREADS");
  EXPECT_EQ(resolve_parallelism(std::optional<long>(7)), 7u);
  EXPECT_GE(resolve_parallelism(std::nullopt), 1u);
}
