// Command-line driver: generate | run | sweep | landscape | verify.
//
// Exit codes: 0 success, 1 check failure, 2 usage or config error,
// 3 numerical failure.

#include "robust_phase/robust_phase.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace robust_phase;

namespace {

enum Exit { kOk = 0, kCheckFailed = 1, kUsage = 2, kNumerical = 3 };

struct Common {
  std::string config_path;
  std::string out_dir = ".";
  std::string seeds;
  long parallelism = 0;
  bool quiet = false;
  std::vector<std::string> sets;
};

KeyValueConfig load_config(const Common& c) {
  KeyValueConfig cfg;
  if (!c.config_path.empty()) {
    std::ifstream in(c.config_path);
    if (!in) throw InvalidArgument("cannot open config file " + c.config_path);
    cfg = KeyValueConfig::parse(in);
  }
  for (const auto& s : c.sets) cfg.set_assignment(s, "--set");
  if (!c.seeds.empty()) cfg.set("seeds", c.seeds);
  return cfg;
}

std::uint64_t first_seed(const KeyValueConfig& cfg) {
  const auto seeds = cfg.get_list("seeds");
  if (seeds.empty()) return static_cast<std::uint64_t>(cfg.get_int("seed", 1));
  return static_cast<std::uint64_t>(KeyValueConfig::to_int("seeds", seeds.front()));
}

fs::path ensure_dir(const std::string& dir) {
  fs::path p(dir);
  std::error_code ec;
  fs::create_directories(p, ec);
  if (!fs::is_directory(p)) throw InvalidArgument("cannot create output directory " + dir);
  return p;
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream os(p);
  if (!os) throw InvalidArgument("cannot write " + p.string());
  return os;
}

/// Problem from config keys d, n (or n_rule), k, corruption, theta_norm, seed.
SyntheticProblem problem_from_config(const KeyValueConfig& cfg, std::uint64_t seed) {
  const long d = cfg.get_int("d", 0);
  if (d < 1) throw InvalidArgument("config needs d >= 1");
  const Bindings dvars{{"d", static_cast<double>(d)}};
  const long n = evaluate_count(cfg.get_or("n", cfg.get_or("n_rule", "ceil(10*d*ln(d))")), dvars);
  if (n < 1) throw InvalidArgument("n must be >= 1");
  const long k = evaluate_count(cfg.get_or("k", "0"),
                                {{"d", static_cast<double>(d)}, {"n", static_cast<double>(n)}});
  if (k > n)
    throw InvalidArgument("k exceeds n (k=" + std::to_string(k) + ", n=" + std::to_string(n) + ")");
  const std::string corr = cfg.get_or("corruption", k == 0 ? "none" : "uniform(-5,5)");
  auto plan = parse_corruption(corr, static_cast<std::size_t>(k));
  if (corr == "none" && k > 0) throw InvalidArgument("corruption 'none' needs k = 0");
  const double norm = cfg.get_real("theta_norm", 1.0);
  if (!(norm > 0.0)) throw InvalidArgument("theta_norm must be > 0");
  const RngSeed stream = RngSeed{seed, 0}.child(static_cast<std::uint64_t>(d)).child("corruption");
  return make_problem(static_cast<std::size_t>(d), static_cast<std::size_t>(n), norm, plan, seed, stream);
}

void print_digest(const MeasurementSet& data) {
  const auto& y = data.responses();
  const auto [lo, hi] = std::minmax_element(y.begin(), y.end());
  std::cout << "n=" << data.n() << " d=" << data.d() << " k=" << data.num_corrupted()
            << " y_min=" << format_real(*lo) << " y_max=" << format_real(*hi) << '\n';
}

int cmd_generate(const Common& c) {
  const auto cfg = load_config(c);
  const auto problem = problem_from_config(cfg, first_seed(cfg));
  const auto dir = ensure_dir(c.out_dir);
  auto ds = open_out(dir / "dataset.txt");
  write_dataset(ds, problem.data);
  auto ts = open_out(dir / "theta_star.txt");
  write_signal(ts, problem.theta_star);
  print_digest(problem.data);
  return kOk;
}

int cmd_run(const Common& c, const std::string& data_path, std::string truth_path) {
  const auto cfg = load_config(c);
  std::optional<SyntheticProblem> problem;
  std::optional<MeasurementSet> loaded;
  std::optional<SignalVec> truth;
  if (!data_path.empty()) {
    std::ifstream in(data_path);
    if (!in) throw InvalidArgument("cannot open dataset " + data_path);
    loaded = read_dataset(in);
    if (truth_path.empty()) {
      const auto sibling = fs::path(data_path).parent_path() / "theta_star.txt";
      if (fs::exists(sibling)) truth_path = sibling.string();
    }
    if (!truth_path.empty()) {
      std::ifstream ts(truth_path);
      if (!ts) throw InvalidArgument("cannot open truth file " + truth_path);
      truth = read_signal(ts);
      if (truth->dim() != loaded->d()) throw InvalidArgument("truth dimension differs from dataset");
    }
  } else {
    problem = problem_from_config(cfg, first_seed(cfg));
    truth = problem->theta_star;
  }
  const MeasurementSet& data = loaded ? *loaded : problem->data;

  // assumed corruption count defaults to the dataset's own count
  const long k = cfg.has("k") ? evaluate_count(*cfg.get("k"), {{"n", static_cast<double>(data.n())},
                                                              {"d", static_cast<double>(data.d())}})
                              : static_cast<long>(data.num_corrupted());
  const auto solver = solver_config(cfg, static_cast<std::size_t>(k));
  const std::uint64_t seed = first_seed(cfg);
  const auto res = run_altmin(data, solver, RngSeed{seed, 0}.child("oracle"), truth);

  const auto dir = ensure_dir(c.out_dir);
  auto log = open_out(dir / "run_log.csv");
  write_run_log_csv(log, res);

  const double rel = truth ? relative_error(res.theta_hat, *truth) : std::nan("");
  std::cout << "rel_error=" << (truth ? format_real(rel) : std::string("nan"))
            << ", outer_iters=" << res.outer_iters << ", termination=" << to_string(res.termination)
            << '\n';
  if (!c.quiet) {
    std::cout << "beta=" << format_real(res.beta) << " iteration_bound=" << res.iteration_bound
              << " oracle_iters_total=" << res.oracle_iters_total << '\n';
    if (res.negatives_exceed_k) std::cout << "note: more negative responses than k\n";
    if (truth && k > 0 && 2 * k < static_cast<long>(data.n())) {
      const RegimeParams regime(k, static_cast<long>(data.n()));
      double eta_max = 0.0;
      for (double e : data.corruptions()) eta_max = std::max(eta_max, std::fabs(e));
      try {
        const double bound = theorem1_bound(regime, eta_max);
        std::cout << "bound_diagnostic=" << format_real(bound) << '\n';
      } catch (const InvalidArgument& e) {
        std::cout << "bound_diagnostic=n/a (" << e.what() << ")\n";
      }
    }
  }
  if (res.termination == Termination::oracle_error) {
    std::cerr << "error: " << res.error << " (outer iteration " << res.outer_iters
              << ", oracle iteration " << res.error_iteration << ")\n";
    return kNumerical;
  }
  return kOk;
}

int cmd_sweep(const Common& c) {
  const auto cfg = load_config(c);
  const auto exp = ExperimentConfig::from(cfg);
  const unsigned workers =
      resolve_parallelism(c.parallelism > 0 ? std::optional<long>(c.parallelism) : std::nullopt);
  const auto outcomes = run_sweep(exp, workers);
  const auto records = records_of(outcomes);

  const auto dir = ensure_dir(c.out_dir);
  {
    auto os = open_out(dir / "trials.csv");
    exp.raw.echo(os);
    write_trials_csv(os, records);
  }
  std::vector<TrialRecord> ok;
  std::size_t failed = 0;
  for (const auto& o : outcomes) {
    if (o.error.empty()) {
      ok.push_back(o.record);
    } else {
      ++failed;
      std::cerr << "cell " << o.record.regime_label << " d=" << o.record.d << " seed=" << o.record.seed
                << " failed: " << o.error << '\n';
    }
  }
  if (ok.empty()) {
    std::cerr << "error: every sweep cell failed\n";
    return kNumerical;
  }
  const auto rows = summarize(ok);
  {
    auto os = open_out(dir / "summary.csv");
    exp.raw.echo(os);
    write_summary_csv(os, rows);
  }
  if (!c.quiet) write_summary_csv(std::cout, rows);
  if (failed && !c.quiet) std::cout << failed << " of " << outcomes.size() << " cells failed\n";
  return kOk;
}

int cmd_landscape(const Common& c) {
  const auto cfg = load_config(c);
  if (cfg.get_int("d", 2) != 2) throw InvalidArgument("landscape grids are 2-D only (d=2)");
  const double eta_bar = cfg.get_real("eta_bar", 0.0);
  const double eta_sq_mean = cfg.get_real("eta_sq_mean", eta_bar * eta_bar);
  GridSpec g;
  g.x_lo = cfg.get_real("x_lo", g.x_lo);
  g.x_hi = cfg.get_real("x_hi", g.x_hi);
  g.y_lo = cfg.get_real("y_lo", g.y_lo);
  g.y_hi = cfg.get_real("y_hi", g.y_hi);
  g.nx = static_cast<std::size_t>(cfg.get_int("nx", static_cast<long>(g.nx)));
  g.ny = static_cast<std::size_t>(cfg.get_int("ny", static_cast<long>(g.ny)));
  const auto grid = landscape_grid(eta_bar, eta_sq_mean, g);
  const auto dir = ensure_dir(c.out_dir);
  auto os = open_out(dir / "landscape.txt");
  write_landscape(os, eta_bar, eta_sq_mean, g);
  if (!c.quiet) {
    const auto best = std::min_element(grid.begin(), grid.end(),
                                       [](const GridPoint& a, const GridPoint& b) { return a.value < b.value; });
    std::cout << "panel=" << landscape_panel(eta_bar) << " grid_min=(" << format_real(best->theta1) << ", "
              << format_real(best->theta2) << ") F=" << format_real(best->value) << '\n';
  }
  return kOk;
}

int cmd_verify(const Common& c, const std::vector<std::string>& only, const std::string& fault) {
  FaultInjection inject;
  if (fault == "wrong_gradient") inject.wrong_gradient = true;
  else if (!fault.empty()) throw InvalidArgument("unknown fault '" + fault + "' (wrong_gradient)");
  CheckRegistry reg = default_checks(inject);
  if (!only.empty()) {
    CheckRegistry picked;
    for (const auto& f : only) {
      const auto sub = reg.filtered(f);
      for (const auto& [name, check] : sub.checks()) picked.add(name, check);
    }
    reg = std::move(picked);
  }
  if (reg.empty()) throw InvalidArgument("no checks registered");

  const auto dir = ensure_dir(c.out_dir);
  auto os = open_out(dir / "verify.jsonl");
  std::vector<std::string> failed;
  for (const auto& [name, check] : reg.checks()) {
    const auto r = check();
    write_report_jsonl(os, r);
    if (!c.quiet) write_report_jsonl(std::cout, r);
    if (!r.passed) failed.push_back(r.name + " (" + r.detail + ")");
  }
  for (const auto& f : failed) std::cerr << "FAILED: " << f << '\n';
  return failed.empty() ? kOk : kCheckFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Robust phase retrieval: alternating minimization with residual trimming"};
  app.require_subcommand(1);
  app.fallthrough();

  Common c;
  app.add_option("--config", c.config_path, "key=value config file");
  app.add_option("--out", c.out_dir, "output directory");
  app.add_option("--seed", c.seeds, "seed list, comma-separated");
  app.add_option("--parallelism", c.parallelism, "sweep worker threads");
  app.add_flag("--quiet", c.quiet, "less console output");
  app.add_option("--set", c.sets, "override one config key (key=value)");

  auto* gen = app.add_subcommand("generate", "write a synthetic dataset and theta*");
  std::string data_path, truth_path;
  auto* run = app.add_subcommand("run", "run alternating minimization on one dataset");
  run->add_option("--data", data_path, "dataset file (otherwise generated from config)");
  run->add_option("--truth", truth_path, "theta* file (default: theta_star.txt beside the dataset)");
  auto* sweep = app.add_subcommand("sweep", "run every (d, regime, seed) cell");
  auto* land = app.add_subcommand("landscape", "write the expected-loss grid in 2-D");
  std::vector<std::string> only;
  std::string fault;
  auto* ver = app.add_subcommand("verify", "run the numerical and statistical checks");
  ver->add_option("--only", only, "run only checks whose name contains this");
  ver->add_option("--inject-fault", fault, "test hook: wrong_gradient");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    if (gen->parsed()) return cmd_generate(c);
    if (run->parsed()) return cmd_run(c, data_path, truth_path);
    if (sweep->parsed()) return cmd_sweep(c);
    if (land->parsed()) return cmd_landscape(c);
    if (ver->parsed()) return cmd_verify(c, only, fault);
  } catch (const InvalidArgument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const NumericalError& e) {
    std::cerr << "error: " << e.what() << " (iteration " << e.iteration() << ")\n";
    return kNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  }
  return kUsage;
}
