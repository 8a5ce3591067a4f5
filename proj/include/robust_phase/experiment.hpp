#pragma once

// Experiment configuration (flat key=value text) and the seeded sweep runner
// behind the CLI.

#include "robust_phase/altmin.hpp"
#include "robust_phase/core.hpp"
#include "robust_phase/datagen.hpp"
#include "robust_phase/expression.hpp"
#include "robust_phase/metrics.hpp"
#include "robust_phase/oracle.hpp"
#include "robust_phase/random.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

namespace robust_phase {

// ---------------------------------------------------------------------------
// key=value configuration

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split_list(std::string_view s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = s.find(',', start);
    auto item = trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (!item.empty()) out.push_back(std::move(item));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

/// Ordered key=value map. '#' starts a comment; later assignments win.
class KeyValueConfig {
 public:
  static KeyValueConfig parse(std::istream& is) {
    KeyValueConfig cfg;
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
      ++lineno;
      if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      if (trim(line).empty()) continue;
      cfg.set_assignment(line, "line " + std::to_string(lineno));
    }
    return cfg;
  }

  void set_assignment(std::string_view assignment, const std::string& where = "assignment") {
    const auto eq = assignment.find('=');
    if (eq == std::string_view::npos)
      throw InvalidArgument("config " + where + ": expected key=value, got '" +
                            std::string(assignment) + "'");
    const auto key = trim(assignment.substr(0, eq));
    if (key.empty()) throw InvalidArgument("config " + where + ": empty key");
    set(key, trim(assignment.substr(eq + 1)));
  }

  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  bool has(const std::string& key) const { return values_.count(key) != 0; }
  std::optional<std::string> get(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    return it->second;
  }
  std::string get_or(const std::string& key, const std::string& fallback) const {
    return get(key).value_or(fallback);
  }
  double get_real(const std::string& key, double fallback) const {
    const auto v = get(key);
    return v ? to_real(key, *v) : fallback;
  }
  long get_int(const std::string& key, long fallback) const {
    const auto v = get(key);
    return v ? to_int(key, *v) : fallback;
  }
  std::vector<std::string> get_list(const std::string& key) const {
    const auto v = get(key);
    return v ? split_list(*v) : std::vector<std::string>{};
  }

  static double to_real(const std::string& key, const std::string& v) {
    char* end = nullptr;
    const double x = std::strtod(v.c_str(), &end);
    if (v.empty() || *end != '\0') throw InvalidArgument("config '" + key + "': not a number: " + v);
    return x;
  }
  static long to_int(const std::string& key, const std::string& v) {
    char* end = nullptr;
    const long x = std::strtol(v.c_str(), &end, 10);
    if (v.empty() || *end != '\0') throw InvalidArgument("config '" + key + "': not an integer: " + v);
    return x;
  }

  /// "# key=value" lines, in key order.
  void echo(std::ostream& os) const {
    for (const auto& [k, v] : values_) os << "# " << k << '=' << v << '\n';
  }

 private:
  std::map<std::string, std::string> values_;
};

// ---------------------------------------------------------------------------
// regimes and corruption specs

struct RegimeRule {
  std::string label;
  std::string k_expr;
};

/// Pre-registered names (sqrt_n, n_2_3, const_<p>) or "label:expression".
inline RegimeRule parse_regime(const std::string& spec) {
  if (const auto colon = spec.find(':'); colon != std::string::npos)
    return {trim(spec.substr(0, colon)), trim(spec.substr(colon + 1))};
  if (spec == "sqrt_n") return {spec, "ceil(sqrt(n))"};
  if (spec == "n_2_3") return {spec, "ceil(n^(2/3))"};
  if (spec == "none") return {spec, "0"};
  if (spec.rfind("const_", 0) == 0) {
    const double p = KeyValueConfig::to_real("regimes", spec.substr(6));
    if (!(p >= 0.0 && p < 0.5)) throw InvalidArgument("regime " + spec + ": proportion must be in [0, 0.5)");
    return {spec, "ceil(" + spec.substr(6) + "*n)"};
  }
  throw InvalidArgument("unknown regime '" + spec + "' (use sqrt_n, n_2_3, const_<p> or label:expr)");
}

/// Parses "none", "uniform(lo,hi)", "constant(c)" or "signflip" into a plan
/// for k corruptions.
inline CorruptionPlan parse_corruption(const std::string& spec, std::size_t k) {
  CorruptionPlan plan;
  plan.k = k;
  const std::string s = trim(spec);
  auto args = [&](const std::string& name) {
    if (s.size() < name.size() + 2 || s.back() != ')')
      throw InvalidArgument("corruption '" + s + "': expected " + name + "(...)");
    std::vector<double> out;
    for (const auto& a : split_list(s.substr(name.size() + 1, s.size() - name.size() - 2)))
      out.push_back(KeyValueConfig::to_real("corruption", a));
    return out;
  };
  if (s == "none") {
    plan.kind = corruption::None{};
    plan.k = 0;
  } else if (s.rfind("uniform(", 0) == 0) {
    const auto a = args("uniform");
    if (a.size() != 2 || !(a[0] <= a[1])) throw InvalidArgument("corruption uniform(lo,hi) needs lo <= hi");
    plan.kind = corruption::Uniform{a[0], a[1]};
  } else if (s.rfind("constant(", 0) == 0) {
    const auto a = args("constant");
    if (a.size() != 1) throw InvalidArgument("corruption constant(c) takes one value");
    plan.kind = corruption::Constant{a[0]};
  } else if (s == "signflip") {
    plan.selection = Selection::adversarial_rule;
    plan.kind = corruption::Adaptive{[](const Measurement& m) { return -(m.response - m.true_corruption); }};
  } else {
    throw InvalidArgument("unknown corruption '" + s + "'");
  }
  return plan;
}

inline KappaEstimator parse_kappa(const std::string& s) {
  if (s == "moments") return KappaEstimator::moments;
  if (s == "trace") return KappaEstimator::trace;
  throw InvalidArgument("kappa must be 'moments' or 'trace', got '" + s + "'");
}

/// Solver knobs shared by run and sweep: k, beta, max_outer_iters, step_scale,
/// max_iters, grad_tol, kappa. "auto" keeps the default.
inline AltMinConfig solver_config(const KeyValueConfig& cfg, std::size_t k) {
  AltMinConfig out;
  out.k = k;
  if (auto b = cfg.get("beta"); b && *b != "auto") out.beta = KeyValueConfig::to_real("beta", *b);
  if (auto m = cfg.get("max_outer_iters"); m && *m != "auto")
    out.max_outer_iters = KeyValueConfig::to_int("max_outer_iters", *m);
  out.oracle_cfg.step_scale_c = cfg.get_real("step_scale", 0.1);
  if (auto t = cfg.get("max_iters"); t && *t != "auto")
    out.oracle_cfg.max_iters_T = static_cast<int>(KeyValueConfig::to_int("max_iters", *t));
  out.oracle_cfg.grad_tol = cfg.get_real("grad_tol", 1e-10);
  out.oracle_cfg.kappa_estimator = parse_kappa(cfg.get_or("kappa", "moments"));
  return out;
}

// ---------------------------------------------------------------------------
// synthetic problem instances

struct SyntheticProblem {
  SignalVec theta_star;
  MeasurementSet data;
};

/// theta* uniform on the sphere of radius theta_norm and covariates depend on
/// (seed, d) only; the corruption depends on the extra corruption stream.
inline SyntheticProblem make_problem(std::size_t d, std::size_t n, double theta_norm,
                                     const CorruptionPlan& plan, std::uint64_t seed,
                                     const RngSeed& corruption_stream) {
  const RngSeed base = RngSeed{seed, 0}.child(static_cast<std::uint64_t>(d));
  Rng theta_rng(base.child("theta_star"));
  SignalVec theta_star = theta_norm * theta_rng.unit_sphere(d);
  auto clean = generate_clean(d, n, theta_star, base.child("covariates"));
  auto data = apply_corruption(clean, plan, corruption_stream);
  return {std::move(theta_star), std::move(data)};
}

// ---------------------------------------------------------------------------
// sweeps

struct ExperimentConfig {
  std::vector<std::size_t> dims;
  std::string n_rule = "ceil(10*d*ln(d))";
  std::vector<RegimeRule> regimes;
  std::string corruption = "uniform(-5,5)";
  std::vector<std::uint64_t> seeds;
  double theta_norm = 1.0;
  KeyValueConfig raw;

  static ExperimentConfig from(const KeyValueConfig& cfg) {
    ExperimentConfig e;
    e.raw = cfg;
    for (const auto& s : cfg.get_list("d")) {
      const long v = KeyValueConfig::to_int("d", s);
      if (v < 1) throw InvalidArgument("d must be >= 1");
      e.dims.push_back(static_cast<std::size_t>(v));
    }
    if (e.dims.empty()) throw InvalidArgument("config needs d (comma-separated list)");
    e.n_rule = cfg.get_or("n_rule", e.n_rule);
    if (auto n = cfg.get("n")) e.n_rule = *n;
    for (const auto& r : cfg.get_list("regimes")) e.regimes.push_back(parse_regime(r));
    if (e.regimes.empty()) throw InvalidArgument("regimes list is empty");
    e.corruption = cfg.get_or("corruption", e.corruption);
    for (const auto& s : cfg.get_list("seeds"))
      e.seeds.push_back(static_cast<std::uint64_t>(KeyValueConfig::to_int("seeds", s)));
    if (e.seeds.empty()) e.seeds = {1, 2, 3, 4, 5};
    e.theta_norm = cfg.get_real("theta_norm", 1.0);
    if (!(e.theta_norm > 0.0)) throw InvalidArgument("theta_norm must be > 0");
    // validate every (n, k) up front
    for (std::size_t d : e.dims)
      for (const auto& r : e.regimes) {
        const auto [n, k] = e.sizes(d, r);
        if (!(2 * k < n))
          throw InvalidArgument("regime " + r.label + " at d=" + std::to_string(d) +
                                " gives 2k >= n (n=" + std::to_string(n) + ", k=" + std::to_string(k) + ")");
        parse_corruption(e.corruption, k);
      }
    return e;
  }

  std::pair<std::size_t, std::size_t> sizes(std::size_t d, const RegimeRule& r) const {
    const Bindings vars{{"d", static_cast<double>(d)}};
    const long n = evaluate_count(n_rule, vars);
    if (n < 1) throw InvalidArgument("n rule gives n < 1");
    const long k = evaluate_count(r.k_expr, {{"d", static_cast<double>(d)}, {"n", static_cast<double>(n)}});
    return {static_cast<std::size_t>(n), static_cast<std::size_t>(k)};
  }
};

struct TrialOutcome {
  TrialRecord record;
  std::optional<AltMinResult> result;
  std::optional<SignalVec> theta_star;
  std::string error;
};

/// One (d, regime, seed) cell. Exceptions are caught and recorded.
inline TrialOutcome run_trial(const ExperimentConfig& exp, std::size_t d, const RegimeRule& regime,
                              std::uint64_t seed) {
  TrialOutcome out;
  auto& rec = out.record;
  rec.seed = seed;
  rec.d = d;
  rec.regime_label = regime.label;
  const auto start = std::chrono::steady_clock::now();
  try {
    const auto [n, k] = exp.sizes(d, regime);
    rec.n = n;
    rec.k = k;
    const RngSeed cell = RngSeed{seed, 0}.child(static_cast<std::uint64_t>(d)).child(regime.label);
    const auto plan = parse_corruption(exp.corruption, k);
    auto problem = make_problem(d, n, exp.theta_norm, plan, seed, cell.child("corruption"));
    const AltMinConfig solver = solver_config(exp.raw, k);
    auto res = run_altmin(problem.data, solver, cell.child("oracle"), problem.theta_star);
    rec.rel_error = relative_error(res.theta_hat, problem.theta_star);
    rec.outer_iters = res.outer_iters;
    rec.oracle_iters_total = res.oracle_iters_total;
    rec.termination = to_string(res.termination);
    out.result = std::move(res);
    out.theta_star = std::move(problem.theta_star);
  } catch (const std::exception& e) {
    out.error = e.what();
    rec.rel_error = std::numeric_limits<double>::quiet_NaN();
    rec.termination = "error";
  }
  rec.wall_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                    std::chrono::steady_clock::now() - start)
                    .count();
  return out;
}

/// Worker count: ROBUST_PHASE_THREADS, else the requested value, else the CPU count.
inline unsigned resolve_parallelism(std::optional<long> requested) {
  if (const char* env = std::getenv("ROBUST_PHASE_THREADS"); env && *env) {
    const long v = std::strtol(env, nullptr, 10);
    if (v >= 1) return static_cast<unsigned>(v);
  }
  if (requested && *requested >= 1) return static_cast<unsigned>(*requested);
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Runs every cell on a worker pool; the result is sorted by (regime, d, seed)
/// whatever the scheduling.
inline std::vector<TrialOutcome> run_sweep(const ExperimentConfig& exp, unsigned parallelism) {
  struct Cell {
    std::size_t d;
    const RegimeRule* regime;
    std::uint64_t seed;
  };
  std::vector<Cell> cells;
  for (const auto& r : exp.regimes)
    for (std::size_t d : exp.dims)
      for (std::uint64_t s : exp.seeds) cells.push_back({d, &r, s});
  std::sort(cells.begin(), cells.end(), [](const Cell& a, const Cell& b) {
    return std::tie(a.regime->label, a.d, a.seed) < std::tie(b.regime->label, b.d, b.seed);
  });

  std::vector<TrialOutcome> out(cells.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++)
      out[i] = run_trial(exp, cells[i].d, *cells[i].regime, cells[i].seed);
  };
  const unsigned workers = std::max(1u, std::min<unsigned>(parallelism, static_cast<unsigned>(cells.size())));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
  }
  return out;
}

inline std::vector<TrialRecord> records_of(const std::vector<TrialOutcome>& outcomes) {
  std::vector<TrialRecord> out;
  out.reserve(outcomes.size());
  for (const auto& o : outcomes) out.push_back(o.record);
  return out;
}

}  // namespace robust_phase
