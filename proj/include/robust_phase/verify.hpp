#pragma once

// Independent oracles and statistical checks: finite differences, exhaustive
// subset search, and Monte Carlo probes of Gaussian tail and moment facts.

#include "robust_phase/altmin.hpp"
#include "robust_phase/core.hpp"
#include "robust_phase/datagen.hpp"
#include "robust_phase/measurement.hpp"
#include "robust_phase/objective.hpp"
#include "robust_phase/random.hpp"

#include <json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

namespace robust_phase {

struct CheckReport {
  std::string name;
  bool passed = false;
  double observed = 0.0;
  double threshold = 0.0;
  std::string detail;
};

inline void write_report_jsonl(std::ostream& os, const CheckReport& r) {
  nlohmann::json j = {
      {"name", r.name}, {"passed", r.passed}, {"observed", r.observed}, {"threshold", r.threshold}};
  os << j.dump() << '\n';
}

/// Central differences of loss() per coordinate.
inline SignalVec finite_diff_gradient(const MeasurementSet& data, const IndexSet& subset,
                                      const SignalVec& theta, double h) {
  if (!(h > 0.0)) throw InvalidArgument("finite-difference step must be > 0");
  Eigen::VectorXd g(static_cast<Eigen::Index>(theta.dim()));
  for (std::size_t j = 0; j < theta.dim(); ++j) {
    Eigen::VectorXd plus = theta.vec(), minus = theta.vec();
    plus(static_cast<Eigen::Index>(j)) += h;
    minus(static_cast<Eigen::Index>(j)) -= h;
    const double fp = loss(data, subset, SignalVec(std::move(plus)));
    const double fm = loss(data, subset, SignalVec(std::move(minus)));
    g(static_cast<Eigen::Index>(j)) = (fp - fm) / (2.0 * h);
  }
  return SignalVec(std::move(g));
}

/// (f(theta + h v) - 2 f(theta) + f(theta - h v)) / h^2 ~ v^T H v.
inline double finite_diff_curvature(const MeasurementSet& data, const IndexSet& subset,
                                    const SignalVec& theta, const SignalVec& v, double h) {
  if (!(h > 0.0)) throw InvalidArgument("finite-difference step must be > 0");
  const double fp = loss(data, subset, SignalVec(Eigen::VectorXd(theta.vec() + h * v.vec())));
  const double f0 = loss(data, subset, theta);
  const double fm = loss(data, subset, SignalVec(Eigen::VectorXd(theta.vec() - h * v.vec())));
  return (fp - 2.0 * f0 + fm) / (h * h);
}

inline double binomial(std::size_t n, std::size_t k) {
  if (k > n) return 0.0;
  k = std::min(k, n - k);
  double c = 1.0;
  for (std::size_t i = 1; i <= k; ++i) c = c * static_cast<double>(n - k + i) / static_cast<double>(i);
  return c;
}

/// Exhaustive minimization of sum_{i in U} f_i(theta) over U subset of S~,
/// |U| = size. Ties resolve to the lexicographically smallest index list.
inline IndexSet brute_force_select(const MeasurementSet& data, const IndexSet& s_tilde,
                                   const SignalVec& theta, std::size_t size) {
  const std::size_t m = s_tilde.size();
  if (size > m) throw InvalidArgument("brute_force_select: size exceeds |S~|");
  if (binomial(m, size) > 1e6) throw InvalidArgument("brute_force_select: more than 1e6 subsets");
  std::vector<double> res(m);
  for (std::size_t j = 0; j < m; ++j) res[j] = sample_residual(data, s_tilde[j], theta);

  // Sum of a subset computed over its values in ascending order, so equal
  // multisets give bitwise-equal sums.
  std::vector<double> buf;
  auto subset_sum = [&](const std::vector<std::size_t>& pos) {
    buf.clear();
    for (std::size_t p : pos) buf.push_back(res[p]);
    std::sort(buf.begin(), buf.end());
    long double s = 0.0L;
    for (double v : buf) s += v;
    return s;
  };

  std::vector<std::size_t> pos(size);
  for (std::size_t j = 0; j < size; ++j) pos[j] = j;
  std::vector<std::size_t> best = pos;
  long double best_sum = subset_sum(pos);
  // combinations visited in lexicographic order; keep the first minimum
  for (;;) {
    std::size_t i = size;
    while (i > 0 && pos[i - 1] == m - size + (i - 1)) --i;
    if (i == 0) break;
    ++pos[i - 1];
    for (std::size_t j = i; j < size; ++j) pos[j] = pos[j - 1] + 1;
    const long double s = subset_sum(pos);
    if (s < best_sum) {
      best_sum = s;
      best = pos;
    }
  }
  std::vector<std::size_t> out;
  out.reserve(size);
  for (std::size_t p : best) out.push_back(s_tilde[p]);
  return IndexSet(std::move(out));
}

/// Monte Carlo estimate of P[max_i g_i^2 >= multiplier * ln n] over n standard
/// normals. Passes if the estimate is at most 2/n plus three binomial standard
/// errors (computed at p = min(2/n, 1)).
inline CheckReport max_chisq_tail_check(std::size_t n, std::size_t trials, const RngSeed& seed,
                                        double multiplier = 8.0) {
  if (n < 2) throw InvalidArgument("max_chisq_tail_check needs n >= 2");
  if (trials < 100) throw InvalidArgument("max_chisq_tail_check needs trials >= 100");
  Rng rng(seed);
  const double level = multiplier * std::log(static_cast<double>(n));
  std::size_t hits = 0;
  for (std::size_t t = 0; t < trials; ++t) {
    double mx = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double g = rng.gaussian();
      mx = std::max(mx, g * g);
    }
    if (mx >= level) ++hits;
  }
  const double p_hat = static_cast<double>(hits) / static_cast<double>(trials);
  const double p0 = std::min(2.0 / static_cast<double>(n), 1.0);
  const double threshold = p0 + 3.0 * std::sqrt(p0 * (1.0 - p0) / static_cast<double>(trials));
  CheckReport r;
  r.name = "max_chisq_tail(n=" + std::to_string(n) + ")";
  r.observed = p_hat;
  r.threshold = threshold;
  r.passed = p_hat <= threshold;
  r.detail = std::to_string(hits) + "/" + std::to_string(trials) + " trials reached " +
             format_real(level);
  return r;
}

/// Moments of N(0, 1): E g^j for j = 0..4. Values are the 20-node
/// Gauss-Hermite quadrature results (exact for polynomials of degree < 40),
/// cross-checked in tests/verify_test.cpp.
inline constexpr std::array<double, 5> kGaussianMoments = {1.0, 0.0, 1.0, 0.0, 3.0};

enum class ProbeDirection { aligned, orthogonal };

/// E[<x,z>^p x_1^q] for x ~ N(0, I): z = e_1 gives E g^{p+q}; z = e_2 gives
/// E g^p * E h^q.
inline double gaussian_moment_constant(int p, int q, ProbeDirection dir) {
  if (dir == ProbeDirection::aligned) return kGaussianMoments[static_cast<std::size_t>(p + q)];
  return kGaussianMoments[static_cast<std::size_t>(p)] * kGaussianMoments[static_cast<std::size_t>(q)];
}

/// Averages <x_i,z>^p x_{i1}^q over trials * n Gaussian samples and checks the
/// mean is within three standard errors of the Gaussian moment constant.
/// z = e_1 when q = 0, otherwise e_2.
inline CheckReport concentration_probe(std::size_t d, std::size_t n, int p, int q,
                                       std::size_t trials, const RngSeed& seed) {
  if (p + q != 4 || p < 2 || p > 4) throw InvalidArgument("concentration_probe needs p+q=4, p in {2,3,4}");
  const ProbeDirection dir = q == 0 ? ProbeDirection::aligned : ProbeDirection::orthogonal;
  if (dir == ProbeDirection::orthogonal && d < 2)
    throw InvalidArgument("orthogonal probe direction needs d >= 2");
  if (d < 1 || n < 2 || trials < 1) throw InvalidArgument("concentration_probe needs d >= 1, n >= 2");
  const double target = gaussian_moment_constant(p, q, dir);
  Rng rng(seed);
  CompensatedSum s1, s2;
  const std::size_t total = n * trials;
  for (std::size_t i = 0; i < total; ++i) {
    const Eigen::VectorXd x = rng.gaussian_vector(d);
    const double xz = dir == ProbeDirection::aligned ? x(0) : x(1);
    const double w = std::pow(xz, p) * std::pow(x(0), q);
    s1.add(w);
    s2.add(static_cast<long double>(w) * w);
  }
  const long double m = static_cast<long double>(total);
  const double mean = static_cast<double>(s1.value() / m);
  const double var = static_cast<double>(std::max(0.0L, (s2.value() / m - (s1.value() / m) * (s1.value() / m)) * m / (m - 1.0L)));
  CheckReport r;
  r.name = "concentration(p=" + std::to_string(p) + ",q=" + std::to_string(q) +
           (dir == ProbeDirection::aligned ? ",z=e1" : ",z=e2") + ")";
  r.observed = std::fabs(mean - target);
  r.threshold = 3.0 * std::sqrt(var / static_cast<double>(total));
  r.passed = r.observed <= r.threshold;
  r.detail = "mean=" + format_real(mean) + " target=" + format_real(target);
  return r;
}

// ---------------------------------------------------------------------------
// Randomized oracle comparisons.

struct SmallInstance {
  MeasurementSet data;
  IndexSet subset;
  SignalVec theta;
  SignalVec direction;
};

/// d in [1, max_d], n in [1, max_n], Gaussian design, about a quarter of
/// responses shifted by Uniform[-5, 5], random subset and evaluation point.
inline SmallInstance random_small_instance(Rng& rng, std::size_t max_d = 8, std::size_t max_n = 32) {
  const std::size_t d = 1 + rng.index(max_d);
  const std::size_t n = 1 + rng.index(max_n);
  const SignalVec theta_star(rng.gaussian_vector(d));
  auto clean = generate_clean(d, n, theta_star, {rng.engine()(), 0});
  CorruptionPlan plan;
  plan.kind = corruption::Uniform{-5.0, 5.0};
  plan.k = rng.index(n / 4 + 1);
  auto data = apply_corruption(clean, plan, {rng.engine()(), 1});
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < n; ++i)
    if (rng.uniform() < 0.7) idx.push_back(i);
  if (idx.empty()) idx.push_back(rng.index(n));
  return {std::move(data), IndexSet(std::move(idx)), SignalVec(rng.gaussian_vector(d)),
          SignalVec(rng.gaussian_vector(d))};
}

/// Test hook: perturbs the analytic gradient to prove the check can fail.
struct FaultInjection {
  bool wrong_gradient = false;
};

inline CheckReport gradient_fd_check(std::size_t instances, const RngSeed& seed,
                                     FaultInjection fault = {}) {
  Rng rng(seed);
  double worst = 0.0;
  for (std::size_t t = 0; t < instances; ++t) {
    const auto inst = random_small_instance(rng);
    Eigen::VectorXd g = gradient(inst.data, inst.subset, inst.theta).vec();
    if (fault.wrong_gradient) g *= 1.01;
    const double h = 1e-5 * (1.0 + inst.theta.norm());
    const Eigen::VectorXd fd = finite_diff_gradient(inst.data, inst.subset, inst.theta, h).vec();
    const double denom = std::max({g.norm(), fd.norm(), 1e-8});
    worst = std::max(worst, (g - fd).norm() / denom);
  }
  return {"gradient_vs_finite_differences", worst <= 1e-6, worst, 1e-6,
          std::to_string(instances) + " instances"};
}

inline CheckReport hessian_fd_check(std::size_t instances, const RngSeed& seed) {
  Rng rng(seed);
  double worst = 0.0;
  for (std::size_t t = 0; t < instances; ++t) {
    const auto inst = random_small_instance(rng);
    const SignalVec v = (1.0 / inst.direction.norm()) * inst.direction;
    const double q = hessian_quadratic_form(inst.data, inst.subset, inst.theta, v);
    const double h = 1e-4 * (1.0 + inst.theta.norm());
    const double fd = finite_diff_curvature(inst.data, inst.subset, inst.theta, v, h);
    // magnitude of the terms of the mixed-sign sum, to floor the denominator
    long double scale = 0.0L;
    for (std::size_t i : inst.subset) {
      const double a = inner(inst.data.covariate(i), inst.theta.vec());
      const double b = inner(inst.data.covariate(i), v.vec());
      scale += (3.0 * a * a + std::fabs(inst.data.response(i))) * b * b;
    }
    const double floor = 1e-6 * static_cast<double>(scale / inst.subset.size());
    const double denom = std::max({std::fabs(q), std::fabs(fd), floor, 1e-300});
    worst = std::max(worst, std::fabs(q - fd) / denom);
  }
  return {"hessian_vs_second_differences", worst <= 1e-4, worst, 1e-4,
          std::to_string(instances) + " instances"};
}

/// select_subset vs brute_force_select on random instances with |S~| <= 12.
/// Every fifth instance evaluates at theta* of clean data, so all residuals
/// tie at 0 and the tie-break is exercised.
inline CheckReport selection_brute_force_check(std::size_t instances, const RngSeed& seed) {
  Rng rng(seed);
  std::size_t mismatches = 0;
  for (std::size_t t = 0; t < instances; ++t) {
    const std::size_t n = 3 + rng.index(12);  // n in [3, 14]
    const std::size_t d = 1 + rng.index(4);
    const std::size_t k = rng.index((n - 1) / 2 + 1);  // 2k < n
    const SignalVec theta_star(rng.gaussian_vector(d));
    auto data = generate_clean(d, n, theta_star, {rng.engine()(), 0});
    const bool ties = t % 5 == 0;
    if (!ties && k > 0) {
      CorruptionPlan plan;
      plan.kind = corruption::Uniform{-5.0, 5.0};
      plan.k = k;
      data = apply_corruption(data, plan, {rng.engine()(), 1});
    }
    const IndexSet s_tilde = preprocess(data, k);
    const std::size_t size = std::min(n - 2 * k, s_tilde.size());
    const SignalVec theta = ties ? theta_star : SignalVec(rng.gaussian_vector(d));
    const auto fast = select_subset_of_size(data, s_tilde, theta, size);
    const auto slow = brute_force_select(data, s_tilde, theta, size);
    if (!(fast == slow)) ++mismatches;
  }
  return {"selection_vs_brute_force", mismatches == 0, static_cast<double>(mismatches), 0.0,
          std::to_string(instances) + " instances"};
}

// ---------------------------------------------------------------------------
// Check registry driven by the `verify` subcommand.

class CheckRegistry {
 public:
  using Check = std::function<CheckReport()>;

  void add(std::string name, Check check) { checks_.emplace_back(std::move(name), std::move(check)); }
  std::size_t size() const noexcept { return checks_.size(); }
  bool empty() const noexcept { return checks_.empty(); }
  const std::vector<std::pair<std::string, Check>>& checks() const noexcept { return checks_; }

  /// Keeps only checks whose name contains the filter.
  CheckRegistry filtered(const std::string& filter) const {
    CheckRegistry out;
    for (const auto& [name, check] : checks_)
      if (name.find(filter) != std::string::npos) out.add(name, check);
    return out;
  }

  std::vector<CheckReport> run_all() const {
    std::vector<CheckReport> out;
    out.reserve(checks_.size());
    for (const auto& [name, check] : checks_) out.push_back(check());
    return out;
  }

 private:
  std::vector<std::pair<std::string, Check>> checks_;
};

/// The standard suite with fixed seeds.
inline CheckRegistry default_checks(FaultInjection fault = {}) {
  CheckRegistry reg;
  reg.add("gradient", [fault] { return gradient_fd_check(100, {11, 0}, fault); });
  reg.add("hessian", [] { return hessian_fd_check(100, {12, 0}); });
  reg.add("selection", [] { return selection_brute_force_check(200, {13, 0}); });
  for (std::size_t n : {100u, 1000u, 10000u})
    reg.add("max_chisq_" + std::to_string(n), [n] { return max_chisq_tail_check(n, 1000, {14, n}); });
  reg.add("concentration_4_0", [] { return concentration_probe(10, 100000, 4, 0, 1, {15, 0}); });
  reg.add("concentration_2_2", [] { return concentration_probe(10, 100000, 2, 2, 1, {15, 1}); });
  reg.add("concentration_3_1", [] { return concentration_probe(10, 100000, 3, 1, 1, {15, 2}); });
  return reg;
}

}  // namespace robust_phase
