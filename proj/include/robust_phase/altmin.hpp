#pragma once

// Alternating minimization with residual trimming: preprocess the responses,
// then alternate between picking the n - 2k best-fitting measurements and
// calling the least-squares oracle on them, until the per-round decrease of
// the subset loss drops below beta.

#include "robust_phase/core.hpp"
#include "robust_phase/measurement.hpp"
#include "robust_phase/objective.hpp"
#include "robust_phase/oracle.hpp"
#include "robust_phase/random.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace robust_phase {

struct AltMinConfig {
  /// Assumed number of corrupted measurements; needs 2k < n.
  std::size_t k = 0;
  /// Stop threshold; empty means (k/n)^2, or 1e-12 when k = 0.
  std::optional<double> beta;
  /// Safety cap on outer rounds; empty means iteration_bound().
  std::optional<long> max_outer_iters;
  OracleConfig oracle_cfg;

  double resolved_beta(std::size_t n) const {
    if (beta) return *beta;
    if (k == 0) return 1e-12;
    const double eps = static_cast<double>(k) / static_cast<double>(n);
    return eps * eps;
  }

  void validate(std::size_t n) const {
    if (!(2 * k < n))
      throw InvalidArgument("altmin requires 2k < n (k=" + std::to_string(k) +
                            ", n=" + std::to_string(n) + ")");
    if (beta && !(*beta > 0.0)) throw InvalidArgument("beta must be > 0");
    if (max_outer_iters && *max_outer_iters < 0)
      throw InvalidArgument("max_outer_iters must be >= 0");
    oracle_cfg.validate();
  }
};

enum class Termination { beta_stop, iter_cap, oracle_error };

inline const char* to_string(Termination t) {
  switch (t) {
    case Termination::beta_stop: return "beta_stop";
    case Termination::iter_cap: return "iter_cap";
    case Termination::oracle_error: return "oracle_error";
  }
  return "unknown";
}

/// One outer round t of the run log.
struct RoundLog {
  long outer_iter;
  /// f_{U^t}(theta^t)
  double subset_loss;
  /// f_{U^t}(theta^t) - f_{U^t}(theta^{t+1}); NaN when the oracle failed.
  double decrease;
  /// d(theta^t, theta*), NaN without ground truth.
  double dist_to_truth;
};

struct AltMinResult {
  SignalVec theta_hat;
  IndexSet u_hat;
  /// Oracle calls made.
  long outer_iters = 0;
  Termination termination = Termination::beta_stop;
  /// f_{U^t}(theta^t) for every accepted iterate theta^t, t = 1, 2, ...
  std::vector<double> loss_history;
  std::vector<RoundLog> rounds;
  double beta = 0.0;
  long iteration_bound = 0;
  long oracle_iters_total = 0;
  /// More negative responses than k; S~ is smaller than n - k.
  bool negatives_exceed_k = false;
  std::string error;
  long error_iteration = -1;
};

struct PreprocessResult {
  IndexSet kept;
  bool negatives_exceed_k = false;
};

/// Drops every negative response, then the largest remaining ones until
/// n - k are left. With more than k negatives, only the negatives are dropped
/// and the flag is set.
inline PreprocessResult preprocess_detailed(const MeasurementSet& data, std::size_t k) {
  const std::size_t n = data.n();
  if (k >= n) throw InvalidArgument("preprocess requires k < n");
  std::vector<std::size_t> nonneg;
  nonneg.reserve(n);
  for (std::size_t i = 0; i < n; ++i)
    if (!(data.response(i) < 0.0)) nonneg.push_back(i);
  const std::size_t negatives = n - nonneg.size();
  PreprocessResult out;
  if (negatives > k) {
    out.negatives_exceed_k = true;
    out.kept = IndexSet(std::move(nonneg));
    return out;
  }
  const std::size_t keep = n - k;
  // ascending response, ties to the lower index, so the largest go last
  std::stable_sort(nonneg.begin(), nonneg.end(), [&](std::size_t a, std::size_t b) {
    return data.response(a) < data.response(b);
  });
  nonneg.resize(keep);
  out.kept = IndexSet(std::move(nonneg));
  return out;
}

inline IndexSet preprocess(const MeasurementSet& data, std::size_t k) {
  return preprocess_detailed(data, k).kept;
}

/// argmin over U subset of S~ with |U| = size of sum_{i in U} f_i(theta). The
/// objective is separable, so sorting residuals (ties by index) is exact.
inline IndexSet select_subset_of_size(const MeasurementSet& data, const IndexSet& s_tilde,
                                      const SignalVec& theta, std::size_t size) {
  if (s_tilde.size() < size)
    throw InvalidArgument("select_subset: |S~| = " + std::to_string(s_tilde.size()) +
                          " is smaller than the requested " + std::to_string(size));
  if (!s_tilde.within(data.n())) throw InvalidArgument("S~ index out of range");
  struct Scored {
    double residual;
    std::size_t index;
  };
  std::vector<Scored> scored;
  scored.reserve(s_tilde.size());
  for (std::size_t i : s_tilde) scored.push_back({sample_residual(data, i, theta), i});
  auto less = [](const Scored& a, const Scored& b) {
    return a.residual < b.residual || (a.residual == b.residual && a.index < b.index);
  };
  std::nth_element(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(size),
                   scored.end(), less);
  std::vector<std::size_t> chosen;
  chosen.reserve(size);
  for (std::size_t j = 0; j < size; ++j) chosen.push_back(scored[j].index);
  return IndexSet(std::move(chosen));
}

inline IndexSet select_subset(const MeasurementSet& data, const IndexSet& s_tilde,
                              const SignalVec& theta, std::size_t k) {
  if (2 * k >= data.n()) throw InvalidArgument("select_subset requires 2k < n");
  return select_subset_of_size(data, s_tilde, theta, data.n() - 2 * k);
}

/// ceil(sum_i y_i^2 / (4 (n - 2k) beta)) over all n responses.
inline long iteration_bound(const MeasurementSet& data, const AltMinConfig& cfg) {
  cfg.validate(data.n());
  CompensatedSum s;
  for (double y : data.responses()) s.add(static_cast<long double>(y) * y);
  const long double denom =
      4.0L * static_cast<long double>(data.n() - 2 * cfg.k) * cfg.resolved_beta(data.n());
  const long double bound = std::ceil(s.value() / denom);
  if (bound > static_cast<long double>(std::numeric_limits<long>::max() / 2))
    return std::numeric_limits<long>::max() / 2;
  return static_cast<long>(bound);
}

/// Runs the alternating minimization. Starts from theta^1 = 0; in round t it
/// selects U^t at theta^t, calls the oracle for theta^{t+1}, and stops with
/// (theta^t, U^t) once f_{U^t}(theta^t) - f_{U^t}(theta^{t+1}) < beta.
/// Oracle failures end the run with termination = oracle_error and the last
/// accepted iterate.
inline AltMinResult run_altmin(const MeasurementSet& data, const AltMinConfig& cfg,
                               const RngSeed& seed,
                               const std::optional<SignalVec>& theta_star = std::nullopt) {
  cfg.validate(data.n());
  const std::size_t n = data.n();
  const std::size_t size = n - 2 * cfg.k;

  AltMinResult res{SignalVec::zeros(data.d()), IndexSet{}};
  res.beta = cfg.resolved_beta(n);
  res.iteration_bound = iteration_bound(data, cfg);
  const long cap = cfg.max_outer_iters.value_or(res.iteration_bound);

  const auto pre = preprocess_detailed(data, cfg.k);
  res.negatives_exceed_k = pre.negatives_exceed_k;
  const IndexSet& s_tilde = pre.kept;
  // Only happens with more negatives than k; keep whatever survived.
  const std::size_t select_size = std::min(size, s_tilde.size());
  if (select_size == 0) throw InvalidArgument("no measurements left after preprocessing");

  auto truth_dist = [&](const SignalVec& th) {
    return theta_star ? sign_invariant_distance(th, *theta_star)
                      : std::numeric_limits<double>::quiet_NaN();
  };

  SignalVec theta = SignalVec::zeros(data.d());
  IndexSet u = select_subset_of_size(data, s_tilde, theta, select_size);
  double current = loss(data, u, theta);
  res.loss_history.push_back(current);
  res.termination = Termination::iter_cap;

  for (long t = 1; t <= cap; ++t) {
    std::optional<OracleResult> next;
    try {
      next = run_oracle(data, u, cfg.oracle_cfg, seed.child(static_cast<std::uint64_t>(t)));
    } catch (const NumericalError& e) {
      res.outer_iters = t;
      res.termination = Termination::oracle_error;
      res.error = e.what();
      res.error_iteration = e.iteration();
      res.rounds.push_back({t, current, std::numeric_limits<double>::quiet_NaN(), truth_dist(theta)});
      break;
    }
    res.outer_iters = t;
    res.oracle_iters_total += next->iters_run;
    const double decrease = current - loss(data, u, next->theta);
    res.rounds.push_back({t, current, decrease, truth_dist(theta)});
    if (!(decrease >= res.beta)) {
      res.termination = Termination::beta_stop;
      break;
    }
    theta = std::move(next->theta);
    u = select_subset_of_size(data, s_tilde, theta, select_size);
    current = loss(data, u, theta);
    res.loss_history.push_back(current);
  }

  res.theta_hat = std::move(theta);
  res.u_hat = std::move(u);
  return res;
}

/// <grad f_U(theta_hat), theta_hat - t> / |theta_hat - t| with t = +-theta*
/// whichever is closer; 0 when theta_hat equals +-theta*.
inline double stationarity_gap(const MeasurementSet& data, const IndexSet& u_hat,
                               const SignalVec& theta_hat, const SignalVec& theta_star) {
  SignalVec::require_same_dim(theta_hat, theta_star);
  const double dm = (theta_hat.vec() - theta_star.vec()).norm();
  const double dp = (theta_hat.vec() + theta_star.vec()).norm();
  const Eigen::VectorXd err = dm <= dp ? Eigen::VectorXd(theta_hat.vec() - theta_star.vec())
                                       : Eigen::VectorXd(theta_hat.vec() + theta_star.vec());
  const double nrm = err.norm();
  if (nrm == 0.0) return 0.0;
  return gradient(data, u_hat, theta_hat).vec().dot(err) / nrm;
}

/// Smoothness surrogate L(theta_hat, theta*, Delta, eta) with caller constants:
/// ((C1+D)e^2 + (C2+D)e + (C3+D) + max|eta|(1+D)) / 2, e = |theta_hat - theta*|.
inline double smoothness_surrogate(double err_norm, double dlt, double eta_max,
                                   const BoundConstants& c = {}) {
  return 0.5 * ((c.c1 + dlt) * err_norm * err_norm + (c.c2 + dlt) * err_norm + (c.c3 + dlt) +
                eta_max * (1.0 + dlt));
}

/// gamma = 2 sqrt(L) eps, the stationarity level the stopping rule guarantees.
inline double stationarity_level(double smoothness, double eps) {
  return 2.0 * std::sqrt(smoothness) * eps;
}

/// CSV rows "outer_iter,subset_loss,decrease,dist_to_truth"; missing values empty.
inline void write_run_log_csv(std::ostream& os, const AltMinResult& res) {
  os << "outer_iter,subset_loss,decrease,dist_to_truth\n";
  auto num = [](double v) { return std::isnan(v) ? std::string() : format_real(v); };
  for (const auto& r : res.rounds)
    os << r.outer_iter << ',' << format_real(r.subset_loss) << ',' << num(r.decrease) << ','
       << num(r.dist_to_truth) << '\n';
}

}  // namespace robust_phase
