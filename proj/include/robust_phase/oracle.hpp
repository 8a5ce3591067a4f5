#pragma once

// Least-squares phase oracle: randomly initialized fixed-step gradient descent
// on f_U, with an early return of 0 when the kappa^2 estimate says the
// landscape is convex around the origin.

#include "robust_phase/core.hpp"
#include "robust_phase/measurement.hpp"
#include "robust_phase/objective.hpp"
#include "robust_phase/random.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <optional>
#include <ostream>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

namespace robust_phase {

enum class KappaEstimator { moments, trace };

/// Ground truth for recording a trajectory of (a_t, b_t) components.
struct TrajectoryProbe {
  SignalVec theta_star;
  double kappa = 1.0;
};

struct OracleConfig {
  /// c in mu = c / |theta*|^2.
  double step_scale_c = 0.1;
  /// Empty means ceil(40 ln max(d, 2)).
  std::optional<int> max_iters_T;
  double grad_tol = 1e-10;
  KappaEstimator kappa_estimator = KappaEstimator::moments;
  bool record_trajectory = false;
  std::optional<TrajectoryProbe> probe;

  int resolved_max_iters(std::size_t d) const {
    if (max_iters_T) return *max_iters_T;
    return static_cast<int>(std::ceil(40.0 * std::log(std::max<double>(static_cast<double>(d), 2.0))));
  }

  void validate() const {
    if (!(step_scale_c > 0.0)) throw InvalidArgument("step_scale_c must be > 0");
    if (max_iters_T && *max_iters_T < 1) throw InvalidArgument("max_iters_T must be >= 1");
    if (!(grad_tol >= 0.0)) throw InvalidArgument("grad_tol must be >= 0");
  }
};

struct TrajectoryPoint {
  int iter;
  double a;
  double b;
  double loss;
  double grad_norm;
  /// d(theta^t, kappa theta*) with the probe's kappa.
  double dist;
};

enum class OracleBranch { convex_zero, gd };

struct OracleResult {
  SignalVec theta;
  double kappa_sq = 0.0;
  OracleBranch branch = OracleBranch::gd;
  int iters_run = 0;
  double step = 0.0;
  std::vector<TrajectoryPoint> trajectory;
};

/// kappa_sq = (sqrt(2) * sqrt(var(y)) + mean(y)) / 3 over the subset; the
/// variance radicand is clamped at 0.
inline double kappa_sq_moments(const MeasurementSet& data, const IndexSet& subset) {
  if (subset.size() < 2) throw InvalidArgument("kappa_sq_moments needs at least 2 samples");
  if (!subset.within(data.n())) throw InvalidArgument("subset index out of range");
  CompensatedSum s1, s2;
  for (std::size_t i : subset) {
    const long double y = data.response(i);
    s1.add(y);
    s2.add(y * y);
  }
  const long double m = static_cast<long double>(subset.size());
  const long double mean = s1.value() / m;
  const long double var = std::max(0.0L, s2.value() / m - mean * mean);
  return static_cast<double>((std::sqrt(2.0L) * std::sqrt(var) + mean) / 3.0L);
}

/// kappa_sq = 1/(3|U|) sum (y_i z_i - (d - 1) y_i), z_i = |x_i|^2.
inline double kappa_sq_trace(const MeasurementSet& data, const IndexSet& subset) {
  if (subset.empty()) throw InvalidArgument("kappa_sq_trace needs a non-empty subset");
  if (!subset.within(data.n())) throw InvalidArgument("subset index out of range");
  const long double dm1 = static_cast<long double>(data.d()) - 1.0L;
  CompensatedSum acc;
  for (std::size_t i : subset) {
    long double z = 0.0L;
    for (double v : data.covariate(i)) z += static_cast<long double>(v) * v;
    const long double y = data.response(i);
    acc.add(y * z - dm1 * y);
  }
  return static_cast<double>(acc.value() / (3.0L * static_cast<long double>(subset.size())));
}

/// Signal component a = |<theta, kappa theta*>| and orthogonal component
/// b = |theta - (<theta, kappa theta*> / |theta*|) theta*|.
inline std::pair<double, double> signal_orthogonal_split(const SignalVec& theta,
                                                         const SignalVec& theta_star,
                                                         double kappa) {
  SignalVec::require_same_dim(theta, theta_star);
  const double ns = theta_star.norm();
  if (!(ns > 0.0)) throw InvalidArgument("theta_star must be non-zero");
  if (!(kappa > 0.0)) throw InvalidArgument("kappa must be > 0");
  const double proj = kappa * dot(theta, theta_star);
  const double b = (theta.vec() - (proj / ns) * theta_star.vec()).norm();
  return {std::fabs(proj), b};
}

/// Step size mu = c / max(mean of positive responses in subset, 1e-8), standing
/// in for c / |theta*|^2.
inline double oracle_step_size(const MeasurementSet& data, const IndexSet& subset, double c) {
  CompensatedSum s;
  std::size_t count = 0;
  for (std::size_t i : subset) {
    if (data.response(i) > 0.0) {
      s.add(data.response(i));
      ++count;
    }
  }
  const double mean = count ? static_cast<double>(s.value() / static_cast<long double>(count)) : 0.0;
  return c / std::max(mean, 1e-8);
}

struct DescentOutcome {
  SignalVec theta;
  int iters_run;
  std::vector<TrajectoryPoint> trajectory;
};

/// theta <- theta - step * grad f_U(theta) for at most max_iters steps, stopping
/// once |grad| <= grad_tol. Throws NumericalError on a non-finite iterate.
inline DescentOutcome gradient_descent(const MeasurementSet& data, const IndexSet& subset,
                                       SignalVec theta, double step, int max_iters,
                                       double grad_tol, bool record = false,
                                       const std::optional<TrajectoryProbe>& probe = std::nullopt) {
  DescentOutcome out{std::move(theta), 0, {}};
  auto push = [&](int t, const LossEval& ev) {
    if (!record) return;
    TrajectoryPoint p{t, 0.0, 0.0, ev.value, ev.gradient->norm(), 0.0};
    if (probe) {
      std::tie(p.a, p.b) = signal_orthogonal_split(out.theta, probe->theta_star, probe->kappa);
      p.dist = sign_invariant_distance(out.theta, probe->kappa * probe->theta_star);
    }
    out.trajectory.push_back(p);
  };

  for (int t = 0;; ++t) {
    LossEval ev;
    try {
      ev = evaluate(data, subset, out.theta, true);
    } catch (const NumericalError&) {
      throw NumericalError("step size too large: divergence at iteration " + std::to_string(t), t);
    }
    push(t, ev);
    if (t >= max_iters || ev.gradient->norm() <= grad_tol) break;
    Eigen::VectorXd next = out.theta.vec() - step * ev.gradient->vec();
    if (!next.allFinite())
      throw NumericalError("step size too large: divergence at iteration " + std::to_string(t + 1),
                           t + 1);
    out.theta = SignalVec(std::move(next));
    out.iters_run = t + 1;
  }
  return out;
}

/// One oracle call on the subset: estimate kappa^2, return 0 if it is <= 0,
/// otherwise run gradient descent from sqrt(kappa_sq) * u with u uniform on
/// the unit sphere.
inline OracleResult run_oracle(const MeasurementSet& data, const IndexSet& subset,
                               const OracleConfig& cfg, const RngSeed& seed) {
  cfg.validate();
  if (subset.empty()) throw InvalidArgument("oracle over an empty subset");
  const double kappa_sq = cfg.kappa_estimator == KappaEstimator::moments
                              ? kappa_sq_moments(data, subset)
                              : kappa_sq_trace(data, subset);
  if (!std::isfinite(kappa_sq)) throw NumericalError("non-finite kappa_sq", 0);
  if (kappa_sq <= 0.0)
    return OracleResult{SignalVec::zeros(data.d()), kappa_sq, OracleBranch::convex_zero, 0, 0.0, {}};

  Rng rng(seed);
  SignalVec theta0 = std::sqrt(kappa_sq) * rng.unit_sphere(data.d());
  const double step = oracle_step_size(data, subset, cfg.step_scale_c);
  auto gd = gradient_descent(data, subset, std::move(theta0), step,
                             cfg.resolved_max_iters(data.d()), cfg.grad_tol,
                             cfg.record_trajectory, cfg.probe);
  return OracleResult{std::move(gd.theta), kappa_sq, OracleBranch::gd, gd.iters_run, step,
                      std::move(gd.trajectory)};
}

/// CSV rows "iter,a_t,b_t,loss,grad_norm".
inline void write_trajectory_csv(std::ostream& os, const std::vector<TrajectoryPoint>& traj) {
  os << "iter,a_t,b_t,loss,grad_norm\n";
  char buf[160];
  for (const auto& p : traj) {
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g,%.17g\n", p.iter, p.a, p.b, p.loss,
                  p.grad_norm);
    os << buf;
  }
}

}  // namespace robust_phase
