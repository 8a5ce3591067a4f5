#pragma once

// Quartic least-squares objective f_U(theta) = 1/(4|U|) sum_{i in U} (<x_i,theta>^2 - y_i)^2,
// its derivatives, and the closed-form population landscape in the frame
// theta* = e_1, |theta*| = 1.

#include "robust_phase/core.hpp"
#include "robust_phase/measurement.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <cstddef>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace robust_phase {

/// Neumaier-compensated long-double sum; order-fixed so results reproduce exactly.
class CompensatedSum {
 public:
  void add(long double v) {
    const long double t = sum_ + v;
    if (std::fabs(sum_) >= std::fabs(v))
      comp_ += (sum_ - t) + v;
    else
      comp_ += (v - t) + sum_;
    sum_ = t;
  }
  long double value() const { return sum_ + comp_; }

 private:
  long double sum_ = 0.0L;
  long double comp_ = 0.0L;
};

struct LossEval {
  double value = 0.0;
  std::optional<SignalVec> gradient;
  std::size_t subset_size = 0;
};

namespace detail {

inline void require_subset(const MeasurementSet& data, const IndexSet& subset,
                           const SignalVec& theta) {
  if (subset.empty()) throw InvalidArgument("objective over an empty subset");
  if (!subset.within(data.n())) throw InvalidArgument("subset index out of range");
  if (theta.dim() != data.d()) throw InvalidArgument("theta dimension differs from data");
}

}  // namespace detail

/// f_i(theta) = (y_i - <x_i,theta>^2)^2, the per-sample residual used for selection.
inline double sample_residual(const MeasurementSet& data, std::size_t i, const SignalVec& theta) {
  const double a = inner(data.covariate(i), theta.vec());
  const double r = a * a - data.response(i);
  return r * r;
}

/// Loss and (optionally) gradient in one pass over the subset.
inline LossEval evaluate(const MeasurementSet& data, const IndexSet& subset,
                         const SignalVec& theta, bool with_gradient) {
  detail::require_subset(data, subset, theta);
  const std::size_t d = data.d();
  CompensatedSum loss;
  std::vector<long double> grad(with_gradient ? d : 0, 0.0L);
  for (std::size_t i : subset) {
    const auto x = data.covariate(i);
    const long double a = inner(x, theta.vec());
    const long double r = a * a - static_cast<long double>(data.response(i));
    loss.add(r * r);
    if (with_gradient) {
      const long double w = r * a;
      for (std::size_t j = 0; j < d; ++j) grad[j] += w * x[j];
    }
  }
  const auto m = static_cast<long double>(subset.size());
  LossEval out;
  out.subset_size = subset.size();
  out.value = static_cast<double>(loss.value() / (4.0L * m));
  if (with_gradient) {
    Eigen::VectorXd g(static_cast<Eigen::Index>(d));
    for (std::size_t j = 0; j < d; ++j) g(static_cast<Eigen::Index>(j)) = static_cast<double>(grad[j] / m);
    if (!g.allFinite() || !std::isfinite(out.value))
      throw NumericalError("non-finite gradient");
    out.gradient = SignalVec(std::move(g));
  } else if (!std::isfinite(out.value)) {
    throw NumericalError("non-finite loss");
  }
  return out;
}

inline double loss(const MeasurementSet& data, const IndexSet& subset, const SignalVec& theta) {
  return evaluate(data, subset, theta, false).value;
}

/// (1/|U|) sum (<x_i,theta>^2 - y_i) x_i x_i^T theta
inline SignalVec gradient(const MeasurementSet& data, const IndexSet& subset,
                          const SignalVec& theta) {
  return *evaluate(data, subset, theta, true).gradient;
}

/// v^T H(theta) v = (1/|U|) sum (3<x_i,theta>^2 - y_i) <x_i,v>^2; the Hessian
/// itself is never formed.
inline double hessian_quadratic_form(const MeasurementSet& data, const IndexSet& subset,
                                     const SignalVec& theta, const SignalVec& v) {
  detail::require_subset(data, subset, theta);
  SignalVec::require_same_dim(theta, v);
  CompensatedSum acc;
  for (std::size_t i : subset) {
    const auto x = data.covariate(i);
    const long double a = inner(x, theta.vec());
    const long double b = inner(x, v.vec());
    acc.add((3.0L * a * a - static_cast<long double>(data.response(i))) * b * b);
  }
  return static_cast<double>(acc.value() / static_cast<long double>(subset.size()));
}

// ---------------------------------------------------------------------------
// Population landscape, theta* = e_1.

/// F(theta) = (3|t|^4 + 3 - 4 t_1^2 - 2|t|^2 - 2|t|^2 eta_bar + 2 eta_bar + mean(eta^2)) / 4
inline double expected_loss(const SignalVec& theta, double eta_bar, double eta_sq_mean) {
  const double s = theta.squared_norm();
  const double t1 = theta[0];
  return 0.25 * (3.0 * s * s + 3.0 - 4.0 * t1 * t1 - 2.0 * s - 2.0 * s * eta_bar +
                 2.0 * eta_bar + eta_sq_mean);
}

/// grad F(theta) = (3|t|^2 - 1 - eta_bar) t - 2 t_1 e_1
inline SignalVec expected_gradient(const SignalVec& theta, double eta_bar) {
  Eigen::VectorXd g = (3.0 * theta.squared_norm() - 1.0 - eta_bar) * theta.vec();
  g(0) -= 2.0 * theta[0];
  return SignalVec(std::move(g));
}

/// v^T grad^2 F(theta) v = 6<t,v>^2 + (3|t|^2 - 1 - eta_bar)|v|^2 - 2 v_1^2, obtained by
/// differentiating expected_gradient.
inline double expected_hessian_quadratic_form(const SignalVec& theta, const SignalVec& v,
                                              double eta_bar) {
  SignalVec::require_same_dim(theta, v);
  const double tv = dot(theta, v);
  return 6.0 * tv * tv + (3.0 * theta.squared_norm() - 1.0 - eta_bar) * v.squared_norm() -
         2.0 * v[0] * v[0];
}

/// Kinds of critical points of the population loss.
enum class CriticalKind { origin, orthogonal_saddle, signal_minimum };

/// Euclidean distance from theta to one critical set; +inf if the set is empty
/// for this eta_bar.
inline double distance_to_critical_set(const SignalVec& theta, double eta_bar, CriticalKind kind) {
  const double inf = std::numeric_limits<double>::infinity();
  const double t1 = theta[0];
  const double orth = std::sqrt(std::max(0.0, theta.squared_norm() - t1 * t1));
  switch (kind) {
    case CriticalKind::origin:
      return theta.norm();
    case CriticalKind::orthogonal_saddle: {
      // {t : t_1 = 0, |t|^2 = (1 + eta_bar)/3}
      if (eta_bar < -1.0) return inf;
      const double r = std::sqrt((1.0 + eta_bar) / 3.0);
      if (theta.dim() == 1) return r == 0.0 ? std::fabs(t1) : inf;
      return std::hypot(t1, orth - r);
    }
    case CriticalKind::signal_minimum: {
      // {+-sqrt(1 + eta_bar/3) e_1}
      if (eta_bar < -3.0) return inf;
      const double a = std::sqrt(1.0 + eta_bar / 3.0);
      return std::hypot(std::fabs(t1) - a, orth);
    }
  }
  return inf;
}

/// Which landscape regime a given average corruption produces:
/// 'a' uncorrupted, 'b' convex (eta_bar <= -3), 'c' displaced minima.
inline char landscape_panel(double eta_bar) {
  if (eta_bar == 0.0) return 'a';
  if (eta_bar <= -3.0) return 'b';
  return 'c';
}

/// Axis-aligned 2-D box sampled on an nx-by-ny grid (endpoints included).
struct GridSpec {
  double x_lo = -2.0, x_hi = 2.0;
  double y_lo = -2.0, y_hi = 2.0;
  std::size_t nx = 81, ny = 81;
};

struct GridPoint {
  double theta1;
  double theta2;
  double value;
};

inline std::vector<GridPoint> landscape_grid(double eta_bar, double eta_sq_mean,
                                             const GridSpec& g) {
  if (g.nx < 2 || g.ny < 2) throw InvalidArgument("landscape grid needs at least 2x2 points");
  if (!(g.x_hi > g.x_lo) || !(g.y_hi > g.y_lo)) throw InvalidArgument("landscape box is empty");
  std::vector<GridPoint> out;
  out.reserve(g.nx * g.ny);
  for (std::size_t i = 0; i < g.nx; ++i) {
    const double t1 = g.x_lo + (g.x_hi - g.x_lo) * static_cast<double>(i) / static_cast<double>(g.nx - 1);
    for (std::size_t j = 0; j < g.ny; ++j) {
      const double t2 = g.y_lo + (g.y_hi - g.y_lo) * static_cast<double>(j) / static_cast<double>(g.ny - 1);
      out.push_back({t1, t2, expected_loss(SignalVec{t1, t2}, eta_bar, eta_sq_mean)});
    }
  }
  return out;
}

/// Grid file: '#' header lines with the parameters, then "theta1 theta2 F" rows.
inline void write_landscape(std::ostream& os, double eta_bar, double eta_sq_mean,
                            const GridSpec& g) {
  const auto grid = landscape_grid(eta_bar, eta_sq_mean, g);
  char buf[128];
  std::snprintf(buf, sizeof buf, "# eta_bar=%.17g eta_sq_mean=%.17g panel=%c\n", eta_bar,
                eta_sq_mean, landscape_panel(eta_bar));
  os << buf << "theta1 theta2 F\n";
  for (const auto& p : grid) {
    std::snprintf(buf, sizeof buf, "%.17g %.17g %.17g\n", p.theta1, p.theta2, p.value);
    os << buf;
  }
}

}  // namespace robust_phase
