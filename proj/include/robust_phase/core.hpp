#pragma once

// Shared domain types: signal vectors, index sets, corruption regimes, plus the
// sign-invariant distance and the regime quantities used for reporting.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace robust_phase {

/// Invalid arguments, sizes or configuration. Maps to CLI exit code 2.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Non-finite values or divergence during iteration. Maps to CLI exit code 3.
class NumericalError : public std::runtime_error {
 public:
  NumericalError(const std::string& what, long iteration = -1)
      : std::runtime_error(what), iteration_(iteration) {}
  long iteration() const noexcept { return iteration_; }

 private:
  long iteration_;
};

/// Dense real vector of dimension d >= 1 with finite entries.
class SignalVec {
 public:
  explicit SignalVec(Eigen::VectorXd v) : v_(std::move(v)) { validate(); }
  SignalVec(std::initializer_list<double> values)
      : v_(Eigen::Map<const Eigen::VectorXd>(values.begin(),
                                             static_cast<Eigen::Index>(values.size()))) {
    validate();
  }
  explicit SignalVec(std::span<const double> values)
      : v_(Eigen::Map<const Eigen::VectorXd>(values.data(),
                                             static_cast<Eigen::Index>(values.size()))) {
    validate();
  }

  static SignalVec zeros(std::size_t d) {
    return SignalVec(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d)));
  }
  static SignalVec basis(std::size_t d, std::size_t j) {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d));
    if (j >= d) throw InvalidArgument("basis index out of range");
    v(static_cast<Eigen::Index>(j)) = 1.0;
    return SignalVec(std::move(v));
  }

  std::size_t dim() const noexcept { return static_cast<std::size_t>(v_.size()); }
  double operator[](std::size_t i) const { return v_(static_cast<Eigen::Index>(i)); }
  const Eigen::VectorXd& vec() const noexcept { return v_; }
  double norm() const { return v_.norm(); }
  double squared_norm() const { return v_.squaredNorm(); }
  bool is_zero() const { return (v_.array() == 0.0).all(); }

  SignalVec operator-() const { return SignalVec(Eigen::VectorXd(-v_)); }
  friend SignalVec operator*(double s, const SignalVec& a) {
    return SignalVec(Eigen::VectorXd(s * a.v_));
  }
  friend SignalVec operator+(const SignalVec& a, const SignalVec& b) {
    require_same_dim(a, b);
    return SignalVec(Eigen::VectorXd(a.v_ + b.v_));
  }
  friend SignalVec operator-(const SignalVec& a, const SignalVec& b) {
    require_same_dim(a, b);
    return SignalVec(Eigen::VectorXd(a.v_ - b.v_));
  }
  friend double dot(const SignalVec& a, const SignalVec& b) {
    require_same_dim(a, b);
    return a.v_.dot(b.v_);
  }
  friend bool operator==(const SignalVec& a, const SignalVec& b) {
    return a.dim() == b.dim() && a.v_ == b.v_;
  }

  static void require_same_dim(const SignalVec& a, const SignalVec& b) {
    if (a.dim() != b.dim())
      throw InvalidArgument("dimension mismatch: " + std::to_string(a.dim()) + " vs " +
                            std::to_string(b.dim()));
  }

 private:
  void validate() const {
    if (v_.size() < 1) throw InvalidArgument("signal dimension must be >= 1");
    if (!v_.allFinite()) throw InvalidArgument("signal has non-finite entries");
  }

  Eigen::VectorXd v_;
};

/// Sorted, duplicate-free indices into a MeasurementSet.
class IndexSet {
 public:
  IndexSet() = default;
  /// Sorts and validates; duplicates are rejected.
  explicit IndexSet(std::vector<std::size_t> idx) : idx_(std::move(idx)) {
    std::sort(idx_.begin(), idx_.end());
    if (std::adjacent_find(idx_.begin(), idx_.end()) != idx_.end())
      throw InvalidArgument("index set contains duplicates");
  }
  static IndexSet all(std::size_t n) {
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    return IndexSet(std::move(idx));
  }

  std::size_t size() const noexcept { return idx_.size(); }
  bool empty() const noexcept { return idx_.empty(); }
  std::size_t operator[](std::size_t i) const { return idx_[i]; }
  auto begin() const noexcept { return idx_.begin(); }
  auto end() const noexcept { return idx_.end(); }
  const std::vector<std::size_t>& indices() const noexcept { return idx_; }
  bool contains(std::size_t i) const { return std::binary_search(idx_.begin(), idx_.end(), i); }
  bool within(std::size_t n) const { return idx_.empty() || idx_.back() < n; }

  friend bool operator==(const IndexSet&, const IndexSet&) = default;

 private:
  std::vector<std::size_t> idx_;
};

/// Corruption count k out of n samples; epsilon is always recomputed as k/n.
class RegimeParams {
 public:
  RegimeParams(long k, long n) : k_(k), n_(n) {
    if (n < 1 || k < 0 || k >= n)
      throw InvalidArgument("regime requires 0 <= k < n (k=" + std::to_string(k) +
                            ", n=" + std::to_string(n) + ")");
  }
  long k() const noexcept { return k_; }
  long n() const noexcept { return n_; }
  double epsilon() const noexcept { return static_cast<double>(k_) / static_cast<double>(n_); }

 private:
  long k_;
  long n_;
};

/// Shortest decimal form that round-trips a double (%.17g).
inline std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// Absolute constants (C1, C2, C3) of the error bound; the defaults are
/// placeholders since only their existence is known.
struct BoundConstants {
  double c1 = 1.0;
  double c2 = 1.0;
  double c3 = 1.0;
};

/// min(|a - b|, |a + b|); the sign of a phase-retrieval signal is unidentifiable.
inline double sign_invariant_distance(const SignalVec& a, const SignalVec& b) {
  SignalVec::require_same_dim(a, b);
  return std::min((a.vec() - b.vec()).norm(), (a.vec() + b.vec()).norm());
}

/// Delta(k, n) = eps * sqrt(ln(1/eps)) * ln^2(eps n), natural logs, with
/// Delta(0, n) = 0.
inline double delta(const RegimeParams& regime) {
  if (regime.k() == 0) return 0.0;
  const double eps = regime.epsilon();
  const double log_en = std::log(eps * static_cast<double>(regime.n()));
  return eps * std::sqrt(std::log(1.0 / eps)) * log_en * log_en;
}

/// Finite-sample surrogate for membership of {k_n} in the favorable regime:
/// every probe must have eps < 1/2 and Delta must be non-increasing over the
/// last half of the probe. A heuristic; the real definition is a limit.
inline bool in_favorable_regime(std::span<const RegimeParams> probe) {
  if (probe.empty()) throw InvalidArgument("favorable-regime probe is empty");
  for (std::size_t i = 1; i < probe.size(); ++i)
    if (probe[i].n() <= probe[i - 1].n())
      throw InvalidArgument("favorable-regime probe needs strictly increasing n");
  for (const auto& r : probe)
    if (!(r.epsilon() < 0.5)) return false;
  const std::size_t start = (probe.size() - 1) / 2;
  for (std::size_t i = start + 1; i < probe.size(); ++i)
    if (delta(probe[i]) > delta(probe[i - 1])) return false;
  return true;
}

/// psi(k, n, eta) from the main error bound; diagnostic only.
inline double psi_diagnostic(const RegimeParams& regime, double eta_max,
                             const BoundConstants& c = {}) {
  if (!(eta_max >= 0.0)) throw InvalidArgument("eta_max must be >= 0");
  const double dl = delta(regime);
  const double eps = regime.epsilon();
  const double denom = (1.0 - 3.0 * eps) * (c.c2 - dl) - c.c3 * dl;
  if (!(denom > 0.0)) throw InvalidArgument("regime outside the error bound's applicability (non-positive denominator)");
  return std::sqrt((c.c1 + eta_max) * (1.0 + dl)) / denom;
}

}  // namespace robust_phase
