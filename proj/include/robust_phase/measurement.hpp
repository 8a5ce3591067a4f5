#pragma once

#include "robust_phase/core.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace robust_phase {

using CovariateMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// One measurement (x_i, y_i) with its synthetic corruption eta_i (0 if clean).
struct Measurement {
  std::span<const double> covariate;
  double response;
  double true_corruption;
  std::size_t index;
};

/// n measurements of dimension d, stored row-major. corrupted() is the
/// ground-truth corrupted set C* and is only meaningful for synthetic data.
class MeasurementSet {
 public:
  MeasurementSet(CovariateMatrix covariates, std::vector<double> responses,
                 std::vector<double> corruption, IndexSet corrupted)
      : x_(std::move(covariates)),
        y_(std::move(responses)),
        eta_(std::move(corruption)),
        corrupted_(std::move(corrupted)) {
    const auto n = static_cast<std::size_t>(x_.rows());
    if (x_.cols() < 1) throw InvalidArgument("measurement dimension must be >= 1");
    if (y_.size() != n || eta_.size() != n)
      throw InvalidArgument("responses/corruptions must have one entry per covariate row");
    if (!corrupted_.within(n)) throw InvalidArgument("corrupted index out of range");
  }

  /// Measurements without any corruption bookkeeping.
  MeasurementSet(CovariateMatrix covariates, std::vector<double> responses)
      : MeasurementSet(std::move(covariates), responses,
                       std::vector<double>(responses.size(), 0.0), IndexSet{}) {}

  std::size_t n() const noexcept { return static_cast<std::size_t>(x_.rows()); }
  std::size_t d() const noexcept { return static_cast<std::size_t>(x_.cols()); }

  Measurement item(std::size_t i) const {
    return {covariate(i), y_[i], eta_[i], i};
  }
  std::span<const double> covariate(std::size_t i) const {
    return {x_.data() + i * d(), d()};
  }
  double response(std::size_t i) const { return y_[i]; }
  double corruption(std::size_t i) const { return eta_[i]; }

  const CovariateMatrix& covariates() const noexcept { return x_; }
  const std::vector<double>& responses() const noexcept { return y_; }
  const std::vector<double>& corruptions() const noexcept { return eta_; }
  const IndexSet& corrupted() const noexcept { return corrupted_; }
  std::size_t num_corrupted() const noexcept { return corrupted_.size(); }

  /// Returns a copy with responses/corruption replaced; covariates are shared by value.
  MeasurementSet with_responses(std::vector<double> responses, std::vector<double> corruption,
                                IndexSet corrupted) const {
    return MeasurementSet(x_, std::move(responses), std::move(corruption), std::move(corrupted));
  }

  friend bool operator==(const MeasurementSet& a, const MeasurementSet& b) {
    return a.x_.rows() == b.x_.rows() && a.x_.cols() == b.x_.cols() && a.x_ == b.x_ &&
           a.y_ == b.y_ && a.eta_ == b.eta_ && a.corrupted_ == b.corrupted_;
  }

 private:
  CovariateMatrix x_;
  std::vector<double> y_;
  std::vector<double> eta_;
  IndexSet corrupted_;
};

/// <x_i, theta> with long-double accumulation.
inline double inner(std::span<const double> x, const Eigen::VectorXd& theta) {
  long double acc = 0.0L;
  for (std::size_t j = 0; j < x.size(); ++j)
    acc += static_cast<long double>(x[j]) * theta(static_cast<Eigen::Index>(j));
  return static_cast<double>(acc);
}

}  // namespace robust_phase
