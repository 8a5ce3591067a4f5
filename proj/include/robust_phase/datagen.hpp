#pragma once

// Synthetic measurements under Gaussian design, corruption adversaries, and
// the columnar dataset text format.

#include "robust_phase/core.hpp"
#include "robust_phase/measurement.hpp"
#include "robust_phase/random.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <functional>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

namespace robust_phase {

namespace corruption {

struct None {};

/// eta ~ Uniform[lo, hi], independent of the covariates.
struct Uniform {
  double lo = -5.0;
  double hi = 5.0;
};

/// eta = value for every selected index.
struct Constant {
  double value = 0.0;
};

/// eta drawn from a caller-supplied sampler that never sees the covariates.
struct Custom {
  std::function<double(Rng&)> sampler;
};

/// eta chosen after inspecting the measurement (x_i, y_i).
struct Adaptive {
  std::function<double(const Measurement&)> rule;
};

}  // namespace corruption

enum class Selection { random_uniform, adversarial_rule };

/// Which indices to corrupt and how.
struct CorruptionPlan {
  using Kind = std::variant<corruption::None, corruption::Uniform, corruption::Constant,
                            corruption::Custom, corruption::Adaptive>;

  Kind kind = corruption::None{};
  std::size_t k = 0;
  Selection selection = Selection::random_uniform;
  /// Used when selection == adversarial_rule; defaults to the k largest responses.
  std::function<std::vector<std::size_t>(const MeasurementSet&, std::size_t)> selector;
};

/// Indices of the k largest responses, ties broken by lower index first.
inline std::vector<std::size_t> largest_responses(const MeasurementSet& data, std::size_t k) {
  std::vector<std::size_t> order(data.n());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return data.response(a) > data.response(b);
  });
  order.resize(std::min(k, order.size()));
  return order;
}

/// x_ij ~ N(0, 1) i.i.d. and y_i = <x_i, theta_star>^2.
inline MeasurementSet generate_clean(std::size_t d, std::size_t n, const SignalVec& theta_star,
                                     const RngSeed& seed) {
  if (d < 1 || n < 1) throw InvalidArgument("generate_clean needs d >= 1 and n >= 1");
  if (theta_star.dim() != d) throw InvalidArgument("theta_star dimension differs from d");
  Rng rng(seed);
  CovariateMatrix x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j)
      x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rng.gaussian();
    const double a = inner({x.data() + i * d, d}, theta_star.vec());
    y[i] = a * a;
  }
  return MeasurementSet(std::move(x), std::move(y));
}

/// Corrupts exactly plan.k responses. Covariates and untouched responses are
/// copied bit for bit. Every selected index enters C*, even if its eta is 0.
inline MeasurementSet apply_corruption(const MeasurementSet& clean, const CorruptionPlan& plan,
                                       const RngSeed& seed) {
  const std::size_t n = clean.n();
  if (plan.k > n)
    throw InvalidArgument("k exceeds n (k=" + std::to_string(plan.k) +
                          ", n=" + std::to_string(n) + ")");
  if (plan.k == 0 || std::holds_alternative<corruption::None>(plan.kind)) {
    if (plan.k != 0 && std::holds_alternative<corruption::None>(plan.kind))
      throw InvalidArgument("corruption kind 'none' requires k = 0");
    return clean;
  }

  Rng rng(seed);
  std::vector<std::size_t> chosen;
  if (plan.selection == Selection::adversarial_rule) {
    chosen = plan.selector ? plan.selector(clean, plan.k) : largest_responses(clean, plan.k);
    if (chosen.size() != plan.k) throw InvalidArgument("selector returned wrong number of indices");
  } else {
    // partial Fisher-Yates
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    for (std::size_t i = 0; i < plan.k; ++i) {
      const std::size_t j = i + rng.index(n - i);
      std::swap(perm[i], perm[j]);
    }
    chosen.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(plan.k));
  }
  std::sort(chosen.begin(), chosen.end());
  for (std::size_t i : chosen)
    if (i >= n) throw InvalidArgument("selector returned an out-of-range index");

  std::vector<double> y = clean.responses();
  std::vector<double> eta = clean.corruptions();
  for (std::size_t i : chosen) {
    const double e = std::visit(
        [&](const auto& kind) -> double {
          using K = std::decay_t<decltype(kind)>;
          if constexpr (std::is_same_v<K, corruption::Uniform>) {
            return rng.uniform(kind.lo, kind.hi);
          } else if constexpr (std::is_same_v<K, corruption::Constant>) {
            return kind.value;
          } else if constexpr (std::is_same_v<K, corruption::Custom>) {
            return kind.sampler(rng);
          } else if constexpr (std::is_same_v<K, corruption::Adaptive>) {
            return kind.rule(clean.item(i));
          } else {
            return 0.0;
          }
        },
        plan.kind);
    y[i] += e;
    eta[i] += e;
  }

  std::vector<std::size_t> merged = clean.corrupted().indices();
  merged.insert(merged.end(), chosen.begin(), chosen.end());
  std::sort(merged.begin(), merged.end());
  merged.erase(std::unique(merged.begin(), merged.end()), merged.end());
  return clean.with_responses(std::move(y), std::move(eta), IndexSet(std::move(merged)));
}

/// Strong adaptive adversary: zeroes the k largest responses by setting
/// eta_i = -<x_i, theta*>^2.
inline MeasurementSet strong_adversary_signflip(const MeasurementSet& clean, std::size_t k) {
  CorruptionPlan plan;
  plan.k = k;
  plan.selection = Selection::adversarial_rule;
  plan.kind = corruption::Adaptive{[](const Measurement& m) {
    return -(m.response - m.true_corruption);
  }};
  return apply_corruption(clean, plan, RngSeed{});
}

// ---------------------------------------------------------------------------
// Dataset text format:
//   d n k
//   index y eta x_1 ... x_d        (one line per measurement, %.17g)

inline void write_dataset(std::ostream& os, const MeasurementSet& data) {
  os << data.d() << ' ' << data.n() << ' ' << data.num_corrupted() << '\n';
  for (std::size_t i = 0; i < data.n(); ++i) {
    os << i << ' ' << format_real(data.response(i)) << ' ' << format_real(data.corruption(i));
    for (double v : data.covariate(i)) os << ' ' << format_real(v);
    os << '\n';
  }
}

/// Parses the dataset format. C* is rebuilt from the non-zero eta column, so
/// an index whose drawn eta was exactly 0 is not recovered.
inline MeasurementSet read_dataset(std::istream& is) {
  std::size_t d = 0, n = 0, k = 0;
  std::string line;
  if (!std::getline(is, line)) throw InvalidArgument("dataset: missing header");
  {
    std::istringstream hs(line);
    if (!(hs >> d >> n >> k) || d < 1 || n < 1)
      throw InvalidArgument("dataset: malformed header '" + line + "'");
  }
  CovariateMatrix x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  std::vector<double> y(n), eta(n);
  std::vector<bool> seen(n, false);
  std::vector<std::size_t> corrupted;
  for (std::size_t row = 0; row < n; ++row) {
    if (!std::getline(is, line))
      throw InvalidArgument("dataset: expected " + std::to_string(n) + " rows, got " +
                            std::to_string(row));
    std::istringstream ls(line);
    std::size_t idx = 0;
    if (!(ls >> idx) || idx >= n || seen[idx])
      throw InvalidArgument("dataset: bad index on row " + std::to_string(row));
    seen[idx] = true;
    if (!(ls >> y[idx] >> eta[idx]))
      throw InvalidArgument("dataset: bad response on row " + std::to_string(row));
    for (std::size_t j = 0; j < d; ++j)
      if (!(ls >> x(static_cast<Eigen::Index>(idx), static_cast<Eigen::Index>(j))))
        throw InvalidArgument("dataset: row " + std::to_string(row) + " has fewer than d covariates");
    std::string extra;
    if (ls >> extra) throw InvalidArgument("dataset: trailing data on row " + std::to_string(row));
    if (eta[idx] != 0.0) corrupted.push_back(idx);
  }
  if (corrupted.size() > k)
    throw InvalidArgument("dataset: more non-zero corruptions than header k");
  return MeasurementSet(std::move(x), std::move(y), std::move(eta), IndexSet(std::move(corrupted)));
}

inline void write_signal(std::ostream& os, const SignalVec& v) {
  for (std::size_t j = 0; j < v.dim(); ++j) os << (j ? " " : "") << format_real(v[j]);
  os << '\n';
}

inline SignalVec read_signal(std::istream& is) {
  std::vector<double> vals;
  double v = 0.0;
  while (is >> v) vals.push_back(v);
  if (vals.empty()) throw InvalidArgument("signal file is empty");
  return SignalVec(std::span<const double>(vals));
}

}  // namespace robust_phase
