#pragma once

#include "robust_phase/core.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <ostream>
#include <string>
#include <tuple>
#include <vector>

namespace robust_phase {

/// One experiment outcome.
struct TrialRecord {
  std::uint64_t seed = 0;
  std::size_t d = 0, n = 0, k = 0;
  std::string regime_label;
  double rel_error = 0.0;
  long outer_iters = 0;
  long oracle_iters_total = 0;
  long wall_ms = 0;
  std::string termination;
};

/// d(theta_hat, theta*) / |theta*|
inline double relative_error(const SignalVec& theta_hat, const SignalVec& theta_star) {
  const double ns = theta_star.norm();
  if (!(ns > 0.0)) throw InvalidArgument("relative_error needs a non-zero theta*");
  return sign_invariant_distance(theta_hat, theta_star) / ns;
}

/// 1.2 max(sqrt(psi), psi) sqrt(eps); reported next to observed errors only.
inline double theorem1_bound(const RegimeParams& regime, double eta_max,
                             const BoundConstants& c = {}) {
  const double psi = psi_diagnostic(regime, eta_max, c);
  return 1.2 * std::max(std::sqrt(psi), psi) * std::sqrt(regime.epsilon());
}

struct SummaryRow {
  std::string regime;
  std::size_t d = 0, n = 0, k = 0;
  double mean_rel_error = 0.0;
  double std_rel_error = 0.0;
  double mean_wall_ms = 0.0;
  double std_wall_ms = 0.0;
  std::size_t trials = 0;
};

namespace detail {

/// Mean and sample (n - 1) standard deviation; 0 for a single value. Values
/// are sorted first so the result does not depend on input order.
inline std::pair<double, double> mean_std(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  long double s = 0.0L;
  for (double x : v) s += x;
  const long double mean = s / static_cast<long double>(v.size());
  if (v.size() < 2) return {static_cast<double>(mean), 0.0};
  long double ss = 0.0L;
  for (double x : v) ss += (x - mean) * (x - mean);
  return {static_cast<double>(mean),
          static_cast<double>(std::sqrt(ss / static_cast<long double>(v.size() - 1)))};
}

}  // namespace detail

/// Groups by (regime, d, n), sorted by that key.
inline std::vector<SummaryRow> summarize(const std::vector<TrialRecord>& records) {
  if (records.empty()) throw InvalidArgument("summarize needs at least one record");
  using Key = std::tuple<std::string, std::size_t, std::size_t>;
  std::map<Key, std::vector<const TrialRecord*>> groups;
  for (const auto& r : records) groups[{r.regime_label, r.d, r.n}].push_back(&r);
  std::vector<SummaryRow> out;
  for (const auto& [key, rows] : groups) {
    std::vector<double> err, ms;
    std::size_t k = 0;
    for (const auto* r : rows) {
      err.push_back(r->rel_error);
      ms.push_back(static_cast<double>(r->wall_ms));
      k = std::max(k, r->k);
    }
    SummaryRow row;
    std::tie(row.regime, row.d, row.n) = key;
    row.k = k;
    std::tie(row.mean_rel_error, row.std_rel_error) = detail::mean_std(err);
    std::tie(row.mean_wall_ms, row.std_wall_ms) = detail::mean_std(ms);
    row.trials = rows.size();
    out.push_back(std::move(row));
  }
  return out;
}

inline void write_summary_csv(std::ostream& os, const std::vector<SummaryRow>& rows) {
  os << "regime,d,n,k,mean_rel_error,std_rel_error,mean_wall_ms,std_wall_ms,trials\n";
  for (const auto& r : rows)
    os << r.regime << ',' << r.d << ',' << r.n << ',' << r.k << ',' << format_real(r.mean_rel_error)
       << ',' << format_real(r.std_rel_error) << ',' << format_real(r.mean_wall_ms) << ','
       << format_real(r.std_wall_ms) << ',' << r.trials << '\n';
}

inline constexpr const char* kTrialCsvHeader =
    "regime,d,n,k,seed,rel_error,outer_iters,oracle_iters_total,termination,wall_ms";

/// Trial rows; wall_ms is the last column so it can be cut for determinism checks.
inline void write_trials_csv(std::ostream& os, const std::vector<TrialRecord>& records) {
  os << kTrialCsvHeader << '\n';
  for (const auto& r : records)
    os << r.regime_label << ',' << r.d << ',' << r.n << ',' << r.k << ',' << r.seed << ','
       << format_real(r.rel_error) << ',' << r.outer_iters << ',' << r.oracle_iters_total << ','
       << r.termination << ',' << r.wall_ms << '\n';
}

}  // namespace robust_phase
