#ifndef GOIMDA_HARNESS_STATS_HPP
#define GOIMDA_HARNESS_STATS_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <utility>
#include <vector>

#include "goimda/benchfuncs.hpp"
#include "goimda/core.hpp"
#include "goimda/history.hpp"

namespace goimda::harness {

inline constexpr double kCensored = std::numeric_limits<double>::infinity();

/// Type-7 sample quantile (linear interpolation between order statistics).
/// Infinite entries sort last; any interpolation touching one is infinite.
inline double quantile(std::vector<double> v, double p) {
  require(!v.empty(), "quantile: empty sample");
  require(p >= 0.0 && p <= 1.0, "quantile: p outside [0, 1]");
  std::sort(v.begin(), v.end());
  const double h = (static_cast<double>(v.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, v.size() - 1);
  const double w = h - static_cast<double>(lo);
  if (w == 0.0 || v[lo] == v[hi]) return v[lo];
  if (std::isinf(v[hi])) return v[hi];
  return v[lo] + w * (v[hi] - v[lo]);
}

/// Percentile bootstrap interval for the mean.
inline std::pair<double, double> bootstrap_ci(const std::vector<double>& values, std::size_t n_boot, double level,
                                              Rng& rng) {
  require(values.size() >= 2, "bootstrap_ci: need at least two values");
  require(n_boot >= 100, "bootstrap_ci: need at least 100 resamples");
  require(level > 0.0 && level < 1.0, "bootstrap_ci: level must lie in (0, 1)");
  std::uniform_int_distribution<std::size_t> pick(0, values.size() - 1);
  std::vector<double> means(n_boot);
  for (auto& m : means) {
    double s = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) s += values[pick(rng)];
    m = s / static_cast<double>(values.size());
  }
  const double a = 0.5 * (1.0 - level);
  return {quantile(means, a), quantile(means, 1.0 - a)};
}

/// First step whose metric reaches `threshold`, or nullopt when never reached.
inline std::optional<int> labels_to_threshold(const AcquisitionHistory& h, double threshold) {
  for (const auto& r : h.records)
    if (std::isfinite(r.metric) && r.metric >= threshold) return r.step;
  return std::nullopt;
}

struct QuantileRow {
  double threshold = 0.0;
  double q25 = kCensored, q50 = kCensored, q75 = kCensored;
  std::size_t censored = 0;
  std::size_t n = 0;
};

/// 25/50/75% quantiles of labels-to-threshold across replications. Runs that
/// never reach a threshold count as +infinity, so a quantile is censored when
/// it depends on them.
inline std::vector<QuantileRow> labels_to_accuracy(const std::vector<AcquisitionHistory>& runs,
                                                   const std::vector<double>& thresholds) {
  std::vector<QuantileRow> out;
  for (double t : thresholds) {
    QuantileRow row;
    row.threshold = t;
    row.n = runs.size();
    std::vector<double> steps;
    for (const auto& h : runs) {
      const auto s = labels_to_threshold(h, t);
      steps.push_back(s ? static_cast<double>(*s) : kCensored);
      if (!s) ++row.censored;
    }
    if (!steps.empty()) {
      row.q25 = quantile(steps, 0.25);
      row.q50 = quantile(steps, 0.5);
      row.q75 = quantile(steps, 0.75);
    }
    out.push_back(row);
  }
  return out;
}

/// Noiseless regret of each step's recommendation; NaN where none was recorded.
inline std::vector<double> compute_regret(const AcquisitionHistory& h, const NoisyObjective& obj) {
  std::vector<double> out;
  out.reserve(h.records.size());
  for (const auto& r : h.records)
    out.push_back(r.recommended_x ? std::max(0.0, obj.f(*r.recommended_x) - obj.optimum_value) : kNaN);
  return out;
}

}  // namespace goimda::harness

#endif  // GOIMDA_HARNESS_STATS_HPP
