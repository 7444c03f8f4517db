#ifndef GOIMDA_HISTORY_HPP
#define GOIMDA_HISTORY_HPP

#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "goimda/core.hpp"

namespace goimda {

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

/// One acquisition step. Step 0 records the initial fit and has no choice.
struct StepRecord {
  int step = 0;
  std::optional<Vector> chosen_x;
  double observed_y = kNaN;
  double score = kNaN;
  double goal_value = kNaN;
  std::string metric_name;
  double metric = kNaN;
  std::optional<Vector> recommended_x;
  std::string solver;
  int solver_iterations = 0;
  double solver_residual = kNaN;
  double damping = kNaN;
  std::string note;
};

struct AcquisitionHistory {
  std::vector<StepRecord> records;
  /// "ok", "exhausted" (pool ran out) or "error".
  std::string status = "ok";
  std::string error;

  std::vector<double> metric_series() const {
    std::vector<double> v;
    v.reserve(records.size());
    for (const auto& r : records) v.push_back(r.metric);
    return v;
  }
};

}  // namespace goimda

#endif  // GOIMDA_HISTORY_HPP
