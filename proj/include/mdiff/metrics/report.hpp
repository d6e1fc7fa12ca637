#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "mdiff/metrics/metrics.hpp"

namespace mdiff::metrics {

struct TaskMetrics {
  std::string task;
  MetricsReport report;
};

struct TaskEulerMse {
  std::string task;
  std::map<int, double> by_horizon;
};

// Field-wise mean over tasks.
MetricsReport mean_report(std::span<const TaskMetrics> rows);

// Header "task,APD,mDE,aDE,sDE,mFDE,aFDE,sFDE", one row per task, then a "mean" row.
// Values use %.17g so the file round-trips exactly.
std::string format_metrics_csv(std::span<const TaskMetrics> rows);

// Header "task,<ms>,..." over the given horizons; a horizon a task lacks is an
// empty cell. The "mean" row averages the tasks that have the horizon.
std::string format_euler_csv(std::span<const TaskEulerMse> rows, std::span<const int> horizons_ms);

}  // namespace mdiff::metrics
