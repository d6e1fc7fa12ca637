#include "mdiff/metrics/report.hpp"

#include <cstdio>

#include "mdiff/errors.hpp"

namespace mdiff::metrics {
namespace {

std::string num17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void append_row(std::string& out, const std::string& name, const MetricsReport& r) {
  out += name;
  for (double v : {r.apd, r.mde, r.ade, r.sde, r.mfde, r.afde, r.sfde}) out += "," + num17(v);
  out += "\n";
}

}  // namespace

MetricsReport mean_report(std::span<const TaskMetrics> rows) {
  if (rows.empty()) throw ContractError("no task metrics to average");
  MetricsReport m;
  for (const TaskMetrics& t : rows) {
    m.apd += t.report.apd;
    m.mde += t.report.mde;
    m.ade += t.report.ade;
    m.sde += t.report.sde;
    m.mfde += t.report.mfde;
    m.afde += t.report.afde;
    m.sfde += t.report.sfde;
  }
  const double n = static_cast<double>(rows.size());
  for (double* v : {&m.apd, &m.mde, &m.ade, &m.sde, &m.mfde, &m.afde, &m.sfde}) *v /= n;
  return m;
}

std::string format_metrics_csv(std::span<const TaskMetrics> rows) {
  std::string out = "task,APD,mDE,aDE,sDE,mFDE,aFDE,sFDE\n";
  for (const TaskMetrics& t : rows) append_row(out, t.task, t.report);
  if (!rows.empty()) append_row(out, "mean", mean_report(rows));
  return out;
}

std::string format_euler_csv(std::span<const TaskEulerMse> rows, std::span<const int> horizons_ms) {
  std::string out = "task";
  for (int ms : horizons_ms) out += "," + std::to_string(ms);
  out += "\n";
  std::map<int, std::pair<double, std::size_t>> acc;
  for (const TaskEulerMse& t : rows) {
    out += t.task;
    for (int ms : horizons_ms) {
      out += ",";
      const auto it = t.by_horizon.find(ms);
      if (it == t.by_horizon.end()) continue;
      out += num17(it->second);
      acc[ms].first += it->second;
      acc[ms].second += 1;
    }
    out += "\n";
  }
  if (!rows.empty()) {
    out += "mean";
    for (int ms : horizons_ms) {
      out += ",";
      const auto it = acc.find(ms);
      if (it != acc.end()) out += num17(it->second.first / static_cast<double>(it->second.second));
    }
    out += "\n";
  }
  return out;
}

}  // namespace mdiff::metrics
