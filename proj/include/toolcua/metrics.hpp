#pragma once

#include <map>
#include <optional>
#include <set>
#include <vector>

#include "toolcua/common.hpp"

namespace toolcua {

struct EvalResult {
  std::string task_id;
  int tool_beneficial = 1;
  bool success = false;
  int steps = 1;
  int tool_calls = 0;
  int run_index = 0;
};

inline EvalResult parse_eval_result(const Json& j) {
  EvalResult r;
  r.task_id = detail::require_string(j, "task_id", "eval result");
  r.tool_beneficial = detail::require(j, "tool_beneficial", "eval result").get<int>();
  r.success = detail::require(j, "success", "eval result").get<bool>();
  r.steps = detail::require(j, "steps", "eval result").get<int>();
  r.tool_calls = j.value("tool_calls", 0);
  r.run_index = j.value("run_index", 0);
  if (r.tool_beneficial != 1 && r.tool_beneficial != -1) throw ParseError("eval result: tool_beneficial must be +1 or -1");
  if (r.steps < 1) throw ParseError("eval result: steps must be >= 1");
  if (r.tool_calls < 0) throw ParseError("eval result: tool_calls must be >= 0");
  return r;
}

inline bool label_matched(const EvalResult& r) {
  return r.success && ((r.tool_beneficial > 0 && r.tool_calls > 0) || (r.tool_beneficial < 0 && r.tool_calls == 0));
}

inline void require_nonempty(const std::vector<EvalResult>& results) {
  if (results.empty()) throw std::invalid_argument("empty result set");
}

inline double compute_accuracy(const std::vector<EvalResult>& results) {
  require_nonempty(results);
  const auto n = std::count_if(results.begin(), results.end(), [](const auto& r) { return r.success; });
  return static_cast<double>(n) / static_cast<double>(results.size());
}

inline double compute_tir(const std::vector<EvalResult>& results) {
  require_nonempty(results);
  const auto n = std::count_if(results.begin(), results.end(), label_matched);
  return static_cast<double>(n) / static_cast<double>(results.size());
}

inline double compute_acs(const std::vector<EvalResult>& results) {
  require_nonempty(results);
  long total = 0;
  for (const auto& r : results) total += r.steps;
  return static_cast<double>(total) / static_cast<double>(results.size());
}

struct MetricRow {
  std::size_t n = 0;
  std::optional<double> accuracy;
  std::optional<double> tir;
  std::optional<double> acs;
};

// Accuracy / TIR / ACS split by label, laid out like the benchmark table.
struct MetricTable {
  MetricRow beneficial;
  MetricRow non_beneficial;
  MetricRow overall;
};

inline MetricRow metric_row(const std::vector<EvalResult>& results) {
  MetricRow row;
  row.n = results.size();
  if (results.empty()) return row;
  row.accuracy = compute_accuracy(results);
  row.tir = compute_tir(results);
  row.acs = compute_acs(results);
  return row;
}

inline MetricTable metric_table(const std::vector<EvalResult>& results) {
  require_nonempty(results);
  std::vector<EvalResult> ben;
  std::vector<EvalResult> non;
  for (const auto& r : results) (r.tool_beneficial > 0 ? ben : non).push_back(r);
  return {metric_row(ben), metric_row(non), metric_row(results)};
}

struct AvgKReport {
  int k = 0;
  bool pooled = false;
  MetricTable aggregate;
  std::vector<MetricTable> per_run;
};

namespace detail {

inline std::optional<double> mean_of(const std::vector<std::optional<double>>& xs) {
  double sum = 0;
  for (const auto& x : xs) {
    if (!x) return std::nullopt;
    sum += *x;
  }
  if (xs.empty()) return std::nullopt;
  return sum / static_cast<double>(xs.size());
}

inline MetricRow average_rows(const std::vector<MetricRow>& rows) {
  MetricRow out;
  if (rows.empty()) return out;
  out.n = rows.front().n;
  std::vector<std::optional<double>> acc, tir, acs;
  for (const auto& r : rows) {
    acc.push_back(r.accuracy);
    tir.push_back(r.tir);
    acs.push_back(r.acs);
  }
  out.accuracy = mean_of(acc);
  out.tir = mean_of(tir);
  out.acs = mean_of(acs);
  return out;
}

}  // namespace detail

// Metrics per run, then averaged. With `pool` the aggregate is computed over
// the concatenation instead; with equal run sizes both agree.
inline AvgKReport aggregate_avg_k(const std::vector<EvalResult>& results, int k = 3, bool pool = false) {
  require_nonempty(results);
  if (k < 1) throw std::invalid_argument("k must be positive");
  std::map<std::string, std::set<int>> runs_per_task;
  std::map<std::string, int> count_per_task;
  for (const auto& r : results) {
    runs_per_task[r.task_id].insert(r.run_index);
    ++count_per_task[r.task_id];
  }
  std::string ragged;
  std::set<int> run_ids;
  for (const auto& [task, runs] : runs_per_task) {
    if (static_cast<int>(runs.size()) != k || count_per_task[task] != k) ragged += (ragged.empty() ? "" : ", ") + task;
    run_ids.insert(runs.begin(), runs.end());
  }
  if (!ragged.empty()) throw ValidationError("tasks without exactly " + std::to_string(k) + " runs: " + ragged);
  if (static_cast<int>(run_ids.size()) != k) throw ValidationError("run indices differ across tasks");

  AvgKReport report;
  report.k = k;
  report.pooled = pool;
  for (int run : run_ids) {
    std::vector<EvalResult> subset;
    for (const auto& r : results) {
      if (r.run_index == run) subset.push_back(r);
    }
    report.per_run.push_back(metric_table(subset));
  }
  if (pool) {
    report.aggregate = metric_table(results);
    return report;
  }
  std::vector<MetricRow> ben, non, all;
  for (const auto& t : report.per_run) {
    ben.push_back(t.beneficial);
    non.push_back(t.non_beneficial);
    all.push_back(t.overall);
  }
  report.aggregate = {detail::average_rows(ben), detail::average_rows(non), detail::average_rows(all)};
  return report;
}

inline Json to_json(const MetricRow& r) {
  auto opt = [](const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); };
  Json j = Json::object();
  j["n"] = r.n;
  j["accuracy"] = opt(r.accuracy);
  j["tir"] = opt(r.tir);
  j["acs"] = opt(r.acs);
  return j;
}

inline Json to_json(const MetricTable& t) {
  Json j = Json::object();
  j["beneficial"] = to_json(t.beneficial);
  j["non_beneficial"] = to_json(t.non_beneficial);
  j["overall"] = to_json(t.overall);
  return j;
}

inline Json to_json(const AvgKReport& r) {
  Json runs = Json::array();
  for (const auto& t : r.per_run) runs.push_back(to_json(t));
  Json j = Json::object();
  j["k"] = r.k;
  j["pooled"] = r.pooled;
  j["aggregate"] = to_json(r.aggregate);
  j["per_run"] = std::move(runs);
  return j;
}

}  // namespace toolcua
