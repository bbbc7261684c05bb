#pragma once

#include <cmath>
#include <numeric>
#include <vector>

#include "toolcua/common.hpp"
#include "toolcua/traj_model.hpp"

namespace toolcua {

struct RewardParams {
  double lambda = 0.4;
  double beta = 0.2;
  int s_max = 30;
  double std_epsilon = 1e-8;
  // Compute the group mean step count over successful outcomes only.
  bool mean_over_successes = false;
};

inline void check(const RewardParams& p) {
  if (p.s_max < 1) throw std::invalid_argument("s_max must be at least 1");
  if (!(p.lambda >= 0) || !(p.beta >= 0)) throw std::invalid_argument("lambda and beta must be non-negative");
  if (!(p.std_epsilon > 0)) throw std::invalid_argument("std_epsilon must be positive");
}

struct TrajectoryOutcome {
  bool success = false;
  int steps = 1;
  int tool_calls = 0;
  bool format_ok = true;
};

inline ValidationReport validate_outcome(const TrajectoryOutcome& o, const RewardParams& p) {
  ValidationReport out;
  if (o.steps < 1 || o.steps > p.s_max) out.push_back({"steps out of range", std::to_string(o.steps), std::nullopt});
  if (o.tool_calls < 0 || o.tool_calls > o.steps) {
    out.push_back({"tool_calls out of range", std::to_string(o.tool_calls), std::nullopt});
  }
  return out;
}

struct RolloutGroup {
  TaskSpec task;
  std::vector<TrajectoryOutcome> outcomes;
};

// Structured invocations only; GUI steps and the terminate call do not count.
inline int count_tool_calls(const Trajectory& traj) { return static_cast<int>(executed_tool_calls(traj)); }

inline double mean_steps(const std::vector<TrajectoryOutcome>& outcomes, bool over_successes = false) {
  long total = 0;
  long n = 0;
  for (const auto& o : outcomes) {
    if (over_successes && !o.success) continue;
    total += o.steps;
    ++n;
  }
  if (n == 0) throw std::invalid_argument("no outcomes to average");
  return static_cast<double>(total) / static_cast<double>(n);
}

inline double mean_steps(const RolloutGroup& g, const RewardParams& p) {
  if (p.mean_over_successes) {
    const bool any = std::any_of(g.outcomes.begin(), g.outcomes.end(), [](const auto& o) { return o.success; });
    // With no successes every gated term is zero anyway.
    if (!any) return mean_steps(g.outcomes, false);
  }
  return mean_steps(g.outcomes, p.mean_over_successes);
}

inline double tool_reward(const TrajectoryOutcome& o, int t_b) {
  if (t_b != 1 && t_b != -1) throw std::invalid_argument("t_b must be +1 or -1");
  if (!o.success) return 0.0;
  const bool matches = (t_b > 0 && o.tool_calls > 0) || (t_b < 0 && o.tool_calls == 0);
  return matches ? 1.0 : 0.0;
}

inline double length_reward(const TrajectoryOutcome& o, double s_bar, const RewardParams& p) {
  if (!(s_bar > 0)) throw std::invalid_argument("mean_steps must be positive");
  if (!o.success) return 0.0;
  const double s = static_cast<double>(o.steps);
  if (s == s_bar) return 1.0;
  if (s < s_bar) return 1.0 + (s_bar - s) / s_bar;
  const double denom = static_cast<double>(p.s_max) - s_bar;
  if (denom < p.std_epsilon) return 0.0;
  return std::exp(-(s - s_bar) / denom);
}

struct RewardBreakdown {
  double r_fmt = 0;
  double r_acc = 0;
  double r_tool = 0;
  double r_length = 0;
  double total = 0;
};

inline RewardBreakdown reward_breakdown(const TrajectoryOutcome& o, int t_b, double s_bar, const RewardParams& p) {
  RewardBreakdown b;
  b.r_fmt = o.format_ok ? 1.0 : 0.0;
  b.r_acc = o.success ? 1.0 : 0.0;
  b.r_tool = tool_reward(o, t_b);
  b.r_length = length_reward(o, s_bar, p);
  b.total = b.r_fmt + b.r_acc + p.lambda * b.r_tool + p.beta * b.r_length;
  return b;
}

inline double total_reward(const TrajectoryOutcome& o, int t_b, double s_bar, const RewardParams& p) {
  return reward_breakdown(o, t_b, s_bar, p).total;
}

// Standardized within the group using the population standard deviation.
inline std::vector<double> group_advantages(const std::vector<double>& rewards, double std_epsilon = 1e-8) {
  if (rewards.empty()) throw std::invalid_argument("empty reward group");
  const double n = static_cast<double>(rewards.size());
  const double mean = std::accumulate(rewards.begin(), rewards.end(), 0.0) / n;
  double var = 0;
  for (double r : rewards) var += (r - mean) * (r - mean);
  const double sd = std::sqrt(var / n);
  std::vector<double> out(rewards.size(), 0.0);
  if (sd < std_epsilon) return out;
  for (std::size_t i = 0; i < rewards.size(); ++i) out[i] = (rewards[i] - mean) / sd;
  return out;
}

inline bool is_mixed(const RolloutGroup& g) {
  bool any_success = false;
  bool any_failure = false;
  for (const auto& o : g.outcomes) {
    any_success |= o.success;
    any_failure |= !o.success;
  }
  return any_success && any_failure;
}

inline std::vector<RolloutGroup> dynamic_filter(const std::vector<RolloutGroup>& groups) {
  std::vector<RolloutGroup> kept;
  for (const auto& g : groups) {
    if (is_mixed(g)) kept.push_back(g);
  }
  return kept;
}

// One line of the reward audit log.
struct AuditRecord {
  std::string task_id;
  TrajectoryOutcome outcome;
  RewardBreakdown reward;
  double advantage = 0;
};

inline Json to_json(const AuditRecord& r) {
  Json j = Json::object();
  j["task_id"] = r.task_id;
  j["s"] = r.outcome.steps;
  j["c"] = r.outcome.tool_calls;
  j["success"] = r.outcome.success;
  j["R_fmt"] = r.reward.r_fmt;
  j["R_acc"] = r.reward.r_acc;
  j["R_tool"] = r.reward.r_tool;
  j["R_length"] = r.reward.r_length;
  j["R"] = r.reward.total;
  j["advantage"] = r.advantage;
  return j;
}

inline std::vector<AuditRecord> audit_group(const RolloutGroup& g, const RewardParams& p) {
  check(p);
  if (g.outcomes.empty()) throw std::invalid_argument("empty rollout group for task " + g.task.task_id);
  const double s_bar = mean_steps(g, p);
  std::vector<AuditRecord> records;
  std::vector<double> totals;
  for (const auto& o : g.outcomes) {
    auto report = validate_outcome(o, p);
    if (!report.empty()) throw ValidationError("task " + g.task.task_id + ": " + describe(report));
    AuditRecord r{g.task.task_id, o, reward_breakdown(o, g.task.tool_beneficial, s_bar, p), 0};
    totals.push_back(r.reward.total);
    records.push_back(r);
  }
  const auto adv = group_advantages(totals, p.std_epsilon);
  for (std::size_t i = 0; i < records.size(); ++i) records[i].advantage = adv[i];
  return records;
}

}  // namespace toolcua
