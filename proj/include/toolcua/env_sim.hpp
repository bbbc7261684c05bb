#pragma once

#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "toolcua/common.hpp"
#include "toolcua/metrics.hpp"
#include "toolcua/reward.hpp"
#include "toolcua/traj_model.hpp"

namespace toolcua::sim {

// ---------------------------------------------------------------------------
// Tasks
// ---------------------------------------------------------------------------

struct Shortcut {
  std::string tool_name;
  int covers = 1;
  bool usable = true;
};

struct SimTask {
  TaskSpec spec;
  int gui_chain_length = 1;
  std::vector<Shortcut> tool_shortcuts;
  std::vector<std::string> distractor_tools;

  std::size_t tool_count() const { return tool_shortcuts.size() + distractor_tools.size(); }
  // Abstract actions: 0 = advance_gui, 1..m = tools, m+1 = terminate.
  std::size_t action_count() const { return tool_count() + 2; }
  std::size_t terminate_action() const { return tool_count() + 1; }
  std::string tool_name(std::size_t tool_index) const {
    if (tool_index < tool_shortcuts.size()) return tool_shortcuts[tool_index].tool_name;
    return distractor_tools.at(tool_index - tool_shortcuts.size());
  }
};

inline ValidationReport validate_task(const SimTask& t) {
  ValidationReport out = validate_task_spec(t.spec);
  auto add = [&](std::string code, std::string detail = {}) { out.push_back({std::move(code), std::move(detail), {}}); };
  if (t.gui_chain_length < 1) add("gui_chain_length must be positive");
  if (t.spec.max_steps < 1) add("max_steps must be positive");
  bool beneficial = false;
  std::set<std::string> names;
  for (const auto& s : t.tool_shortcuts) {
    if (s.covers < 1 || s.covers > t.gui_chain_length) add("shortcut coverage out of range", s.tool_name);
    if (s.usable && s.covers >= 2) beneficial = true;
    if (!names.insert(s.tool_name).second) add("duplicate tool name", s.tool_name);
  }
  for (const auto& d : t.distractor_tools) {
    if (!names.insert(d).second) add("duplicate tool name", d);
  }
  if ((t.spec.tool_beneficial == 1) != beneficial) add("tool_beneficial label inconsistent with shortcuts");
  return out;
}

inline SimTask parse_sim_task(const Json& j) {
  SimTask t;
  t.spec.task_id = detail::require_string(j, "task_id", "sim task");
  t.spec.goal = detail::string_or_empty(j, "goal");
  t.spec.tool_beneficial = detail::require(j, "tool_beneficial", "sim task").get<int>();
  t.spec.max_steps = j.value("max_steps", 30);
  t.gui_chain_length = detail::require(j, "gui_chain_length", "sim task").get<int>();
  if (auto it = j.find("tool_shortcuts"); it != j.end()) {
    for (const auto& s : *it) {
      t.tool_shortcuts.push_back({detail::require_string(s, "tool_name", "shortcut"),
                                  detail::require(s, "covers", "shortcut").get<int>(), s.value("usable", true)});
    }
  }
  if (auto it = j.find("distractor_tools"); it != j.end()) {
    for (const auto& d : *it) t.distractor_tools.push_back(d.get<std::string>());
  }
  return t;
}

inline std::vector<SimTask> parse_suite(const Json& j) {
  const Json& tasks = detail::require(j, "tasks", "sim suite");
  if (!tasks.is_array() || tasks.empty()) throw ParseError("sim suite: 'tasks' must be a non-empty array");
  std::vector<SimTask> out;
  for (const auto& t : tasks) {
    out.push_back(parse_sim_task(t));
    if (auto report = validate_task(out.back()); !report.empty()) {
      throw ValidationError("task " + out.back().spec.task_id + ": " + describe(report));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Environment
// ---------------------------------------------------------------------------

struct Observation {
  int progress = 0;
  int steps = 0;
  std::vector<std::string> available_tools;

  friend bool operator==(const Observation&, const Observation&) = default;
};

struct StepResult {
  Observation observation;
  bool done = false;
  bool success = false;
  bool truncated = false;
  ToolResponse response;
};

class Environment {
 public:
  // The environment has no hidden randomness; the seed is accepted so the
  // interface stays stable if stochastic tasks are added.
  Observation reset(const SimTask& task, std::uint64_t seed = 0) {
    (void)seed;
    task_ = &task;
    progress_ = 0;
    steps_ = 0;
    tool_calls_ = 0;
    done_ = false;
    success_ = false;
    applied_.assign(task.tool_shortcuts.size(), false);
    return observe();
  }

  StepResult step(std::size_t action) {
    if (!task_) throw std::logic_error("step before reset");
    if (done_) throw std::logic_error("episode already finished");
    if (action >= task_->action_count()) throw std::out_of_range("action index out of range");
    ++steps_;
    StepResult r;
    r.response = ToolResponse{true, Json("Success"), std::nullopt};
    if (action == 0) {
      ++progress_;
    } else if (action == task_->terminate_action()) {
      done_ = true;
      success_ = progress_ >= task_->gui_chain_length;
    } else {
      ++tool_calls_;
      const std::size_t tool = action - 1;
      if (tool < task_->tool_shortcuts.size()) {
        const auto& sc = task_->tool_shortcuts[tool];
        if (!sc.usable) {
          r.response = failed("tool is not applicable in this state");
        } else if (applied_[tool]) {
          r.response = failed("already applied");
        } else {
          applied_[tool] = true;
          progress_ += sc.covers;
          r.response = ToolResponse{true, Json(sc.tool_name + " applied"), std::nullopt};
        }
      } else {
        r.response = failed("operation failed");
      }
    }
    if (!done_ && steps_ >= task_->spec.max_steps) {
      done_ = true;
      success_ = false;
      r.truncated = true;
    }
    r.done = done_;
    r.success = success_;
    r.observation = observe();
    return r;
  }

  int progress() const { return progress_; }
  int steps() const { return steps_; }
  int tool_calls() const { return tool_calls_; }
  bool done() const { return done_; }

 private:
  static ToolResponse failed(std::string msg) { return ToolResponse{false, Json(nullptr), std::move(msg)}; }

  Observation observe() const {
    Observation o;
    o.progress = progress_;
    o.steps = steps_;
    for (std::size_t i = 0; i < task_->tool_count(); ++i) o.available_tools.push_back(task_->tool_name(i));
    return o;
  }

  const SimTask* task_ = nullptr;
  int progress_ = 0;
  int steps_ = 0;
  int tool_calls_ = 0;
  bool done_ = false;
  bool success_ = false;
  std::vector<bool> applied_;
};

// ---------------------------------------------------------------------------
// Policy
// ---------------------------------------------------------------------------

// Tabular softmax keyed by (task, progress clipped to the chain length).
class SoftmaxPolicy {
 public:
  explicit SoftmaxPolicy(const std::vector<SimTask>& tasks, double temperature = 1.0) : temperature_(temperature) {
    if (!(temperature > 0)) throw std::invalid_argument("temperature must be positive");
    for (const auto& t : tasks) {
      tables_[t.spec.task_id] =
          std::vector<std::vector<double>>(static_cast<std::size_t>(t.gui_chain_length) + 1,
                                           std::vector<double>(t.action_count(), 0.0));
    }
  }

  static std::size_t bucket(const SimTask& task, int progress) {
    return static_cast<std::size_t>(std::clamp(progress, 0, task.gui_chain_length));
  }

  std::vector<double>& logits(const SimTask& task, int progress) {
    return tables_.at(task.spec.task_id).at(bucket(task, progress));
  }
  const std::vector<double>& logits(const SimTask& task, int progress) const {
    return tables_.at(task.spec.task_id).at(bucket(task, progress));
  }

  std::vector<double> probabilities(const SimTask& task, int progress) const {
    const auto& z = logits(task, progress);
    const double top = *std::max_element(z.begin(), z.end());
    std::vector<double> p(z.size());
    double sum = 0;
    for (std::size_t i = 0; i < z.size(); ++i) sum += p[i] = std::exp((z[i] - top) / temperature_);
    for (auto& v : p) v /= sum;
    return p;
  }

  std::size_t argmax(const SimTask& task, int progress) const {
    const auto& z = logits(task, progress);
    return static_cast<std::size_t>(std::max_element(z.begin(), z.end()) - z.begin());
  }

  double temperature() const { return temperature_; }

  void check_finite(const std::string& context) const {
    for (const auto& [task, rows] : tables_) {
      for (std::size_t b = 0; b < rows.size(); ++b) {
        for (std::size_t a = 0; a < rows[b].size(); ++a) {
          if (!std::isfinite(rows[b][a])) {
            throw Error("policy diverged (" + context + "): task " + task + " progress " + std::to_string(b) +
                        " action " + std::to_string(a));
          }
        }
      }
    }
  }

  Json to_json() const {
    Json j = Json::object();
    for (const auto& [task, rows] : tables_) j[task] = rows;
    return j;
  }

 private:
  double temperature_;
  std::map<std::string, std::vector<std::vector<double>>> tables_;
};

// ---------------------------------------------------------------------------
// Rollouts
// ---------------------------------------------------------------------------

struct TraceEntry {
  int progress = 0;
  std::size_t action = 0;
};

struct Rollout {
  TrajectoryOutcome outcome;
  std::vector<TraceEntry> trace;
  bool truncated = false;
};

template <typename Choose>
Rollout run_episode(const SimTask& task, std::uint64_t seed, Choose&& choose) {
  Environment env;
  env.reset(task, seed);
  Rollout r;
  StepResult last;
  while (!env.done()) {
    const int progress = env.progress();
    const std::size_t a = choose(progress);
    r.trace.push_back({progress, a});
    last = env.step(a);
  }
  r.outcome.success = last.success;
  r.outcome.steps = env.steps();
  r.outcome.tool_calls = env.tool_calls();
  r.outcome.format_ok = true;
  r.truncated = last.truncated;
  return r;
}

inline Rollout rollout(const SoftmaxPolicy& policy, const SimTask& task, std::uint64_t seed, bool greedy = false) {
  Rng rng(seed);
  return run_episode(task, seed, [&](int progress) -> std::size_t {
    if (greedy) return policy.argmax(task, progress);
    const auto p = policy.probabilities(task, progress);
    double u = rng.uniform01();
    for (std::size_t i = 0; i + 1 < p.size(); ++i) {
      if (u < p[i]) return i;
      u -= p[i];
    }
    return p.size() - 1;
  });
}

// Replays a fixed action list (stopping early if the episode ends).
inline Rollout scripted_rollout(const SimTask& task, const std::vector<std::size_t>& actions) {
  std::size_t i = 0;
  return run_episode(task, 0, [&](int) -> std::size_t {
    if (i >= actions.size()) return task.terminate_action();
    return actions[i++];
  });
}

// The GUI-only reference: advance until the chain is done, then terminate.
inline Rollout gui_only_rollout(const SimTask& task) {
  return run_episode(task, 0, [&](int progress) -> std::size_t {
    return progress >= task.gui_chain_length ? task.terminate_action() : 0;
  });
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

struct TrainConfig {
  RewardParams reward;
  int group_size = 32;
  int iterations = 300;
  double learning_rate = 0.5;
  double temperature = 1.0;
  std::uint64_t seed = 0;
};

struct CurvePoint {
  int iteration = 0;
  double accuracy = 0;
  double tir = 0;
  double mean_steps = 0;
  double mean_tool_calls = 0;
  double mean_reward = 0;
  int retained_groups = 0;
};

struct TrainResult {
  SoftmaxPolicy policy;
  std::vector<CurvePoint> curves;
};

inline std::string curves_csv(const std::vector<CurvePoint>& curves) {
  std::string out = "iteration,accuracy,tir,mean_steps,mean_tool_calls,mean_reward,retained_groups\n";
  char buf[256];
  for (const auto& c : curves) {
    std::snprintf(buf, sizeof buf, "%d,%.6f,%.6f,%.6f,%.6f,%.6f,%d\n", c.iteration, c.accuracy, c.tir, c.mean_steps,
                  c.mean_tool_calls, c.mean_reward, c.retained_groups);
    out += buf;
  }
  return out;
}

inline EvalResult to_eval(const SimTask& task, const TrajectoryOutcome& o, int run_index = 0) {
  return {task.spec.task_id, task.spec.tool_beneficial, o.success, o.steps, o.tool_calls, run_index};
}

inline TrainResult train_toy_policy(const std::vector<SimTask>& tasks, const TrainConfig& cfg) {
  if (tasks.empty()) throw std::invalid_argument("no tasks to train on");
  const bool has_pos = std::any_of(tasks.begin(), tasks.end(), [](const auto& t) { return t.spec.tool_beneficial == 1; });
  const bool has_neg = std::any_of(tasks.begin(), tasks.end(), [](const auto& t) { return t.spec.tool_beneficial == -1; });
  if (!has_pos || !has_neg) throw std::invalid_argument("suite needs both tool-beneficial and non-beneficial tasks");
  if (cfg.group_size < 1 || cfg.iterations < 0) throw std::invalid_argument("bad training sizes");
  check(cfg.reward);
  for (const auto& t : tasks) {
    if (auto report = validate_task(t); !report.empty()) throw ValidationError(t.spec.task_id + ": " + describe(report));
    if (t.spec.max_steps > cfg.reward.s_max) throw ValidationError(t.spec.task_id + ": max_steps exceeds s_max");
  }

  TrainResult result{SoftmaxPolicy(tasks, cfg.temperature), {}};
  SoftmaxPolicy& policy = result.policy;
  for (int it = 1; it <= cfg.iterations; ++it) {
    CurvePoint point;
    point.iteration = it;
    std::vector<EvalResult> evals;
    double reward_sum = 0;
    long tool_sum = 0;
    for (const auto& task : tasks) {
      RolloutGroup group{task.spec, {}};
      std::vector<Rollout> rollouts;
      for (int g = 0; g < cfg.group_size; ++g) {
        const auto seed = derive_seed(cfg.seed, task.spec.task_id,
                                      static_cast<std::uint64_t>(it) * static_cast<std::uint64_t>(cfg.group_size) +
                                          static_cast<std::uint64_t>(g));
        rollouts.push_back(rollout(policy, task, seed));
        group.outcomes.push_back(rollouts.back().outcome);
        evals.push_back(to_eval(task, rollouts.back().outcome));
        tool_sum += rollouts.back().outcome.tool_calls;
      }
      const auto audit = audit_group(group, cfg.reward);
      for (const auto& a : audit) reward_sum += a.reward.total;
      if (!is_mixed(group)) continue;
      ++point.retained_groups;

      // Advantage-weighted score ascent on the softmax logits.
      std::map<int, std::vector<double>> grad;
      for (std::size_t g = 0; g < rollouts.size(); ++g) {
        const double adv = audit[g].advantage;
        if (adv == 0.0) continue;
        for (const auto& step : rollouts[g].trace) {
          const int b = static_cast<int>(SoftmaxPolicy::bucket(task, step.progress));
          auto& row = grad[b];
          if (row.empty()) row.assign(task.action_count(), 0.0);
          const auto p = policy.probabilities(task, step.progress);
          for (std::size_t a = 0; a < p.size(); ++a) {
            row[a] += adv * ((a == step.action ? 1.0 : 0.0) - p[a]) / policy.temperature();
          }
        }
      }
      const double scale = cfg.learning_rate / static_cast<double>(cfg.group_size);
      for (const auto& [b, row] : grad) {
        auto& z = policy.logits(task, b);
        for (std::size_t a = 0; a < row.size(); ++a) z[a] += scale * row[a];
      }
    }
    policy.check_finite("iteration " + std::to_string(it));
    point.accuracy = compute_accuracy(evals);
    point.tir = compute_tir(evals);
    point.mean_steps = compute_acs(evals);
    point.mean_tool_calls = static_cast<double>(tool_sum) / static_cast<double>(evals.size());
    point.mean_reward = reward_sum / static_cast<double>(evals.size());
    result.curves.push_back(point);
  }
  return result;
}

// Samples `episodes` rollouts per task from the policy.
inline std::vector<EvalResult> evaluate_policy(const SoftmaxPolicy& policy, const std::vector<SimTask>& tasks,
                                               int episodes, std::uint64_t seed, bool greedy = false) {
  std::vector<EvalResult> out;
  for (const auto& task : tasks) {
    for (int e = 0; e < episodes; ++e) {
      const auto r = rollout(policy, task, derive_seed(seed ^ 0x5eed, task.spec.task_id, static_cast<std::uint64_t>(e)),
                             greedy);
      out.push_back(to_eval(task, r.outcome, e));
    }
  }
  return out;
}

inline std::vector<EvalResult> evaluate_gui_only(const std::vector<SimTask>& tasks) {
  std::vector<EvalResult> out;
  for (const auto& task : tasks) out.push_back(to_eval(task, gui_only_rollout(task).outcome));
  return out;
}

}  // namespace toolcua::sim
