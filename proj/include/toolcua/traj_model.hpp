#pragma once

#include <map>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "toolcua/common.hpp"
#include "toolcua/tool_schema.hpp"

namespace toolcua {

inline constexpr int k_schema_version = 1;
inline constexpr int k_screen_extent = 1000;

// ---------------------------------------------------------------------------
// Actions
// ---------------------------------------------------------------------------

// `answer` exists only so that lenient ingest can carry it; the strict
// validator rejects it.
enum class GuiKind {
  key,
  type,
  mouse_move,
  left_click,
  left_click_drag,
  right_click,
  middle_click,
  double_click,
  scroll,
  wait,
  terminate,
  answer,
};

enum class TaskStatus { success, failure };

enum class TerminalStatus { success, failure, truncated };

inline constexpr std::array<std::pair<GuiKind, std::string_view>, 12> k_gui_kind_names = {{
    {GuiKind::key, "key"},
    {GuiKind::type, "type"},
    {GuiKind::mouse_move, "mouse_move"},
    {GuiKind::left_click, "left_click"},
    {GuiKind::left_click_drag, "left_click_drag"},
    {GuiKind::right_click, "right_click"},
    {GuiKind::middle_click, "middle_click"},
    {GuiKind::double_click, "double_click"},
    {GuiKind::scroll, "scroll"},
    {GuiKind::wait, "wait"},
    {GuiKind::terminate, "terminate"},
    {GuiKind::answer, "answer"},
}};

inline std::string_view to_string(GuiKind kind) {
  for (const auto& [k, name] : k_gui_kind_names) {
    if (k == kind) return name;
  }
  return "unknown";
}

// Action names seen in the wild that map onto the canonical enum.
inline std::string_view normalize_action_name(std::string_view name) {
  if (name == "click") return "left_click";
  if (name == "triple_click") return "double_click";
  if (name == "hscroll") return "scroll";
  return name;
}

inline GuiKind parse_gui_kind(std::string_view name) {
  const auto canonical = normalize_action_name(name);
  for (const auto& [k, n] : k_gui_kind_names) {
    if (n == canonical) return k;
  }
  throw ParseError("unknown GUI action '" + std::string(name) + "'");
}

inline bool needs_coordinate(GuiKind kind) {
  switch (kind) {
    case GuiKind::mouse_move:
    case GuiKind::left_click:
    case GuiKind::left_click_drag:
    case GuiKind::right_click:
    case GuiKind::middle_click:
    case GuiKind::double_click:
      return true;
    default:
      return false;
  }
}

inline std::string_view to_string(TaskStatus s) { return s == TaskStatus::success ? "success" : "failure"; }

inline TaskStatus parse_task_status(std::string_view s) {
  if (s == "success") return TaskStatus::success;
  if (s == "failure") return TaskStatus::failure;
  throw ParseError("unknown status '" + std::string(s) + "'");
}

inline std::string_view to_string(TerminalStatus s) {
  switch (s) {
    case TerminalStatus::success: return "success";
    case TerminalStatus::failure: return "failure";
    case TerminalStatus::truncated: return "truncated";
  }
  return "failure";
}

inline TerminalStatus parse_terminal_status(std::string_view s) {
  if (s == "success") return TerminalStatus::success;
  if (s == "failure") return TerminalStatus::failure;
  if (s == "truncated") return TerminalStatus::truncated;
  throw ParseError("unknown terminal_status '" + std::string(s) + "'");
}

struct GuiAction {
  GuiKind kind = GuiKind::wait;
  std::optional<std::vector<std::string>> keys;
  std::optional<std::string> text;
  std::optional<std::array<int, 2>> coordinate;
  std::optional<int> pixels;
  std::optional<double> time;
  std::optional<TaskStatus> status;

  friend bool operator==(const GuiAction&, const GuiAction&) = default;
};

struct ToolCallAction {
  std::string tool_name;
  Json arguments = Json::object();

  friend bool operator==(const ToolCallAction&, const ToolCallAction&) = default;
};

struct ToolResponse {
  bool success = true;
  Json result;  // string, structured value or null
  std::optional<std::string> error_message;

  friend bool operator==(const ToolResponse&, const ToolResponse&) = default;
};

using Action = std::variant<GuiAction, ToolCallAction>;

inline bool is_tool_call(const Action& a) { return std::holds_alternative<ToolCallAction>(a); }

inline bool is_terminate(const Action& a) {
  if (const auto* g = std::get_if<GuiAction>(&a)) return g->kind == GuiKind::terminate;
  return std::get<ToolCallAction>(a).tool_name == k_terminate_tool;
}

// ---------------------------------------------------------------------------
// Steps and trajectories
// ---------------------------------------------------------------------------

struct Step {
  std::size_t index = 0;
  std::string observation;
  std::string thought;
  std::string action_text;
  Action action = GuiAction{};
  std::optional<ToolResponse> tool_response;
  std::optional<std::string> screenshot_ref;
  std::optional<std::string> screenshot_description;
  // Source-trajectory frame reached after this step. Set by grounding for
  // synthesized tool steps and by interleaving for copied GUI steps.
  std::optional<std::size_t> anchor_frame;
  // Inclusive range of fine leaf steps a merged step stands for.
  std::optional<std::array<std::size_t, 2>> leaf_span;

  friend bool operator==(const Step&, const Step&) = default;
};

struct Trajectory {
  std::string trajectory_id;
  std::string goal;
  std::vector<std::string> application_tags;
  std::vector<Step> steps;
  std::optional<ToolLibrary> tool_pool;
  TerminalStatus terminal_status = TerminalStatus::success;
};

struct TaskSpec {
  std::string task_id;
  std::string goal;
  int tool_beneficial = 1;  // +1 or -1
  int max_steps = 30;
};

inline ValidationReport validate_task_spec(const TaskSpec& task) {
  ValidationReport out;
  if (task.tool_beneficial != 1 && task.tool_beneficial != -1) {
    out.push_back({"tool_beneficial must be +1 or -1", std::to_string(task.tool_beneficial), std::nullopt});
  }
  if (task.max_steps < 1) out.push_back({"max_steps must be positive", std::to_string(task.max_steps), std::nullopt});
  return out;
}

// Trajectories are "truncated" when they hit the horizon without terminating.
inline TerminalStatus classify_terminal_status(const Trajectory& traj, int max_steps) {
  if (!traj.steps.empty()) {
    const Step& last = traj.steps.back();
    if (const auto* g = std::get_if<GuiAction>(&last.action); g && g->kind == GuiKind::terminate) {
      return g->status == TaskStatus::success ? TerminalStatus::success : TerminalStatus::failure;
    }
    if (is_terminate(last.action)) {
      return last.tool_response && !last.tool_response->success ? TerminalStatus::failure : TerminalStatus::success;
    }
  }
  if (static_cast<int>(traj.steps.size()) >= max_steps) return TerminalStatus::truncated;
  return TerminalStatus::failure;
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

inline Json to_json(const GuiAction& a) {
  Json j = Json::object();
  j["type"] = "gui";
  j["kind"] = std::string(to_string(a.kind));
  if (a.keys) j["keys"] = *a.keys;
  if (a.text) j["text"] = *a.text;
  if (a.coordinate) j["coordinate"] = Json::array({(*a.coordinate)[0], (*a.coordinate)[1]});
  if (a.pixels) j["pixels"] = *a.pixels;
  if (a.time) j["time"] = *a.time;
  if (a.status) j["status"] = std::string(to_string(*a.status));
  return j;
}

inline Json to_json(const ToolCallAction& a) {
  Json j = Json::object();
  j["type"] = "tool";
  j["tool_name"] = a.tool_name;
  j["arguments"] = a.arguments;
  return j;
}

inline Json to_json(const ToolResponse& r) {
  Json j = Json::object();
  j["success"] = r.success;
  j["result"] = r.result;
  j["error_message"] = r.error_message ? Json(*r.error_message) : Json(nullptr);
  return j;
}

inline Json to_json(const Step& s) {
  Json j = Json::object();
  j["index"] = s.index;
  j["observation"] = s.observation;
  j["thought"] = s.thought;
  j["action_text"] = s.action_text;
  j["action"] = std::visit([](const auto& a) { return to_json(a); }, s.action);
  if (s.tool_response) j["tool_response"] = to_json(*s.tool_response);
  if (s.screenshot_ref) j["screenshot_ref"] = *s.screenshot_ref;
  if (s.screenshot_description) j["screenshot_description"] = *s.screenshot_description;
  if (s.anchor_frame) j["anchor_frame"] = *s.anchor_frame;
  if (s.leaf_span) j["leaf_span"] = Json::array({(*s.leaf_span)[0], (*s.leaf_span)[1]});
  return j;
}

inline Json to_json(const Trajectory& t) {
  Json j = Json::object();
  j["schema_version"] = k_schema_version;
  j["trajectory_id"] = t.trajectory_id;
  j["goal"] = t.goal;
  j["application_tags"] = t.application_tags;
  j["terminal_status"] = std::string(to_string(t.terminal_status));
  Json steps = Json::array();
  for (const auto& s : t.steps) steps.push_back(to_json(s));
  j["steps"] = std::move(steps);
  if (t.tool_pool) j["tool_pool"] = to_json(*t.tool_pool);
  return j;
}

inline std::string serialize_trajectory(const Trajectory& t) { return to_json(t).dump(); }

// Parses a GUI action in either the corpus shape (`kind`) or the
// computer_use argument shape (`action`), normalizing aliases.
inline GuiAction parse_gui_action(const Json& j) {
  if (!j.is_object()) throw ParseError("GUI action must be an object");
  GuiAction a;
  std::string kind;
  if (auto it = j.find("kind"); it != j.end() && it->is_string()) kind = it->get<std::string>();
  else if (auto it2 = j.find("action"); it2 != j.end() && it2->is_string()) kind = it2->get<std::string>();
  else throw ParseError("GUI action: missing 'kind'");
  a.kind = parse_gui_kind(kind);
  if (auto it = j.find("keys"); it != j.end() && !it->is_null()) {
    if (!it->is_array()) throw ParseError("GUI action: 'keys' must be an array");
    std::vector<std::string> keys;
    for (const auto& k : *it) {
      if (!k.is_string()) throw ParseError("GUI action: key names must be strings");
      keys.push_back(k.get<std::string>());
    }
    a.keys = std::move(keys);
  }
  a.text = detail::optional_string(j, "text", "GUI action");
  if (auto it = j.find("coordinate"); it != j.end() && !it->is_null()) {
    if (!it->is_array() || it->size() != 2 || !(*it)[0].is_number_integer() || !(*it)[1].is_number_integer()) {
      throw ParseError("GUI action: 'coordinate' must be a pair of integers");
    }
    a.coordinate = std::array<int, 2>{(*it)[0].get<int>(), (*it)[1].get<int>()};
  }
  if (auto it = j.find("pixels"); it != j.end() && !it->is_null()) {
    if (!it->is_number_integer()) throw ParseError("GUI action: 'pixels' must be an integer");
    a.pixels = it->get<int>();
  }
  if (auto it = j.find("time"); it != j.end() && !it->is_null()) {
    if (!it->is_number()) throw ParseError("GUI action: 'time' must be a number");
    a.time = it->get<double>();
  }
  if (auto st = detail::optional_string(j, "status", "GUI action")) a.status = parse_task_status(*st);
  return a;
}

inline ToolResponse parse_tool_response(const Json& j) {
  if (!j.is_object()) throw ParseError("tool_response must be an object");
  ToolResponse r;
  const Json& success = detail::require(j, "success", "tool_response");
  if (!success.is_boolean()) throw ParseError("tool_response: 'success' must be a boolean");
  r.success = success.get<bool>();
  r.result = detail::require(j, "result", "tool_response");
  detail::require(j, "error_message", "tool_response");
  r.error_message = detail::optional_string(j, "error_message", "tool_response");
  return r;
}

inline Step parse_step(const Json& j) {
  if (!j.is_object()) throw ParseError("step must be an object");
  Step s;
  const Json& idx = detail::require(j, "index", "step");
  if (!idx.is_number_unsigned()) throw ParseError("step: 'index' must be a non-negative integer");
  s.index = idx.get<std::size_t>();
  s.observation = detail::string_or_empty(j, "observation");
  s.thought = detail::string_or_empty(j, "thought");
  s.action_text = detail::string_or_empty(j, "action_text");
  const Json& action = detail::require(j, "action", "step");
  const std::string type = action.is_object() ? detail::string_or_empty(action, "type") : std::string{};
  if (type == "tool") {
    ToolCallAction call;
    call.tool_name = detail::require_string(action, "tool_name", "tool action");
    if (auto it = action.find("arguments"); it != action.end()) call.arguments = *it;
    s.action = std::move(call);
  } else if (type == "gui" || type.empty()) {
    s.action = parse_gui_action(action);
  } else {
    throw ParseError("step: unknown action type '" + type + "'");
  }
  if (auto it = j.find("tool_response"); it != j.end() && !it->is_null()) s.tool_response = parse_tool_response(*it);
  s.screenshot_ref = detail::optional_string(j, "screenshot_ref", "step");
  s.screenshot_description = detail::optional_string(j, "screenshot_description", "step");
  if (auto it = j.find("anchor_frame"); it != j.end() && !it->is_null()) {
    if (!it->is_number_unsigned()) throw ParseError("step: 'anchor_frame' must be a non-negative integer");
    s.anchor_frame = it->get<std::size_t>();
  }
  if (auto it = j.find("leaf_span"); it != j.end() && !it->is_null()) {
    if (!it->is_array() || it->size() != 2) throw ParseError("step: 'leaf_span' must be a pair");
    s.leaf_span = std::array<std::size_t, 2>{(*it)[0].get<std::size_t>(), (*it)[1].get<std::size_t>()};
  }
  return s;
}

inline Trajectory parse_trajectory(const Json& j) {
  if (!j.is_object()) throw ParseError("trajectory record must be an object");
  if (auto it = j.find("schema_version"); it != j.end()) {
    if (!it->is_number_integer() || it->get<int>() != k_schema_version) {
      throw ParseError("unsupported schema_version " + it->dump());
    }
  } else {
    throw ParseError("trajectory record: missing 'schema_version'");
  }
  Trajectory t;
  t.trajectory_id = detail::require_string(j, "trajectory_id", "trajectory");
  t.goal = detail::require_string(j, "goal", "trajectory");
  if (auto it = j.find("application_tags"); it != j.end() && it->is_array()) {
    for (const auto& tag : *it) {
      if (tag.is_string()) t.application_tags.push_back(tag.get<std::string>());
    }
  }
  if (auto st = detail::optional_string(j, "terminal_status", "trajectory")) t.terminal_status = parse_terminal_status(*st);
  const Json& steps = detail::require(j, "steps", "trajectory");
  if (!steps.is_array()) throw ParseError("trajectory: 'steps' must be an array");
  for (const auto& s : steps) t.steps.push_back(parse_step(s));
  if (auto it = j.find("tool_pool"); it != j.end() && !it->is_null()) t.tool_pool = parse_library(*it);
  return t;
}

inline Trajectory parse_trajectory_line(std::string_view line) {
  Json j;
  try {
    j = Json::parse(line);
  } catch (const Json::parse_error& e) {
    throw ParseError(std::string("trajectory line: ") + e.what());
  }
  return parse_trajectory(j);
}

inline std::vector<Trajectory> read_corpus(const std::filesystem::path& path) {
  std::vector<Trajectory> out;
  std::size_t line_no = 0;
  for (const auto& line : split_lines(read_file(path))) {
    ++line_no;
    try {
      out.push_back(parse_trajectory_line(line));
    } catch (const ParseError& e) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

inline std::string serialize_corpus(const std::vector<Trajectory>& corpus) {
  std::string out;
  for (const auto& t : corpus) {
    out += serialize_trajectory(t);
    out.push_back('\n');
  }
  return out;
}

inline void write_corpus(const std::filesystem::path& path, const std::vector<Trajectory>& corpus) {
  write_file(path, serialize_corpus(corpus));
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

struct ValidateOptions {
  bool lenient = false;  // accept `answer` actions
};

inline ValidationReport validate_trajectory(const Trajectory& traj, const ToolLibrary* library = nullptr,
                                            ValidateOptions options = {}) {
  ValidationReport out;
  auto add = [&](std::string code, std::optional<std::size_t> step, std::string detail = {}) {
    out.push_back({std::move(code), std::move(detail), step});
  };
  if (!library && traj.tool_pool) library = &*traj.tool_pool;

  if (traj.steps.empty()) add("empty trajectory", std::nullopt);

  std::size_t terminate_count = 0;
  for (std::size_t i = 0; i < traj.steps.size(); ++i) {
    const Step& s = traj.steps[i];
    if (i > 0 && s.index <= traj.steps[i - 1].index) add("step indices not increasing", s.index);

    if (const auto* g = std::get_if<GuiAction>(&s.action)) {
      switch (g->kind) {
        case GuiKind::key:
          if (!g->keys || g->keys->empty()) add("missing keys", s.index);
          break;
        case GuiKind::type:
          if (!g->text) add("missing text", s.index);
          break;
        case GuiKind::scroll:
          if (!g->pixels) add("missing pixels", s.index);
          break;
        case GuiKind::wait:
          if (!g->time) add("missing time", s.index);
          else if (*g->time < 0) add("negative wait time", s.index);
          break;
        case GuiKind::terminate:
          if (!g->status) add("missing status", s.index);
          break;
        case GuiKind::answer:
          if (!options.lenient) add("answer action not in enum", s.index);
          break;
        default:
          break;
      }
      if (needs_coordinate(g->kind)) {
        if (!g->coordinate) {
          add("missing coordinate", s.index);
        } else {
          const auto [x, y] = *g->coordinate;
          if (x < 0 || x > k_screen_extent || y < 0 || y > k_screen_extent) {
            add("coordinate out of range", s.index, std::to_string(x) + "," + std::to_string(y));
          }
        }
      }
    } else {
      const auto& call = std::get<ToolCallAction>(s.action);
      if (call.tool_name == k_computer_use) add("reserved tool name", s.index);
      if (!s.tool_response) {
        add("missing tool response", s.index);
      } else if (s.tool_response->success == s.tool_response->error_message.has_value()) {
        add("tool response inconsistent", s.index);
      }
      if (library) {
        const ToolDefinition* def = library->find(call.tool_name);
        if (!def) {
          add("unknown tool", s.index, call.tool_name);
        } else {
          auto problems = check_arguments(*def, call.arguments);
          if (!problems.empty()) {
            std::string d;
            for (const auto& p : problems) d += (d.empty() ? "" : "; ") + p;
            add("invalid tool arguments", s.index, d);
          }
        }
      }
    }
    if (is_terminate(s.action)) {
      ++terminate_count;
      if (terminate_count == 2) add("multiple terminate actions", s.index);
      if (i + 1 != traj.steps.size()) add("terminate not last", s.index);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Corpus statistics
// ---------------------------------------------------------------------------

struct GranularityHistogram {
  std::size_t fine = 0;
  std::size_t mid = 0;
  std::size_t coarse = 0;
};

struct DatasetStats {
  std::size_t trajectory_count = 0;
  std::size_t step_count = 0;
  std::size_t unique_tool_count = 0;
  GranularityHistogram granularity_histogram;
  double avg_tool_pool_size = 0.0;
  double avg_executed_tools_per_traj = 0.0;
};

// Reporting tier: fine tools stay fine; coarse tools proposed by synthesis or
// merged directly over leaves count as mid; deeper merges count as coarse.
inline std::string_view reporting_tier(const ToolDefinition& tool) {
  if (tool.granularity == "fine") return "fine";
  if (tool.merge_level && *tool.merge_level >= 2) return "coarse";
  return "mid";
}

inline std::size_t executed_tool_calls(const Trajectory& t) {
  return static_cast<std::size_t>(std::count_if(t.steps.begin(), t.steps.end(), [](const Step& s) {
    return is_tool_call(s.action) && !is_terminate(s.action);
  }));
}

inline DatasetStats compute_dataset_stats(const std::vector<Trajectory>& dataset) {
  if (dataset.empty()) throw std::invalid_argument("empty dataset");
  DatasetStats stats;
  stats.trajectory_count = dataset.size();
  std::map<std::string, const ToolDefinition*> unique;
  std::size_t pool_total = 0;
  std::size_t executed_total = 0;
  for (const auto& t : dataset) {
    stats.step_count += t.steps.size();
    executed_total += executed_tool_calls(t);
    if (t.tool_pool) {
      pool_total += t.tool_pool->tools.size();
      for (const auto& tool : t.tool_pool->tools) unique.emplace(tool.name, &tool);
    }
  }
  stats.unique_tool_count = unique.size();
  for (const auto& [name, tool] : unique) {
    if (name == k_terminate_tool) continue;
    const auto tier = reporting_tier(*tool);
    if (tier == "fine") ++stats.granularity_histogram.fine;
    else if (tier == "mid") ++stats.granularity_histogram.mid;
    else ++stats.granularity_histogram.coarse;
  }
  const double n = static_cast<double>(dataset.size());
  stats.avg_tool_pool_size = static_cast<double>(pool_total) / n;
  stats.avg_executed_tools_per_traj = static_cast<double>(executed_total) / n;
  return stats;
}

inline Json to_json(const DatasetStats& s) {
  Json j = Json::object();
  j["trajectory_count"] = s.trajectory_count;
  j["step_count"] = s.step_count;
  j["unique_tool_count"] = s.unique_tool_count;
  j["granularity_histogram"] = Json{{"fine", s.granularity_histogram.fine},
                                    {"mid", s.granularity_histogram.mid},
                                    {"coarse", s.granularity_histogram.coarse}};
  j["avg_tool_pool_size"] = s.avg_tool_pool_size;
  j["avg_executed_tools_per_traj"] = s.avg_executed_tools_per_traj;
  return j;
}

}  // namespace toolcua
