#pragma once

#include <atomic>
#include <cmath>
#include <functional>
#include <map>
#include <set>
#include <thread>
#include <vector>

#include "toolcua/agent_io.hpp"
#include "toolcua/common.hpp"
#include "toolcua/llm_client.hpp"
#include "toolcua/merge_tree.hpp"
#include "toolcua/tool_schema.hpp"
#include "toolcua/traj_model.hpp"

namespace toolcua {

// A trajectory the pipeline declined to produce (premature terminate, failed
// grounding, ...). Callers usually log it and move on to the next input.
class TrajectoryRejected : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// ---------------------------------------------------------------------------
// Stage 1: filtering and app balancing
// ---------------------------------------------------------------------------

struct FilterConfig {
  int min_steps = 3;
  int max_steps = 30;
  double max_app_fraction = 0.25;
};

inline std::size_t app_cap(double fraction, std::size_t n) {
  return static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n) - 1e-12));
}

inline std::vector<Trajectory> filter_and_balance(const std::vector<Trajectory>& raw, const FilterConfig& cfg,
                                                  std::uint64_t seed) {
  if (cfg.min_steps < 1 || cfg.max_steps < 1 || cfg.min_steps > cfg.max_steps) {
    throw std::invalid_argument("filter: step bounds must be positive and ordered");
  }
  if (!(cfg.max_app_fraction > 0.0 && cfg.max_app_fraction <= 1.0)) {
    throw std::invalid_argument("filter: max_app_fraction must be in (0, 1]");
  }
  std::vector<const Trajectory*> kept;
  for (const auto& t : raw) {
    const auto n = static_cast<int>(t.steps.size());
    if (n < cfg.min_steps || n > cfg.max_steps) continue;
    if (t.terminal_status != TerminalStatus::success) continue;
    if (!validate_trajectory(t).empty()) continue;
    kept.push_back(&t);
  }

  // Drop one trajectory at a time from whichever tag is furthest over its cap.
  // Caps shrink with the output, so recount every round.
  Rng rng(derive_seed(seed, "filter_and_balance"));
  while (true) {
    std::map<std::string, std::size_t> counts;
    for (const auto* t : kept) {
      std::set<std::string> tags(t->application_tags.begin(), t->application_tags.end());
      for (const auto& tag : tags) ++counts[tag];
    }
    const std::size_t cap = app_cap(cfg.max_app_fraction, kept.size());
    std::string worst;
    std::size_t worst_excess = 0;
    for (const auto& [tag, count] : counts) {
      if (count > cap && count - cap > worst_excess) {
        worst = tag;
        worst_excess = count - cap;
      }
    }
    if (worst_excess == 0) break;
    std::vector<std::size_t> holders;
    for (std::size_t i = 0; i < kept.size(); ++i) {
      const auto& tags = kept[i]->application_tags;
      if (std::find(tags.begin(), tags.end(), worst) != tags.end()) holders.push_back(i);
    }
    kept.erase(kept.begin() + static_cast<std::ptrdiff_t>(holders[rng.uniform_index(holders.size())]));
  }

  if (kept.empty()) throw ValidationError("nothing survived filtering");
  std::vector<Trajectory> out;
  out.reserve(kept.size());
  for (const auto* t : kept) out.push_back(*t);
  return out;
}

// ---------------------------------------------------------------------------
// Frames
// ---------------------------------------------------------------------------

// Frame k is the screen after k GUI steps, i.e. the screenshot recorded
// before step k. A source trajectory that ends in terminate has its final
// frame on that step.
inline std::string frame_ref(const Trajectory& gui, std::size_t k) {
  if (k < gui.steps.size() && gui.steps[k].screenshot_ref) return *gui.steps[k].screenshot_ref;
  return "frame://" + gui.trajectory_id + "/" + std::to_string(k);
}

inline std::size_t final_frame(const Trajectory& gui) {
  if (gui.steps.empty() || !is_terminate(gui.steps.back().action)) {
    throw ValidationError("source trajectory " + gui.trajectory_id + " does not end with terminate");
  }
  return gui.steps.size() - 1;
}

inline std::string frame_description(const Trajectory& gui, std::size_t k) {
  if (k < gui.steps.size() && gui.steps[k].screenshot_description) return *gui.steps[k].screenshot_description;
  return {};
}

// Fills missing screenshot descriptions through the description prompt.
inline void ensure_descriptions(Trajectory& traj, LlmClient& client) {
  for (std::size_t k = 0; k < traj.steps.size(); ++k) {
    auto& step = traj.steps[k];
    if (step.screenshot_description) continue;
    auto req = CompletionRequest::make(TemplateId::screenshot_description, {}, {frame_ref(traj, k)});
    const std::string text = client.complete(req).text;
    step.screenshot_description = std::string(detail::trim(text));
  }
}

// ---------------------------------------------------------------------------
// Stage 2: tool library synthesis
// ---------------------------------------------------------------------------

struct DiversityRound {
  std::string name;
  int min_fine = 4;
  int min_coarse = 3;
  std::string instruction;
};

inline const std::vector<DiversityRound>& diversity_rounds() {
  static const std::vector<DiversityRound> kRounds = {
      {"fine_heavy", 6, 2,
       "Favor focused tools. Most tools should capture one local sub-goal each, with only a couple of broader "
       "workflow tools."},
      {"balanced", 4, 3,
       "Mix focused single-intent tools with broader workflow tools that cover several adjacent operations."},
      {"coarse_heavy", 2, 4,
       "Favor broader workflow tools that each cover several adjacent UI operations. Keep only a few focused "
       "tools."},
  };
  return kRounds;
}

inline const DiversityRound& diversity_round(std::string_view name) {
  for (const auto& r : diversity_rounds()) {
    if (r.name == name) return r;
  }
  throw std::invalid_argument("unknown diversity round: " + std::string(name));
}

struct SynthOptions {
  int max_tools = 15;
  int min_tools = 5;
  int repair_budget = 3;
  std::vector<std::string> existing_tools;
};

inline ToolDefinition canonical_terminate_tool() {
  ToolDefinition t;
  t.name = std::string(k_terminate_tool);
  t.description = "End the task and report whether it was completed.";
  t.granularity = "coarse";
  t.has_parameters_field = true;
  t.returns = canonical_returns();
  t.category = "terminate";
  return t;
}

inline std::string trajectory_context(const Trajectory& traj) {
  std::string out;
  for (std::size_t k = 0; k < traj.steps.size(); ++k) {
    const auto& s = traj.steps[k];
    out += "Frame " + std::to_string(k) + ": " + frame_description(traj, k) + "\n";
    out += "  Action taken: " + s.action_text + "\n";
  }
  return out;
}

inline std::string tools_for_prompt(const std::vector<ToolDefinition>& tools) {
  Json arr = Json::array();
  for (const auto& t : tools) arr.push_back(to_json(t));
  return arr.dump(2);
}

// Asks for a repaired definition up to `budget` times. Returns nullopt when
// the tool is still invalid afterwards.
inline std::optional<ToolDefinition> repair_tool(ToolDefinition tool, LlmClient& client, int budget) {
  auto violations = validate_tool(tool);
  for (int attempt = 0; attempt < budget && !violations.empty(); ++attempt) {
    auto req = CompletionRequest::make(TemplateId::fix_tool, {{"tool", canonical_tool_text(tool)},
                                                              {"error_msg", format_violations(violations)},
                                                              {"meta_schema", std::string(k_tool_meta_schema)}});
    req.attempt = attempt;
    try {
      Json j = extract_structured(client.complete(req).text);
      if (j.is_object() && j.contains("tool") && j["tool"].is_object()) j = j["tool"];
      tool = parse_tool(j);
    } catch (const ParseError&) {
      // An unusable answer spends the attempt; the old definition stands.
    }
    violations = validate_tool(tool);
  }
  if (!violations.empty()) return std::nullopt;
  return tool;
}

inline ToolLibrary synthesize_tool_library(Trajectory traj, const DiversityRound& round, LlmClient& client,
                                           const SynthOptions& options = {}) {
  ensure_descriptions(traj, client);
  std::string existing = "None";
  if (!options.existing_tools.empty()) {
    existing.clear();
    for (const auto& name : options.existing_tools) existing += "- " + name + "\n";
  }
  auto req = CompletionRequest::make(TemplateId::tool_generation,
                                     {{"goal", traj.goal},
                                      {"round_name", round.name},
                                      {"granularity_instruction", round.instruction},
                                      {"trajectory_context", trajectory_context(traj)},
                                      {"meta_schema", std::string(k_tool_meta_schema)},
                                      {"existing_tools", existing},
                                      {"min_fine_grained_tools", std::to_string(round.min_fine)},
                                      {"min_coarse_grained_tools", std::to_string(round.min_coarse)}});
  const auto proposed = complete_json(client, req, [](Json j) {
    if (!j.is_object() || !j.contains("tools") || !j["tools"].is_array()) {
      throw ParseError("tool library response lacks a tools array");
    }
    std::vector<ToolDefinition> tools;
    for (const auto& t : j["tools"]) tools.push_back(parse_tool(t));
    return tools;
  });

  ToolLibrary lib;
  lib.provenance = traj.trajectory_id;
  lib.round_tag = round.name;
  bool have_terminate = false;
  int non_terminate = 0;
  for (const auto& candidate : proposed) {
    auto fixed = repair_tool(candidate, client, options.repair_budget);
    if (!fixed) continue;
    if (lib.contains(fixed->name)) continue;
    if (fixed->name == k_terminate_tool) {
      if (have_terminate) continue;
      have_terminate = true;
    } else {
      if (non_terminate >= options.max_tools) continue;
      ++non_terminate;
    }
    lib.tools.push_back(std::move(*fixed));
  }
  if (!have_terminate) lib.tools.push_back(canonical_terminate_tool());

  if (non_terminate < options.min_tools) {
    throw ValidationError("library too small: " + std::to_string(non_terminate) + " usable tools for " +
                          traj.trajectory_id);
  }
  LibraryBounds bounds{round.min_fine, round.min_coarse, options.max_tools, options.min_tools};
  const auto report = validate_library(lib, bounds);
  if (!report.empty()) throw ValidationError("library for " + traj.trajectory_id + ": " + describe(report));
  return lib;
}

// ---------------------------------------------------------------------------
// Stage 3: tool trajectory generation with next-state grounding
// ---------------------------------------------------------------------------

enum class Confidence { high, medium, low, none };

inline Confidence parse_confidence(std::string_view s) {
  if (s == "high") return Confidence::high;
  if (s == "medium") return Confidence::medium;
  if (s == "low") return Confidence::low;
  if (s == "none") return Confidence::none;
  throw ParseError("unknown confidence '" + std::string(s) + "'");
}

struct GroundingResult {
  std::string current_description;
  std::optional<std::size_t> matched_index;  // 1-based
  Confidence confidence = Confidence::none;
  std::string reason;

  bool accepted() const {
    return matched_index && (confidence == Confidence::high || confidence == Confidence::medium);
  }
};

inline GroundingResult parse_grounding(const Json& j, std::size_t num_candidates) {
  if (!j.is_object()) throw ParseError("grounding response must be an object");
  GroundingResult g;
  g.current_description = detail::string_or_empty(j, "current_description");
  g.reason = detail::string_or_empty(j, "reason");
  g.confidence = parse_confidence(detail::require_string(j, "confidence", "grounding"));
  const Json& idx = detail::require(j, "matched_index", "grounding");
  if (!idx.is_null()) {
    if (!idx.is_number_integer()) throw ParseError("matched_index must be an integer or null");
    const auto v = idx.get<long long>();
    if (v < 1 || static_cast<std::size_t>(v) > num_candidates) {
      throw ValidationError("grounding index out of range: " + std::to_string(v) + " of " +
                            std::to_string(num_candidates));
    }
    g.matched_index = static_cast<std::size_t>(v);
  }
  return g;
}

inline GroundingResult ground_next_state(const ToolCallAction& call, const ToolResponse& response,
                                         const std::string& current_frame, const std::vector<std::string>& candidates,
                                         LlmClient& client, int attempt = 0) {
  if (candidates.empty()) throw std::invalid_argument("grounding needs at least one candidate frame");
  std::vector<std::string> images{current_frame};
  images.insert(images.end(), candidates.begin(), candidates.end());
  auto req = CompletionRequest::make(TemplateId::describe_and_locate,
                                     {{"tool_name", call.tool_name},
                                      {"tool_parameters", py_dumps(call.arguments)},
                                      {"tool_response", py_dumps(to_json(response))},
                                      {"num_candidates", std::to_string(candidates.size())}},
                                     std::move(images));
  req.attempt = attempt;
  return complete_json(client, req, [&](Json j) { return parse_grounding(j, candidates.size()); });
}

struct GenOptions {
  std::size_t grounding_window = 8;
  std::string granularity_instruction = diversity_round("balanced").instruction;
};

namespace detail {

inline ToolResponse parse_generated_response(const Json& j) {
  if (!j.is_object() || j.size() != 3 || !j.contains("success") || !j.contains("result") ||
      !j.contains("error_message")) {
    throw ParseError("tool_response must have exactly success, result, error_message");
  }
  ToolResponse r = parse_tool_response(j);
  if (r.success == r.error_message.has_value()) throw ParseError("tool_response success/error_message disagree");
  return r;
}

struct GeneratedStep {
  Step step;
  ToolCallAction call;
};

inline GeneratedStep parse_generated_step(const Json& j, const ToolLibrary& lib) {
  if (!j.is_object()) throw ParseError("generated step must be an object");
  GeneratedStep g;
  g.step.observation = require_string(j, "observation", "generated step");
  g.step.thought = require_string(j, "thought", "generated step");
  g.step.action_text = require_string(j, "action", "generated step");
  const Json& tc = require(j, "tool_call", "generated step");
  g.call.tool_name = require_string(tc, "tool_name", "tool_call");
  if (auto it = tc.find("tool_parameters"); it != tc.end() && !it->is_null()) g.call.arguments = *it;
  const ToolDefinition* def = lib.find(g.call.tool_name);
  if (!def) throw ParseError("generated step uses unknown tool '" + g.call.tool_name + "'");
  if (auto problems = check_arguments(*def, g.call.arguments); !problems.empty()) {
    throw ParseError("generated call to " + g.call.tool_name + ": " + problems.front());
  }
  g.step.tool_response = parse_generated_response(require(j, "tool_response", "generated step"));
  g.step.action = g.call;
  return g;
}

}  // namespace detail

inline Step make_terminate_step(const Trajectory& gui, std::size_t frame) {
  Step s;
  s.observation = frame_description(gui, frame);
  s.thought = "The recorded trajectory has reached its final state, so the task is complete.";
  s.action_text = "Terminate the task and report success.";
  s.action = ToolCallAction{std::string(k_terminate_tool), Json::object()};
  s.tool_response = ToolResponse{true, Json("Task terminated"), std::nullopt};
  s.screenshot_ref = frame_ref(gui, frame);
  if (gui.steps[frame].screenshot_description) s.screenshot_description = gui.steps[frame].screenshot_description;
  s.anchor_frame = frame;
  return s;
}

inline Trajectory generate_tool_trajectory(Trajectory gui, const ToolLibrary& lib, LlmClient& client,
                                           const GenOptions& options = {}) {
  const std::size_t last = final_frame(gui);
  ensure_descriptions(gui, client);
  const std::string tools_text = tools_for_prompt(lib.tools);

  Trajectory out;
  out.trajectory_id = gui.trajectory_id + ".tool";
  out.goal = gui.goal;
  out.application_tags = gui.application_tags;
  out.terminal_status = TerminalStatus::success;
  out.tool_pool = lib;

  std::string history;
  std::string world_state;
  std::size_t frame = 0;
  bool prev_wait_like = false;
  while (frame < last) {
    std::optional<detail::GeneratedStep> accepted;
    std::size_t matched_frame = frame;
    for (int attempt = 0; attempt < 2 && !accepted; ++attempt) {
      auto req = CompletionRequest::make(TemplateId::joint_generation,
                                         {{"granularity_instruction", options.granularity_instruction},
                                          {"goal", gui.goal},
                                          {"history", history.empty() ? "None" : history},
                                          {"screenshot_description", frame_description(gui, frame)},
                                          {"world_state", world_state.empty() ? "None" : world_state},
                                          {"tools", tools_text}},
                                         {frame_ref(gui, frame)});
      req.attempt = attempt;
      auto gen = complete_json(client, req, [&](Json j) { return detail::parse_generated_step(j, lib); });
      if (gen.call.tool_name == k_terminate_tool) {
        throw TrajectoryRejected(gui.trajectory_id + ": terminate before the final recorded state");
      }
      const bool wait_like = is_wait_like_name(gen.call.tool_name);
      if (wait_like && prev_wait_like) {
        throw TrajectoryRejected(gui.trajectory_id + ": consecutive wait-like tool calls");
      }
      std::vector<std::string> candidates;
      for (std::size_t k = frame + 1; k <= std::min(last, frame + options.grounding_window); ++k) {
        candidates.push_back(frame_ref(gui, k));
      }
      const auto g = ground_next_state(gen.call, *gen.step.tool_response, frame_ref(gui, frame), candidates, client,
                                       attempt);
      if (g.accepted()) {
        matched_frame = frame + *g.matched_index;
        prev_wait_like = wait_like;
        accepted = std::move(gen);
      }
    }
    if (!accepted) throw TrajectoryRejected(gui.trajectory_id + ": step could not be grounded at frame " +
                                            std::to_string(frame));

    Step step = std::move(accepted->step);
    step.screenshot_ref = frame_ref(gui, frame);
    step.screenshot_description = frame_description(gui, frame);
    step.anchor_frame = matched_frame;
    step.index = out.steps.size();

    const auto& call = accepted->call;
    auto predict = CompletionRequest::make(TemplateId::predict_screenshot,
                                           {{"goal", gui.goal},
                                            {"tool_name", call.tool_name},
                                            {"tool_parameters", py_dumps(call.arguments)},
                                            {"tool_response", py_dumps(to_json(*step.tool_response))},
                                            {"previous_screenshot_description", frame_description(gui, frame)},
                                            {"world_state", world_state.empty() ? "None" : world_state}});
    const std::string raw_prediction = client.complete(predict).text;
    const std::string predicted(detail::trim(raw_prediction));
    if (!world_state.empty()) world_state.push_back('\n');
    world_state += predicted;

    history += "Step " + std::to_string(step.index + 1) + ": " + step.action_text + " | tool_call: " +
               call.tool_name + " " + py_dumps(call.arguments) + " | tool_response: " +
               py_dumps(to_json(*step.tool_response)) + "\n";
    out.steps.push_back(std::move(step));
    frame = matched_frame;
  }
  Step term = make_terminate_step(gui, last);
  term.index = out.steps.size();
  out.steps.push_back(std::move(term));
  return out;
}

// ---------------------------------------------------------------------------
// Stage 4: bottom-up merging
// ---------------------------------------------------------------------------

struct MergeOptions {
  int max_branching = 4;
  int max_height = 2;
  int repair_budget = 3;
};

struct MergeResult {
  MergeTree tree;
  bool fell_back_to_identity = false;
  std::vector<Trajectory> variants;  // [0] is the fine trajectory, then one per materialized level
  ToolLibrary library;               // input library plus every merged tool
};

namespace detail {

inline std::string step_summary(const Step& s) {
  std::string out = s.action_text;
  if (const auto* call = std::get_if<ToolCallAction>(&s.action)) {
    out += " | tool_call: " + call->tool_name + " " + py_dumps(call->arguments);
  }
  if (s.tool_response) out += " | tool_response: " + py_dumps(to_json(*s.tool_response));
  return out;
}

inline std::string unique_tool_name(const std::string& base, const ToolLibrary& lib) {
  if (!lib.contains(base)) return base;
  for (int k = 2;; ++k) {
    std::string candidate = base + "_" + std::to_string(k);
    if (!lib.contains(candidate)) return candidate;
  }
}

struct MergedChunk {
  ToolDefinition tool;
  Step step;
};

}  // namespace detail

inline MergeTree plan_merge_tree(const Trajectory& tool_traj, std::size_t n_leaves, const MergeOptions& opt,
                                 LlmClient& client, bool& fell_back) {
  fell_back = false;
  std::string leaf_summary;
  for (std::size_t i = 0; i < n_leaves; ++i) {
    leaf_summary += std::to_string(i) + ": " + detail::step_summary(tool_traj.steps[i]) + "\n";
  }
  auto req = CompletionRequest::make(TemplateId::merge_tree_planning,
                                     {{"goal", tool_traj.goal},
                                      {"leaf_summary", leaf_summary},
                                      {"max_leaf_index", std::to_string(n_leaves - 1)},
                                      {"max_branching_factor", std::to_string(opt.max_branching)},
                                      {"max_coarse_levels", std::to_string(opt.max_height)}});
  try {
    return complete_json(client, req, [&](Json j) {
      MergeTree t = parse_merge_tree(j);
      const auto report = validate_merge_tree(t, n_leaves, opt.max_branching, opt.max_height);
      if (!report.empty()) throw ParseError("invalid merge tree: " + describe(report));
      return t;
    });
  } catch (const ParseError&) {
    fell_back = true;
    return identity_tree(n_leaves);
  }
}

inline MergeResult plan_and_merge(const Trajectory& tool_traj, const ToolLibrary& lib, LlmClient& client,
                                  const MergeOptions& opt = {}) {
  if (opt.max_branching < 2 || opt.max_height < 1) throw std::invalid_argument("merge: need B >= 2 and H >= 1");
  MergeResult result;
  result.library = lib;

  std::size_t n = tool_traj.steps.size();
  const bool ends_with_terminate = n > 0 && is_terminate(tool_traj.steps.back().action);
  if (ends_with_terminate) --n;
  for (std::size_t i = 0; i < n; ++i) {
    if (!tool_traj.steps[i].anchor_frame) throw ValidationError("merge needs a grounded trajectory");
  }

  if (n == 0) {
    result.tree = identity_tree(0);
    result.fell_back_to_identity = true;
  } else {
    result.tree = plan_merge_tree(tool_traj, n, opt, client, result.fell_back_to_identity);
  }

  // Materialize children before parents so a parent's chunk can reuse them.
  std::vector<const MergeNode*> nodes;
  collect_merge_nodes(result.tree.root, nodes);
  std::map<const MergeNode*, detail::MergedChunk> merged;
  std::function<void(const MergeNode&, std::vector<const Step*>&)> chunk_steps =
      [&](const MergeNode& node, std::vector<const Step*>& acc) {
        if (node.is_leaf()) {
          acc.push_back(&tool_traj.steps[*node.leaf]);
          return;
        }
        if (auto it = merged.find(&node); it != merged.end()) {
          acc.push_back(&it->second.step);
          return;
        }
        for (const auto& c : node.children) chunk_steps(c, acc);
      };

  for (const MergeNode* node : nodes) {
    std::vector<const Step*> parts;
    for (const auto& c : node->children) chunk_steps(c, parts);
    std::string summary;
    for (std::size_t i = 0; i < parts.size(); ++i) {
      summary += std::to_string(i + 1) + ". " + detail::step_summary(*parts[i]) + "\n";
    }
    if (!node->summary.empty()) summary += "Sub-goal: " + node->summary + "\n";
    const int level = node_height(*node);
    auto req = CompletionRequest::make(TemplateId::bottom_up_merge,
                                       {{"goal", tool_traj.goal},
                                        {"target_level", "coarse level " + std::to_string(level)},
                                        {"chunk_summary", summary}});
    std::optional<detail::MergedChunk> chunk;
    try {
      chunk = complete_json(client, req, [&](Json j) {
        const Json& def = detail::require(j, "tool_definition", "merge response");
        const Json& ms = detail::require(j, "merged_step", "merge response");
        detail::MergedChunk c;
        c.tool = parse_tool(def);
        c.step.observation = detail::require_string(ms, "observation", "merged_step");
        c.step.thought = detail::require_string(ms, "thought", "merged_step");
        c.step.action_text = detail::require_string(ms, "action", "merged_step");
        const Json& tc = detail::require(ms, "tool_call", "merged_step");
        ToolCallAction call;
        call.tool_name = detail::require_string(tc, "tool_name", "merged tool_call");
        if (auto it = tc.find("tool_parameters"); it != tc.end() && !it->is_null()) call.arguments = *it;
        if (call.tool_name != c.tool.name) throw ParseError("merged tool_call name differs from tool_definition.name");
        c.step.action = std::move(call);
        c.step.tool_response = detail::parse_generated_response(detail::require(ms, "tool_response", "merged_step"));
        return c;
      });
    } catch (const ParseError&) {
      continue;  // chunk stays unmerged
    }
    auto fixed = repair_tool(chunk->tool, client, opt.repair_budget);
    if (!fixed || fixed->name == k_terminate_tool || fixed->category == "terminate") continue;
    auto& call = std::get<ToolCallAction>(chunk->step.action);
    if (!check_arguments(*fixed, call.arguments).empty()) continue;
    fixed->granularity = "coarse";
    fixed->merge_level = level;
    fixed->name = detail::unique_tool_name(fixed->name, result.library);
    call.tool_name = fixed->name;

    const auto span = leaf_span(*node);
    const Step& first = tool_traj.steps[span.lo];
    const Step& last_leaf = tool_traj.steps[span.hi];
    chunk->step.screenshot_ref = first.screenshot_ref;
    chunk->step.screenshot_description = first.screenshot_description;
    chunk->step.anchor_frame = last_leaf.anchor_frame;
    chunk->step.leaf_span = std::array<std::size_t, 2>{span.lo, span.hi};
    chunk->tool = *fixed;
    result.library.tools.push_back(*fixed);
    merged.emplace(node, std::move(*chunk));
  }

  auto finish = [&](Trajectory t, const std::string& suffix) {
    t.trajectory_id = tool_traj.trajectory_id + suffix;
    if (ends_with_terminate) t.steps.push_back(tool_traj.steps.back());
    for (std::size_t i = 0; i < t.steps.size(); ++i) t.steps[i].index = i;
    t.tool_pool = result.library;
    return t;
  };

  Trajectory fine = tool_traj;
  fine.steps.resize(n);
  result.variants.push_back(finish(std::move(fine), ""));

  const int height = coarse_height(result.tree);
  for (int level = 1; level <= height; ++level) {
    std::vector<std::pair<LeafSpan, const Step*>> replacements;
    for (const MergeNode* node : nodes) {
      if (node_height(*node) != level) continue;
      if (auto it = merged.find(node); it != merged.end()) replacements.push_back({leaf_span(*node), &it->second.step});
    }
    if (replacements.empty()) continue;
    std::sort(replacements.begin(), replacements.end(),
              [](const auto& a, const auto& b) { return a.first.lo < b.first.lo; });
    Trajectory v = tool_traj;
    v.steps.clear();
    std::size_t r = 0;
    for (std::size_t i = 0; i < n;) {
      if (r < replacements.size() && replacements[r].first.lo == i) {
        v.steps.push_back(*replacements[r].second);
        i = replacements[r].first.hi + 1;
        ++r;
      } else {
        v.steps.push_back(tool_traj.steps[i]);
        ++i;
      }
    }
    result.variants.push_back(finish(std::move(v), ".g" + std::to_string(level)));
  }
  return result;
}

// ---------------------------------------------------------------------------
// Stage 5: interleaving and critical steps
// ---------------------------------------------------------------------------

enum class SwitchDirection { gui_to_tool, tool_to_gui };

inline std::string_view to_string(SwitchDirection d) {
  return d == SwitchDirection::gui_to_tool ? "gui_to_tool" : "tool_to_gui";
}

struct CriticalStep {
  std::string trajectory_id;
  std::size_t step_index = 0;
  SwitchDirection direction = SwitchDirection::gui_to_tool;
  std::size_t context_start = 0;  // first step shown with its screenshot

  friend bool operator==(const CriticalStep&, const CriticalStep&) = default;
};

struct InterleavedVariant {
  Trajectory trajectory;
  ToolLibrary pool;
  std::vector<CriticalStep> critical_steps;
  std::vector<std::string> replaced_tools;
};

struct InterleaveOptions {
  double p_replace = 0.5;
  int variants = 3;
  int history_n = 5;
};

// Terminate sits outside both kinds: it never forms a switching boundary.
inline bool counts_as_tool(const Step& s) { return is_tool_call(s.action) && !is_terminate(s.action); }

inline std::vector<CriticalStep> find_critical_steps(const Trajectory& t, int history_n = 5) {
  std::vector<CriticalStep> out;
  for (std::size_t i = 1; i < t.steps.size(); ++i) {
    const Step& prev = t.steps[i - 1];
    const Step& cur = t.steps[i];
    if (is_terminate(prev.action) || is_terminate(cur.action)) continue;
    const bool a = counts_as_tool(prev);
    const bool b = counts_as_tool(cur);
    if (a == b) continue;
    const std::size_t hist = static_cast<std::size_t>(std::max(0, history_n));
    out.push_back({t.trajectory_id, i, b ? SwitchDirection::gui_to_tool : SwitchDirection::tool_to_gui,
                   i > hist ? i - hist : 0});
  }
  return out;
}

struct CoveredSpan {
  std::size_t begin = 0;  // first source GUI step
  std::size_t end = 0;    // one past the last
};

// Source GUI steps each non-terminate step of `tool_traj` stands for.
inline std::vector<CoveredSpan> covered_spans(const Trajectory& tool_traj, const Trajectory& gui) {
  const std::size_t last = final_frame(gui);
  std::vector<CoveredSpan> spans(tool_traj.steps.size());
  std::size_t prev = 0;
  for (std::size_t i = 0; i < tool_traj.steps.size(); ++i) {
    const Step& s = tool_traj.steps[i];
    if (is_terminate(s.action)) {
      spans[i] = {prev, prev};
      continue;
    }
    if (!s.anchor_frame || *s.anchor_frame <= prev || *s.anchor_frame > last) {
      throw ValidationError("ungrounded tool step " + std::to_string(s.index) + " in " + tool_traj.trajectory_id);
    }
    spans[i] = {prev, *s.anchor_frame};
    prev = *s.anchor_frame;
  }
  return spans;
}

inline InterleavedVariant build_variant(const Trajectory& tool_traj, const Trajectory& gui,
                                        const std::vector<CoveredSpan>& spans, const std::set<std::string>& replaced,
                                        const std::string& id, int history_n) {
  InterleavedVariant v;
  v.trajectory = tool_traj;
  v.trajectory.trajectory_id = id;
  v.trajectory.steps.clear();
  for (std::size_t i = 0; i < tool_traj.steps.size(); ++i) {
    const Step& s = tool_traj.steps[i];
    const auto* call = std::get_if<ToolCallAction>(&s.action);
    if (call && !is_terminate(s.action) && replaced.count(call->tool_name)) {
      for (std::size_t k = spans[i].begin; k < spans[i].end; ++k) {
        Step g = gui.steps[k];
        g.screenshot_ref = frame_ref(gui, k);
        g.anchor_frame = k + 1;
        v.trajectory.steps.push_back(std::move(g));
      }
    } else {
      v.trajectory.steps.push_back(s);
    }
  }
  for (std::size_t i = 0; i < v.trajectory.steps.size(); ++i) v.trajectory.steps[i].index = i;

  if (!tool_traj.tool_pool) throw ValidationError("tool trajectory " + tool_traj.trajectory_id + " has no tool pool");
  v.pool = *tool_traj.tool_pool;
  std::erase_if(v.pool.tools, [&](const ToolDefinition& t) { return replaced.count(t.name) > 0; });
  v.trajectory.tool_pool = v.pool;
  v.replaced_tools.assign(replaced.begin(), replaced.end());
  v.critical_steps = find_critical_steps(v.trajectory, history_n);
  return v;
}

// Replacement is drawn once per distinct tool name, so a replaced tool can
// leave the pool without stranding other calls to it.
inline std::vector<InterleavedVariant> interleave(const Trajectory& tool_traj, const Trajectory& gui,
                                                  std::uint64_t seed, const InterleaveOptions& opt = {}) {
  if (!(opt.p_replace >= 0.0 && opt.p_replace <= 1.0)) throw std::invalid_argument("p_replace must be in [0, 1]");
  if (opt.variants < 1) throw std::invalid_argument("variants must be positive");
  const auto spans = covered_spans(tool_traj, gui);

  std::vector<std::string> names;
  for (const auto& s : tool_traj.steps) {
    if (!counts_as_tool(s)) continue;
    const auto& name = std::get<ToolCallAction>(s.action).tool_name;
    if (std::find(names.begin(), names.end(), name) == names.end()) names.push_back(name);
  }

  std::vector<InterleavedVariant> out;
  std::set<std::set<std::string>> seen;
  for (int v = 0; v < opt.variants; ++v) {
    Rng rng(derive_seed(seed, tool_traj.trajectory_id, static_cast<std::uint64_t>(v)));
    std::set<std::string> replaced;
    for (const auto& name : names) {
      if (rng.bernoulli(opt.p_replace)) replaced.insert(name);
    }
    if (!seen.insert(replaced).second) continue;
    const std::string id = replaced.empty() ? tool_traj.trajectory_id
                                            : tool_traj.trajectory_id + ".mix" + std::to_string(v);
    out.push_back(build_variant(tool_traj, gui, spans, replaced, id, opt.history_n));
  }
  return out;
}

// ---------------------------------------------------------------------------
// D_critical export
// ---------------------------------------------------------------------------

inline std::string step_screenshot(const Trajectory& t, std::size_t i) {
  if (t.steps[i].screenshot_ref) return *t.steps[i].screenshot_ref;
  return "frame://" + t.trajectory_id + "/" + std::to_string(i);
}

inline AgentContext context_for_step(const Trajectory& t, std::size_t i, const ToolLibrary& pool, int history_n) {
  AgentContext ctx;
  std::vector<ToolDefinition> listed;
  for (const auto& tool : pool.tools) {
    if (tool.name != k_terminate_tool) listed.push_back(tool);
  }
  ctx.system_prompt = listed.empty() ? build_system_prompt("", PromptMode::gui_only)
                                     : build_system_prompt(render_tool_list(listed), PromptMode::with_tools);
  ctx.instruction = t.goal;
  ctx.history_n = history_n;
  for (std::size_t j = 0; j < i; ++j) {
    ctx.actions.push_back(t.steps[j].action_text);
    ctx.responses.push_back(render_model_output(turn_for_step(t.steps[j])));
    ctx.screenshots.push_back(step_screenshot(t, j));
    ctx.tool_calling_results.push_back(j == 0 ? std::string(k_default_tool_result) : tool_result_text(t.steps[j - 1]));
  }
  ctx.current_screenshot = step_screenshot(t, i);
  ctx.current_result = i == 0 ? std::string(k_default_tool_result) : tool_result_text(t.steps[i - 1]);
  return ctx;
}

inline Json critical_record(const InterleavedVariant& v, const CriticalStep& c, int history_n = 5) {
  const Trajectory& t = v.trajectory;
  const auto ctx = context_for_step(t, c.step_index, v.pool, history_n);
  const ParsedTurn gold = turn_for_step(t.steps[c.step_index]);
  Json pool = Json::array();
  for (const auto& tool : v.pool.tools) pool.push_back(tool.name);
  Json j = Json::object();
  j["schema_version"] = k_schema_version;
  j["trajectory_id"] = t.trajectory_id;
  j["step_index"] = c.step_index;
  j["direction"] = std::string(to_string(c.direction));
  j["messages"] = to_json(build_messages(ctx));
  j["gold"] = Json{{"action_text", gold.action_text}, {"name", gold.function_name}, {"arguments", gold.arguments}};
  j["gold_response"] = render_model_output(gold);
  j["tool_pool"] = std::move(pool);
  return j;
}

inline std::vector<Json> extract_critical_dataset(const std::vector<InterleavedVariant>& variants, int history_n = 5) {
  std::vector<Json> out;
  for (const auto& v : variants) {
    for (const auto& c : v.critical_steps) out.push_back(critical_record(v, c, history_n));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Worker pool
// ---------------------------------------------------------------------------

// Runs fn(i) for i in [0, n) on up to `jobs` threads. Results are written by
// index, so output order never depends on scheduling.
inline void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, jobs)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(n);
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace toolcua
