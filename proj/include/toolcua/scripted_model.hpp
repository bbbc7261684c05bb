#pragma once

#include <algorithm>
#include <cctype>
#include <memory>
#include <string>
#include <vector>

#include "toolcua/common.hpp"
#include "toolcua/llm_client.hpp"
#include "toolcua/tool_schema.hpp"

namespace toolcua {

// A deterministic stand-in for the multimodal model. It answers every
// pipeline template by reading its bindings, so a full run works offline
// and can be recorded into a cache like a live run.
//
// A few answers are deliberately flawed (a wait-like tool, a tool missing its
// error_message return, prose around JSON, an out-of-order merge tree, a
// low-confidence grounding) so that repair, re-ask and retry paths get
// exercised on ordinary corpora.
class ScriptedModel {
 public:
  static constexpr std::string_view k_version = "scripted-model-1";

  std::string operator()(const CompletionRequest& req, const std::string& /*prompt*/) const {
    switch (req.template_id) {
      case TemplateId::screenshot_description: return describe(req);
      case TemplateId::tool_generation: return tool_generation(req);
      case TemplateId::fix_tool: return fix_tool(req);
      case TemplateId::joint_generation: return joint_generation(req);
      case TemplateId::predict_screenshot: return predict(req);
      case TemplateId::describe_and_locate: return locate(req);
      case TemplateId::merge_tree_planning: return plan(req);
      case TemplateId::bottom_up_merge: return merge(req);
    }
    return "{}";
  }

 private:
  static const std::string& get(const CompletionRequest& req, const std::string& key) {
    static const std::string kEmpty;
    auto it = req.bindings.find(key);
    return it == req.bindings.end() ? kEmpty : it->second;
  }

  static std::uint64_t h(std::string_view s) { return splitmix64(fnv1a64(s)); }

  static std::string app_for(std::string_view goal) {
    std::string lower(goal);
    std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
    for (const char* app : {"chrome", "libreoffice", "vscode", "gimp", "thunderbird", "vlc", "terminal"}) {
      if (lower.find(app) != std::string::npos) return app;
    }
    if (lower.find("writer") != std::string::npos || lower.find("calc") != std::string::npos) return "libreoffice";
    return "general";
  }

  static Json tool(const std::string& name, const std::string& desc, const char* granularity, const char* category,
                   bool with_target) {
    Json t = Json::object();
    t["name"] = name;
    t["description"] = desc;
    t["granularity"] = granularity;
    t["parameters"] = Json::object();
    if (with_target) t["parameters"]["target"] = Json{{"description", "What the action applies to"}, {"type", "string"}};
    t["returns"] = canonical_returns();
    t["category"] = category;
    t["side_effects"] = Json::array();
    return t;
  }

  static std::string describe(const CompletionRequest& req) {
    const std::string ref = req.image_refs.empty() ? std::string("unknown") : req.image_refs.front();
    static const char* kViews[] = {"a document editor", "a browser window", "a settings dialog", "a file manager"};
    return "The screenshot " + ref + " shows " + kViews[h(ref) % 4] +
           " in the foreground. The main toolbar is visible at the top. No modal dialog blocks the window.";
  }

  static std::string tool_generation(const CompletionRequest& req) {
    const std::string& goal = get(req, "goal");
    const std::string app = app_for(goal);
    const int fine = std::stoi(get(req, "min_fine_grained_tools"));
    const int coarse = std::stoi(get(req, "min_coarse_grained_tools"));
    static const char* kFine[] = {"open_panel", "select_item", "apply_setting", "enter_value",
                                  "confirm_dialog", "search_content", "switch_tab", "copy_selection"};
    static const char* kCoarse[] = {"prepare_export", "configure_preferences", "organize_files",
                                    "compose_message", "fill_form_section", "review_changes"};
    Json tools = Json::array();
    for (int i = 0; i < fine; ++i) {
      const std::string verb = kFine[i % 8];
      tools.push_back(tool(app + "_" + verb, "Focused action: " + verb + " in " + app + ".", "fine", "interaction",
                           i % 3 != 2));
    }
    for (int i = 0; i < coarse; ++i) {
      const std::string verb = kCoarse[i % 6];
      tools.push_back(tool(app + "_" + verb, "Workflow: " + verb + " in " + app + ".", "coarse", "navigation",
                           i % 2 == 0));
    }
    const auto fault = h(goal) % 4;
    if (fault == 0) tools.push_back(tool("Wait_For_Page", "Wait until the page finishes loading.", "fine", "system", false));
    if (fault == 1) {
      Json broken = tool(app + "_extract_field", "Read the value of a field.", "fine", "extraction", true);
      broken["returns"].erase("error_message");
      tools.push_back(broken);
    }
    Json term = Json::object();
    term["name"] = "terminate";
    term["description"] = "End the task and report whether it was completed.";
    term["parameters"] = Json::object();
    term["returns"] = canonical_returns();
    term["category"] = "terminate";
    term["side_effects"] = Json::array();
    tools.push_back(term);
    return Json{{"tools", tools}}.dump(2);
  }

  // Fixes what can be fixed mechanically; wait-like names cannot be.
  static std::string fix_tool(const CompletionRequest& req) {
    Json t;
    try {
      t = Json::parse(get(req, "tool"));
    } catch (const Json::parse_error&) {
      return "I could not read the tool.";
    }
    std::string name = t.value("name", "");
    for (auto& c : name) {
      c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
      if (!((c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_')) c = '_';
    }
    if (name.empty() || !(name[0] >= 'a' && name[0] <= 'z')) name = "general_" + name;
    t["name"] = name;
    t["returns"] = canonical_returns();
    if (name != "terminate") {
      const auto g = t.value("granularity", "");
      if (g != "fine" && g != "coarse") t["granularity"] = "fine";
    }
    static const std::vector<std::string> kCats = tool_categories();
    const auto cat = t.value("category", "");
    if (std::find(kCats.begin(), kCats.end(), cat) == kCats.end()) t["category"] = "interaction";
    if (!t.contains("description") || t["description"] == "") t["description"] = "Repaired tool " + name + ".";
    if (!t.contains("side_effects")) t["side_effects"] = Json::array();
    return "```json\n" + t.dump(2) + "\n```";
  }

  static std::size_t count_history(const std::string& history) {
    if (history == "None") return 0;
    std::size_t n = 0;
    for (std::size_t pos = history.find("Step "); pos != std::string::npos; pos = history.find("Step ", pos + 5)) ++n;
    return n;
  }

  static std::string joint_generation(const CompletionRequest& req) {
    Json tools;
    try {
      tools = Json::parse(get(req, "tools"));
    } catch (const Json::parse_error&) {
      return "no tools";
    }
    std::vector<Json> usable;
    for (const auto& t : tools) {
      const auto name = t.value("name", "");
      if (name != "terminate" && !is_wait_like_name(name)) usable.push_back(t);
    }
    if (usable.empty()) return "no usable tools";
    const std::string& history = get(req, "history");
    const std::size_t step = count_history(history);
    const std::string& goal = get(req, "goal");
    // A rambling first answer now and then, to exercise the re-ask path.
    if (req.attempt == 0 && h(goal + "#" + std::to_string(step)) % 13 == 5) {
      return "Let me think about which tool fits best here before answering.";
    }
    const Json& chosen = usable[(step + req.attempt + h(goal) % 5) % usable.size()];
    const std::string name = chosen["name"].get<std::string>();
    Json params = Json::object();
    if (chosen.contains("parameters") && chosen["parameters"].is_object()) {
      for (auto it = chosen["parameters"].begin(); it != chosen["parameters"].end(); ++it) {
        const auto ty = it.value().value("type", "string");
        if (ty == "number") params[it.key()] = static_cast<int>(step + 1);
        else if (ty == "boolean") params[it.key()] = true;
        else params[it.key()] = "item " + std::to_string(step + 1);
      }
    }
    Json out = Json::object();
    out["observation"] = get(req, "screenshot_description");
    out["thought"] = "The next sub-goal can be handled by " + name + ", which moves the task forward.";
    out["action"] = "Use " + name + " for the next sub-goal.";
    out["tool_call"] = Json{{"tool_name", name}, {"tool_parameters", params}};
    out["tool_response"] = Json{{"success", true}, {"result", name + " completed"}, {"error_message", nullptr}};
    const std::string body = out.dump(2);
    if (h(goal) % 3 == 0) return "Here is the step:\n```json\n" + body + "\n```";
    return body;
  }

  static std::string predict(const CompletionRequest& req) {
    return "After " + get(req, "tool_name") + " runs, the window reflects the requested change. The affected panel "
           "now shows the updated content. No error message is visible.";
  }

  static std::string locate(const CompletionRequest& req) {
    const int n = std::stoi(get(req, "num_candidates"));
    const std::string key = get(req, "tool_name") + get(req, "tool_parameters") +
                            (req.image_refs.empty() ? std::string() : req.image_refs.front());
    const auto hv = h(key);
    const int span = 1 + static_cast<int>(hv % static_cast<std::uint64_t>(std::min(n, 3)));
    Json out = Json::object();
    out["current_description"] = "The screen before running " + get(req, "tool_name") + ".";
    if (req.attempt == 0 && hv % 9 == 4) {
      out["matched_index"] = nullptr;
      out["confidence"] = "none";
      out["reason"] = "None of the candidates clearly shows the post-action state.";
    } else {
      out["matched_index"] = span;
      out["confidence"] = hv % 2 ? "high" : "medium";
      out["reason"] = "The candidate shows the state the action would produce.";
    }
    return out.dump(2);
  }

  static Json group(std::vector<Json> kids, const std::string& summary) {
    return Json{{"summary", summary}, {"children", std::move(kids)}};
  }

  // Greedy pairing into chunks of 2 (a trailing 3 when it fits), one or two levels.
  static std::vector<Json> pair_up(const std::vector<Json>& items, int max_b, const std::string& label) {
    std::vector<Json> out;
    std::size_t i = 0;
    while (i < items.size()) {
      const std::size_t left = items.size() - i;
      if (left == 1) {
        out.push_back(items[i]);
        break;
      }
      const std::size_t take = (left == 3 && max_b >= 3) ? 3 : 2;
      std::vector<Json> kids(items.begin() + static_cast<std::ptrdiff_t>(i),
                             items.begin() + static_cast<std::ptrdiff_t>(i + take));
      out.push_back(group(std::move(kids), label + " " + std::to_string(out.size() + 1)));
      i += take;
    }
    return out;
  }

  static std::string plan(const CompletionRequest& req) {
    const int n = std::stoi(get(req, "max_leaf_index")) + 1;
    const int b = std::stoi(get(req, "max_branching_factor"));
    const int levels = std::stoi(get(req, "max_coarse_levels"));
    const std::string& goal = get(req, "goal");
    if (req.attempt == 0 && h(goal) % 5 == 0 && n >= 4) {
      Json bad = group({group({1, 3}, "Out of order"), 0, 2}, "Root");
      for (int i = 4; i < n; ++i) bad["children"].push_back(i);
      return Json{{"tree", bad}}.dump(2);
    }
    std::vector<Json> items;
    std::size_t start = 0;
    if (h(goal) % 3 == 1 && n >= 3) {
      items.push_back(0);
      start = 1;
    }
    std::vector<Json> rest;
    for (int i = static_cast<int>(start); i < n; ++i) rest.push_back(i);
    for (auto& node : pair_up(rest, b, "Sub-goal")) items.push_back(node);
    if (levels >= 2) {
      std::vector<Json> internals;
      std::vector<Json> top;
      std::size_t first_internal = 0;
      while (first_internal < items.size() && !items[first_internal].is_object()) top.push_back(items[first_internal++]);
      internals.assign(items.begin() + static_cast<std::ptrdiff_t>(first_internal), items.end());
      if (internals.size() >= 2) {
        for (auto& node : pair_up(internals, b, "Stage")) top.push_back(node);
        items = std::move(top);
      }
    }
    return Json{{"tree", group(items, "Complete the task")}}.dump(2);
  }

  static std::string merge(const CompletionRequest& req) {
    const std::string& chunk = get(req, "chunk_summary");
    std::vector<std::string> names;
    const std::string marker = "tool_call: ";
    for (auto pos = chunk.find(marker); pos != std::string::npos; pos = chunk.find(marker, pos + 1)) {
      const auto start = pos + marker.size();
      names.push_back(chunk.substr(start, chunk.find(' ', start) - start));
    }
    const std::string base = names.empty() ? std::string("general_step") : names.front();
    const bool deep = get(req, "target_level").find('2') != std::string::npos;
    const std::string name = base + (deep ? "_routine" : "_sequence");
    Json def = tool(name, "Carry out " + std::to_string(names.size()) + " consecutive sub-goals in one call.", "coarse",
                    "interaction", false);
    Json step = Json::object();
    step["observation"] = "The interface is ready for the combined sub-goal.";
    step["thought"] = "These steps form one coherent sub-goal, so a single broader tool covers them.";
    step["action"] = "Run " + name + " to finish the whole sub-goal.";
    step["tool_call"] = Json{{"tool_name", name}, {"tool_parameters", Json::object()}};
    step["tool_response"] = Json{{"success", true},
                                 {"result", Json{{"completed_steps", names.size()}}},
                                 {"error_message", nullptr}};
    return Json{{"tool_definition", def}, {"merged_step", step}}.dump(2);
  }
};

inline std::shared_ptr<LlmClient> make_scripted_client() {
  return std::make_shared<MockClient>(MockClient::Handler(ScriptedModel{}));
}

}  // namespace toolcua
