#pragma once

#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "toolcua/common.hpp"
#include "toolcua/prompt_templates.hpp"

namespace toolcua {

inline constexpr std::string_view k_terminate_tool = "terminate";
inline constexpr std::string_view k_computer_use = "computer_use";

struct ParameterSpec {
  std::string description;
  Json type;  // one of parameter_types() when well-formed
};

// A synthesized tool. Enumerated fields stay as raw strings so that an
// LLM-proposed definition with bad values is still representable and can be
// reported on by validate_tool().
struct ToolDefinition {
  std::string name;
  std::string description;
  std::optional<std::string> granularity;  // "fine" | "coarse"
  std::vector<std::pair<std::string, ParameterSpec>> parameters;
  bool has_parameters_field = true;
  Json returns = Json::object();
  std::string category;
  std::vector<std::string> side_effects;
  // Height of the merge-tree node this tool was synthesized from; absent for
  // tools proposed directly by library synthesis.
  std::optional<int> merge_level;

  const ParameterSpec* find_parameter(std::string_view pname) const {
    for (const auto& [n, spec] : parameters) {
      if (n == pname) return &spec;
    }
    return nullptr;
  }
};

struct ToolLibrary {
  std::vector<ToolDefinition> tools;
  std::string provenance;  // source trajectory_id
  std::string round_tag;

  const ToolDefinition* find(std::string_view tool_name) const {
    for (const auto& t : tools) {
      if (t.name == tool_name) return &t;
    }
    return nullptr;
  }
  bool contains(std::string_view tool_name) const { return find(tool_name) != nullptr; }
};

struct LibraryBounds {
  int min_fine = 0;
  int min_coarse = 0;
  int max_tools = 15;
  int min_tools = 5;
};

inline const std::vector<std::string>& parameter_types() {
  static const std::vector<std::string> kTypes = {"string", "number", "boolean", "array", "object", "null"};
  return kTypes;
}

inline const std::vector<std::string>& tool_categories() {
  static const std::vector<std::string> kCategories = {"navigation", "interaction", "extraction",
                                                        "filesystem", "system", "terminate"};
  return kCategories;
}

// The returns block every tool must carry.
inline Json canonical_returns() {
  Json r = Json::object();
  r["success"] = Json{{"type", "boolean"}};
  r["result"] = Json{{"type", Json::array({"string", "object", "null"})}};
  r["error_message"] = Json{{"type", Json::array({"string", "null"})}};
  return r;
}

inline constexpr std::string_view k_tool_meta_schema = R"META({
  "type": "object",
  "required": ["name", "description", "returns", "category", "side_effects"],
  "properties": {
    "name": {"type": "string", "pattern": "^[a-z][a-z0-9_]*$"},
    "description": {"type": "string", "minLength": 1},
    "granularity": {"enum": ["fine", "coarse"], "note": "required for every tool except terminate; terminate may omit it, otherwise it must be coarse"},
    "parameters": {
      "type": "object",
      "additionalProperties": {
        "type": "object",
        "required": ["description", "type"],
        "properties": {
          "description": {"type": "string"},
          "type": {"enum": ["string", "number", "boolean", "array", "object", "null"]}
        }
      },
      "note": "terminate declares no parameters"
    },
    "returns": {
      "type": "object",
      "required": ["success", "result", "error_message"],
      "additionalProperties": false,
      "properties": {
        "success": {"type": "boolean"},
        "result": {"type": ["string", "object", "null"]},
        "error_message": {"type": ["string", "null"]}
      }
    },
    "category": {"enum": ["navigation", "interaction", "extraction", "filesystem", "system", "terminate"]},
    "side_effects": {"type": "array", "items": {"type": "string"}}
  }
})META";

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

inline Json to_json(const ToolDefinition& tool) {
  Json j = Json::object();
  j["name"] = tool.name;
  j["description"] = tool.description;
  if (tool.granularity) j["granularity"] = *tool.granularity;
  if (tool.has_parameters_field) {
    Json params = Json::object();
    for (const auto& [pname, spec] : tool.parameters) {
      params[pname] = Json{{"description", spec.description}, {"type", spec.type}};
    }
    j["parameters"] = std::move(params);
  }
  j["returns"] = tool.returns;
  j["category"] = tool.category;
  j["side_effects"] = tool.side_effects;
  if (tool.merge_level) j["merge_level"] = *tool.merge_level;
  return j;
}

// Lenient: anything that is an object parses, and shape problems surface
// through validate_tool() instead of exceptions.
inline ToolDefinition parse_tool(const Json& j) {
  if (!j.is_object()) throw ParseError("tool definition must be an object");
  ToolDefinition t;
  t.name = detail::string_or_empty(j, "name");
  t.description = detail::string_or_empty(j, "description");
  if (auto it = j.find("granularity"); it != j.end() && !it->is_null()) {
    t.granularity = it->is_string() ? it->get<std::string>() : it->dump();
  }
  if (auto it = j.find("parameters"); it != j.end() && !it->is_null()) {
    if (it->is_object()) {
      for (auto p = it->begin(); p != it->end(); ++p) {
        ParameterSpec spec;
        if (p.value().is_object()) {
          spec.description = detail::string_or_empty(p.value(), "description");
          if (auto ty = p.value().find("type"); ty != p.value().end()) spec.type = *ty;
        }
        t.parameters.emplace_back(p.key(), std::move(spec));
      }
    }
  } else {
    t.has_parameters_field = false;
  }
  if (auto it = j.find("returns"); it != j.end()) t.returns = *it;
  else t.returns = nullptr;
  t.category = detail::string_or_empty(j, "category");
  if (auto it = j.find("side_effects"); it != j.end() && it->is_array()) {
    for (const auto& s : *it) {
      if (s.is_string()) t.side_effects.push_back(s.get<std::string>());
    }
  }
  if (auto it = j.find("merge_level"); it != j.end() && it->is_number_integer()) {
    t.merge_level = it->get<int>();
  }
  return t;
}

inline std::string canonical_tool_text(const ToolDefinition& tool) { return to_json(tool).dump(2); }

inline Json to_json(const ToolLibrary& lib) {
  Json tools = Json::array();
  for (const auto& t : lib.tools) tools.push_back(to_json(t));
  Json j = Json::object();
  j["tools"] = std::move(tools);
  j["provenance"] = lib.provenance;
  j["round_tag"] = lib.round_tag;
  return j;
}

inline ToolLibrary parse_library(const Json& j) {
  ToolLibrary lib;
  const Json& tools = detail::require(j, "tools", "tool library");
  if (!tools.is_array()) throw ParseError("tool library: 'tools' must be an array");
  for (const auto& t : tools) lib.tools.push_back(parse_tool(t));
  lib.provenance = detail::string_or_empty(j, "provenance");
  lib.round_tag = detail::string_or_empty(j, "round_tag");
  return lib;
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

namespace detail {

inline bool matches_name_pattern(std::string_view name) {
  if (name.empty() || !(name[0] >= 'a' && name[0] <= 'z')) return false;
  return std::all_of(name.begin(), name.end(), [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_';
  });
}

inline std::vector<std::string> name_tokens(std::string_view name) {
  std::vector<std::string> tokens;
  std::string cur;
  for (char c : name) {
    if (c == '_' || c == '-' || c == '.' || c == ' ') {
      if (!cur.empty()) tokens.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
  }
  if (!cur.empty()) tokens.push_back(std::move(cur));
  return tokens;
}

inline bool contains_token_run(const std::vector<std::string>& tokens, const std::vector<std::string>& run) {
  if (run.size() > tokens.size()) return false;
  for (std::size_t i = 0; i + run.size() <= tokens.size(); ++i) {
    if (std::equal(run.begin(), run.end(), tokens.begin() + static_cast<std::ptrdiff_t>(i))) return true;
  }
  return false;
}

inline bool is_type_name(const Json& type) {
  if (!type.is_string()) return false;
  const auto& names = parameter_types();
  return std::find(names.begin(), names.end(), type.get<std::string>()) != names.end();
}

}  // namespace detail

// Tools whose effect is waiting. Also used by trajectory generation to reject
// back-to-back wait calls.
inline bool is_wait_like_name(std::string_view name) {
  const auto tokens = detail::name_tokens(name);
  for (const auto& tok : tokens) {
    if (tok == "wait" || tok == "sleep" || tok == "delay") return true;
  }
  return detail::contains_token_run(tokens, {"get", "ui", "tree"});
}

inline ValidationReport validate_tool(const ToolDefinition& tool) {
  ValidationReport out;
  auto add = [&](std::string code, std::string detail = {}) {
    out.push_back({std::move(code), std::move(detail), std::nullopt});
  };

  const bool is_terminate_name = tool.name == k_terminate_tool;

  if (!detail::matches_name_pattern(tool.name)) add("name not lowercase_with_underscores", tool.name);
  if (is_wait_like_name(tool.name)) add("forbidden wait-like tool", tool.name);

  static const std::set<std::string, std::less<>> kVague = {"open_file", "set_option", "click_button", "edit_content"};
  static const std::set<std::string, std::less<>> kLowLevel = {"click_element", "input_text", "scroll_down",
                                                               "tap_coordinates"};
  if (kVague.contains(tool.name)) add("vague tool name", tool.name);
  if (kLowLevel.contains(tool.name)) add("low-level tool name", tool.name);
  if (!is_terminate_name) {
    const auto tokens = detail::name_tokens(tool.name);
    for (const auto& verb : {"finish", "complete", "end", "stop"}) {
      if (detail::contains_token_run(tokens, {verb, "task"})) {
        add("task-ending semantics outside terminate", tool.name);
        break;
      }
    }
  }

  if (tool.name == k_computer_use) add("reserved tool name", tool.name);
  if (tool.description.empty()) add("missing description");

  if (is_terminate_name) {
    if (tool.granularity && *tool.granularity != "coarse") add("terminate granularity must be coarse", *tool.granularity);
    if (!tool.parameters.empty()) add("terminate must not declare parameters");
  } else if (!tool.granularity) {
    add("missing granularity");
  } else if (*tool.granularity != "fine" && *tool.granularity != "coarse") {
    add("invalid granularity", *tool.granularity);
  }

  for (const auto& [pname, spec] : tool.parameters) {
    if (!detail::is_type_name(spec.type)) add("invalid parameter type", pname + ": " + spec.type.dump());
    if (spec.description.empty()) add("missing parameter description", pname);
  }

  bool returns_ok = tool.returns.is_object() && tool.returns.size() == 3 && tool.returns.contains("success") &&
                    tool.returns.contains("result") && tool.returns.contains("error_message");
  if (!returns_ok) {
    add("returns fields mismatch", tool.returns.dump());
  } else {
    const Json& success = tool.returns["success"];
    if (!success.is_object() || success.value("type", Json()) != Json("boolean")) {
      add("returns success must be boolean", success.dump());
    }
  }

  const auto& cats = tool_categories();
  if (std::find(cats.begin(), cats.end(), tool.category) == cats.end()) {
    add("invalid category", tool.category);
  } else if ((tool.category == "terminate") != is_terminate_name) {
    add("terminate category mismatch", tool.name + " / " + tool.category);
  }
  return out;
}

// Library-level verdict. The report is sorted, so it does not depend on the
// order tools appear in.
inline ValidationReport validate_library(const ToolLibrary& lib, const LibraryBounds& bounds) {
  if (bounds.min_tools < 1 || bounds.max_tools < 1 || bounds.min_fine < 0 || bounds.min_coarse < 0) {
    throw std::invalid_argument("validate_library: bounds must be positive");
  }
  if (bounds.min_tools > bounds.max_tools) throw std::invalid_argument("validate_library: min_tools > max_tools");

  ValidationReport out;
  auto add = [&](std::string code, std::string detail = {}) {
    out.push_back({std::move(code), std::move(detail), std::nullopt});
  };

  std::map<std::string, int> name_counts;
  int terminate_named = 0;
  int terminate_category = 0;
  int non_terminate = 0;
  int fine = 0;
  int coarse = 0;
  for (const auto& tool : lib.tools) {
    for (auto v : validate_tool(tool)) {
      v.detail = tool.name + ": " + v.code + (v.detail.empty() ? "" : " (" + v.detail + ")");
      v.code = "invalid tool";
      out.push_back(std::move(v));
    }
    ++name_counts[tool.name];
    if (tool.name == k_terminate_tool) ++terminate_named;
    if (tool.category == "terminate") ++terminate_category;
    if (tool.name != k_terminate_tool) {
      ++non_terminate;
      if (tool.granularity == "fine") ++fine;
      if (tool.granularity == "coarse") ++coarse;
    }
  }
  for (const auto& [name, count] : name_counts) {
    if (count > 1) add("duplicate tool name", name);
  }
  if (terminate_named == 0) add("missing terminate tool");
  if (terminate_named > 1) add("multiple terminate tools", std::to_string(terminate_named));
  if (terminate_category > 1) add("multiple terminate-category tools", std::to_string(terminate_category));
  if (non_terminate < bounds.min_tools) {
    add("too few tools", std::to_string(non_terminate) + " < " + std::to_string(bounds.min_tools));
  }
  if (non_terminate > bounds.max_tools) {
    add("too many tools", std::to_string(non_terminate) + " > " + std::to_string(bounds.max_tools));
  }
  if (fine < bounds.min_fine) {
    add("insufficient fine-grained tools", std::to_string(fine) + " < " + std::to_string(bounds.min_fine));
  }
  if (coarse < bounds.min_coarse) {
    add("insufficient coarse-grained tools", std::to_string(coarse) + " < " + std::to_string(bounds.min_coarse));
  }
  std::sort(out.begin(), out.end());
  return out;
}

// Checks a call's arguments against a tool's parameter map. Every declared
// parameter must be supplied and no undeclared one may appear.
inline std::vector<std::string> check_arguments(const ToolDefinition& tool, const Json& args) {
  std::vector<std::string> problems;
  if (!args.is_object()) {
    problems.push_back("arguments must be an object");
    return problems;
  }
  for (auto it = args.begin(); it != args.end(); ++it) {
    const ParameterSpec* spec = tool.find_parameter(it.key());
    if (!spec) {
      problems.push_back("unexpected argument '" + it.key() + "'");
      continue;
    }
    if (!spec->type.is_string()) continue;
    const auto ty = spec->type.get<std::string>();
    const Json& v = it.value();
    bool ok = (ty == "string" && v.is_string()) || (ty == "number" && v.is_number()) ||
              (ty == "boolean" && v.is_boolean()) || (ty == "array" && v.is_array()) ||
              (ty == "object" && v.is_object()) || (ty == "null" && v.is_null());
    if (!ok) problems.push_back("argument '" + it.key() + "' is not of type " + ty);
  }
  for (const auto& [pname, spec] : tool.parameters) {
    if (!args.contains(pname)) problems.push_back("missing argument '" + pname + "'");
  }
  return problems;
}

inline std::string format_violations(const ValidationReport& violations) {
  std::string out;
  for (const auto& v : violations) {
    if (!out.empty()) out.push_back('\n');
    out += "- " + describe(v);
  }
  return out;
}

// Fills the fix-tool prompt for one invalid tool.
inline std::string build_repair_request(const ToolDefinition& tool, const ValidationReport& violations) {
  if (violations.empty()) throw std::invalid_argument("nothing to repair");
  const std::string tool_text = canonical_tool_text(tool);
  const std::string errors = format_violations(violations);
  return format_named(prompts::k_fix_tool, [&](std::string_view name) -> std::string {
    if (name == "tool") return tool_text;
    if (name == "error_msg") return errors;
    if (name == "meta_schema") return std::string(k_tool_meta_schema);
    throw ParseError("unbound placeholder: " + std::string(name));
  });
}

}  // namespace toolcua
