#pragma once

#include <string>
#include <vector>

#include "toolcua/common.hpp"
#include "toolcua/prompt_templates.hpp"
#include "toolcua/tool_schema.hpp"
#include "toolcua/traj_model.hpp"

namespace toolcua {

// ---------------------------------------------------------------------------
// Messages
// ---------------------------------------------------------------------------

enum class Role { system, user, assistant };

inline std::string_view to_string(Role r) {
  switch (r) {
    case Role::system: return "system";
    case Role::user: return "user";
    case Role::assistant: return "assistant";
  }
  return "user";
}

struct ContentPart {
  bool is_image = false;
  std::string value;  // text, or image URI

  static ContentPart text(std::string t) { return {false, std::move(t)}; }
  static ContentPart image(std::string uri) { return {true, std::move(uri)}; }

  friend bool operator==(const ContentPart&, const ContentPart&) = default;
};

struct Message {
  Role role = Role::user;
  std::vector<ContentPart> content;

  friend bool operator==(const Message&, const Message&) = default;
};

using MessageSequence = std::vector<Message>;

inline Json to_json(const ContentPart& p) {
  Json j = Json::object();
  if (p.is_image) {
    j["type"] = "image_url";
    j["image_url"] = Json{{"url", p.value}};
  } else {
    j["type"] = "text";
    j["text"] = p.value;
  }
  return j;
}

inline Json to_json(const Message& m) {
  Json parts = Json::array();
  for (const auto& p : m.content) parts.push_back(to_json(p));
  Json j = Json::object();
  j["role"] = std::string(to_string(m.role));
  j["content"] = std::move(parts);
  return j;
}

inline Json to_json(const MessageSequence& messages) {
  Json arr = Json::array();
  for (const auto& m : messages) arr.push_back(to_json(m));
  return arr;
}

inline std::size_t count_images(const MessageSequence& messages) {
  std::size_t n = 0;
  for (const auto& m : messages) {
    for (const auto& p : m.content) n += p.is_image ? 1 : 0;
  }
  return n;
}

// ---------------------------------------------------------------------------
// System prompt
// ---------------------------------------------------------------------------

enum class PromptMode { gui_only, with_tools };

inline constexpr std::string_view k_args_format = "Format the arguments as a JSON object.";

// Same object shape as the built-in computer_use entry.
inline std::string render_tool_signature(const ToolDefinition& tool) {
  Json props = Json::object();
  Json required = Json::array();
  for (const auto& [pname, spec] : tool.parameters) {
    props[pname] = Json{{"description", spec.description}, {"type", spec.type}};
    required.push_back(pname);
  }
  Json fn = Json::object();
  fn["name_for_human"] = tool.name;
  fn["name"] = tool.name;
  fn["description"] = tool.description;
  fn["parameters"] = Json{{"properties", std::move(props)}, {"required", std::move(required)}, {"type", "object"}};
  fn["args_format"] = k_args_format;
  return py_dumps(Json{{"type", "function"}, {"function", std::move(fn)}});
}

// The agent ends episodes through computer_use, so `terminate` is not listed.
inline std::string render_tool_list(const std::vector<ToolDefinition>& tools) {
  std::string out;
  for (const auto& t : tools) {
    if (t.name == k_terminate_tool) continue;
    if (!out.empty()) out.push_back('\n');
    out += render_tool_signature(t);
  }
  return out;
}

inline std::string build_system_prompt(std::string_view tool_list, PromptMode mode) {
  if (mode == PromptMode::with_tools && tool_list.empty()) {
    throw std::invalid_argument("with_tools mode needs a non-empty tool list");
  }
  const std::string_view reminder =
      mode == PromptMode::with_tools ? prompts::k_important_with_tools : prompts::k_important_gui_only;
  return format_named(prompts::k_system_prompt, [&](std::string_view name) -> std::string {
    if (name == "tool_list") return std::string(tool_list);
    if (name == "important_reminder") return std::string(reminder);
    throw std::logic_error("system prompt has unexpected placeholder " + std::string(name));
  });
}

// ---------------------------------------------------------------------------
// Message construction
// ---------------------------------------------------------------------------

inline constexpr std::string_view k_default_tool_result = "Success";

struct AgentContext {
  std::string system_prompt;
  std::string instruction;
  std::vector<std::string> actions;    // action_text per past step
  std::vector<std::string> responses;  // assistant turn per past step
  std::vector<std::string> screenshots;
  std::vector<std::string> tool_calling_results;
  int history_n = 5;
  std::string current_screenshot;
  std::string current_result;
};

inline std::string instruction_prompt(const AgentContext& ctx, std::size_t t0) {
  std::string previous = "None";
  if (t0 > 0) {
    previous.clear();
    for (std::size_t i = 0; i < t0; ++i) {
      if (i) previous.push_back('\n');
      previous += "Step " + std::to_string(i + 1) + ": " + ctx.actions[i];
    }
  }
  return "Please generate the next move according to the UI screenshot, instruction and previous actions.\n\n"
         "Instruction: " +
         ctx.instruction + "\n\nPrevious actions:\n" + previous;
}

inline MessageSequence build_messages(const AgentContext& ctx) {
  const std::size_t T = ctx.actions.size();
  if (ctx.responses.size() != T || ctx.screenshots.size() != T || ctx.tool_calling_results.size() != T) {
    throw std::invalid_argument("inconsistent context lengths: actions=" + std::to_string(T) +
                                " responses=" + std::to_string(ctx.responses.size()) +
                                " screenshots=" + std::to_string(ctx.screenshots.size()) +
                                " results=" + std::to_string(ctx.tool_calling_results.size()));
  }
  if (ctx.history_n < 0) throw std::invalid_argument("history_n must be non-negative");
  const std::size_t hist = static_cast<std::size_t>(ctx.history_n);
  const std::size_t t0 = T > hist ? T - hist : 0;
  const std::string instr = instruction_prompt(ctx, t0);
  auto result_text = [](const std::string& r) { return r.empty() ? std::string(k_default_tool_result) : r; };

  MessageSequence messages;
  messages.push_back({Role::system, {ContentPart::text(ctx.system_prompt)}});

  for (std::size_t i = t0; i < T; ++i) {
    Message user{Role::user, {}};
    if (i == t0) user.content.push_back(ContentPart::text(instr));
    user.content.push_back(ContentPart::text("<tool_response>\n"));
    user.content.push_back(ContentPart::text(result_text(ctx.tool_calling_results[i])));
    user.content.push_back(ContentPart::image(ctx.screenshots[i]));
    user.content.push_back(ContentPart::text("\n</tool_response>"));
    messages.push_back(std::move(user));
    messages.push_back({Role::assistant, {ContentPart::text(ctx.responses[i])}});
  }

  Message current{Role::user, {}};
  if (T == 0 && hist > 0) {
    current.content.push_back(ContentPart::text(instr));
    current.content.push_back(ContentPart::image(ctx.current_screenshot));
  } else {
    if (hist == 0) current.content.push_back(ContentPart::text(instr));
    current.content.push_back(ContentPart::text("<tool_response>\n"));
    current.content.push_back(ContentPart::text(result_text(ctx.current_result)));
    current.content.push_back(ContentPart::image(ctx.current_screenshot));
    current.content.push_back(ContentPart::text("\n</tool_response>"));
  }
  messages.push_back(std::move(current));
  return messages;
}

// ---------------------------------------------------------------------------
// Model output grammar
// ---------------------------------------------------------------------------

class FormatError : public ParseError {
 public:
  using ParseError::ParseError;
};

struct ParsedTurn {
  std::string action_text;
  std::string function_name;
  Json arguments = Json::object();

  friend bool operator==(const ParsedTurn&, const ParsedTurn&) = default;
};

struct ParseOptions {
  // When set, function names outside this list (and computer_use) are rejected.
  const std::vector<std::string>* tool_pool = nullptr;
  bool lenient = false;  // accept action=answer
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

inline std::size_t count_occurrences(std::string_view hay, std::string_view needle) {
  std::size_t n = 0;
  for (auto pos = hay.find(needle); pos != std::string_view::npos; pos = hay.find(needle, pos + needle.size())) ++n;
  return n;
}

}  // namespace detail

inline constexpr std::string_view k_tool_call_open = "<tool_call>";
inline constexpr std::string_view k_tool_call_close = "</tool_call>";

inline ParsedTurn parse_model_output(std::string_view raw, const ParseOptions& options = {}) {
  const std::string_view text = detail::trim(raw);
  const auto opens = detail::count_occurrences(text, k_tool_call_open);
  const auto closes = detail::count_occurrences(text, k_tool_call_close);
  if (opens == 0) throw FormatError("no <tool_call> block");
  if (opens > 1 || closes > 1) throw FormatError("multiple <tool_call> blocks");
  if (closes == 0) throw FormatError("unterminated <tool_call> block");
  const auto open = text.find(k_tool_call_open);
  const auto close = text.find(k_tool_call_close);
  if (close < open) throw FormatError("misordered <tool_call> tags");
  if (!detail::trim(text.substr(close + k_tool_call_close.size())).empty()) {
    throw FormatError("text after </tool_call>");
  }

  const std::string_view head = detail::trim(text.substr(0, open));
  constexpr std::string_view kAction = "Action:";
  if (head.substr(0, kAction.size()) != kAction) throw FormatError("missing Action line");
  const std::string_view action = detail::trim(head.substr(kAction.size()));
  if (action.empty()) throw FormatError("empty Action line");
  if (action.find('\n') != std::string_view::npos) throw FormatError("Action must be a single line");
  if (action.find(kAction) != std::string_view::npos) throw FormatError("multiple Action lines");

  const std::string_view payload = detail::trim(text.substr(open + k_tool_call_open.size(), close - open - k_tool_call_open.size()));
  Json call;
  try {
    call = Json::parse(payload);
  } catch (const Json::parse_error& e) {
    throw FormatError(std::string("malformed tool_call payload: ") + e.what());
  }
  if (!call.is_object() || call.size() != 2 || !call.contains("name") || !call.contains("arguments")) {
    throw FormatError("tool_call payload must have exactly name and arguments");
  }
  if (!call["name"].is_string()) throw FormatError("tool_call name must be a string");
  if (!call["arguments"].is_object()) throw FormatError("tool_call arguments must be an object");

  ParsedTurn turn;
  turn.action_text = std::string(action);
  turn.function_name = call["name"].get<std::string>();
  turn.arguments = call["arguments"];

  if (turn.function_name == k_computer_use) {
    auto it = turn.arguments.find("action");
    if (it == turn.arguments.end() || !it->is_string()) throw FormatError("computer_use call without action");
    const std::string normalized(normalize_action_name(it->get<std::string>()));
    if (normalized == "answer" && !options.lenient) throw FormatError("answer action not in enum");
    try {
      parse_gui_kind(normalized);
    } catch (const ParseError& e) {
      throw FormatError(e.what());
    }
    *it = normalized;
  } else if (options.tool_pool) {
    const auto& pool = *options.tool_pool;
    if (std::find(pool.begin(), pool.end(), turn.function_name) == pool.end()) {
      throw FormatError("unknown function: " + turn.function_name);
    }
  }
  return turn;
}

inline std::string render_model_output(const ParsedTurn& turn) {
  Json call = Json::object();
  call["name"] = turn.function_name;
  call["arguments"] = turn.arguments;
  return "Action: " + turn.action_text + "\n" + std::string(k_tool_call_open) + "\n" + py_dumps(call) + "\n" +
         std::string(k_tool_call_close);
}

// computer_use arguments for a GUI action, in the enum's field names.
inline Json gui_arguments(const GuiAction& a) {
  Json args = Json::object();
  args["action"] = std::string(to_string(a.kind));
  if (a.keys) args["keys"] = *a.keys;
  if (a.text) args["text"] = *a.text;
  if (a.coordinate) args["coordinate"] = Json::array({(*a.coordinate)[0], (*a.coordinate)[1]});
  if (a.pixels) args["pixels"] = *a.pixels;
  if (a.time) args["time"] = *a.time;
  if (a.status) args["status"] = std::string(to_string(*a.status));
  return args;
}

// The assistant turn that would have produced `step`. A terminate tool call
// is rendered as the GUI terminate action.
inline ParsedTurn turn_for_step(const Step& step) {
  ParsedTurn turn;
  turn.action_text = step.action_text;
  if (const auto* g = std::get_if<GuiAction>(&step.action)) {
    turn.function_name = std::string(k_computer_use);
    turn.arguments = gui_arguments(*g);
  } else {
    const auto& call = std::get<ToolCallAction>(step.action);
    if (call.tool_name == k_terminate_tool) {
      turn.function_name = std::string(k_computer_use);
      turn.arguments = Json{{"action", "terminate"}, {"status", "success"}};
    } else {
      turn.function_name = call.tool_name;
      turn.arguments = call.arguments;
    }
  }
  return turn;
}

// Text the agent sees after executing `step`.
inline std::string tool_result_text(const Step& step) {
  if (is_tool_call(step.action) && step.tool_response && !is_terminate(step.action)) {
    return py_dumps(to_json(*step.tool_response));
  }
  return std::string(k_default_tool_result);
}

}  // namespace toolcua
