#pragma once

#include <atomic>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "toolcua/common.hpp"
#include "toolcua/prompt_templates.hpp"

namespace toolcua {

// ---------------------------------------------------------------------------
// Templates
// ---------------------------------------------------------------------------

enum class TemplateId {
  screenshot_description,
  tool_generation,
  fix_tool,
  joint_generation,
  predict_screenshot,
  describe_and_locate,
  merge_tree_planning,
  bottom_up_merge,
};

inline constexpr std::array<std::pair<TemplateId, std::string_view>, 8> k_template_names = {{
    {TemplateId::screenshot_description, "screenshot_description"},
    {TemplateId::tool_generation, "tool_generation"},
    {TemplateId::fix_tool, "fix_tool"},
    {TemplateId::joint_generation, "joint_generation"},
    {TemplateId::predict_screenshot, "predict_screenshot"},
    {TemplateId::describe_and_locate, "describe_and_locate"},
    {TemplateId::merge_tree_planning, "merge_tree_planning"},
    {TemplateId::bottom_up_merge, "bottom_up_merge"},
}};

inline std::string_view to_string(TemplateId id) {
  for (const auto& [t, name] : k_template_names) {
    if (t == id) return name;
  }
  return "unknown";
}

inline TemplateId parse_template_id(std::string_view name) {
  for (const auto& [t, n] : k_template_names) {
    if (n == name) return t;
  }
  throw std::invalid_argument("unknown template: " + std::string(name));
}

inline std::string_view template_body(TemplateId id) {
  switch (id) {
    case TemplateId::screenshot_description: return prompts::k_screenshot_description;
    case TemplateId::tool_generation: return prompts::k_tool_generation;
    case TemplateId::fix_tool: return prompts::k_fix_tool;
    case TemplateId::joint_generation: return prompts::k_joint_generation;
    case TemplateId::predict_screenshot: return prompts::k_predict_screenshot;
    case TemplateId::describe_and_locate: return prompts::k_describe_and_locate;
    case TemplateId::merge_tree_planning: return prompts::k_merge_tree_planning;
    case TemplateId::bottom_up_merge: return prompts::k_bottom_up_merge;
  }
  throw std::invalid_argument("unknown template id");
}

using Bindings = std::map<std::string, std::string>;

inline std::string render_prompt(TemplateId id, const Bindings& bindings) {
  return format_named(template_body(id), [&](std::string_view name) -> std::string {
    auto it = bindings.find(std::string(name));
    if (it == bindings.end()) throw std::invalid_argument("unbound placeholder: " + std::string(name));
    return it->second;
  });
}

inline std::string render_prompt(std::string_view template_name, const Bindings& bindings) {
  return render_prompt(parse_template_id(template_name), bindings);
}

// ---------------------------------------------------------------------------
// Requests and results
// ---------------------------------------------------------------------------

struct DecodeParams {
  double temperature = 0.8;
  int max_output_tokens = 4096;

  friend bool operator==(const DecodeParams&, const DecodeParams&) = default;
};

// Checking/describing prompts run cool, generative ones warm.
inline DecodeParams default_decode(TemplateId id) {
  switch (id) {
    case TemplateId::fix_tool:
    case TemplateId::describe_and_locate:
    case TemplateId::screenshot_description:
    case TemplateId::predict_screenshot:
      return {0.2, 4096};
    default:
      return {0.8, 4096};
  }
}

struct CompletionRequest {
  TemplateId template_id = TemplateId::screenshot_description;
  Bindings bindings;
  std::vector<std::string> image_refs;
  DecodeParams decode;
  // Re-asks for the same logical request differ only here, so they get
  // their own cache entry instead of replaying the bad answer.
  int attempt = 0;

  static CompletionRequest make(TemplateId id, Bindings b, std::vector<std::string> images = {}) {
    CompletionRequest r;
    r.template_id = id;
    r.bindings = std::move(b);
    r.image_refs = std::move(images);
    r.decode = default_decode(id);
    return r;
  }
};

struct CompletionResult {
  std::string text;
  std::string finish_reason = "stop";
  int prompt_tokens = 0;
  int completion_tokens = 0;

  friend bool operator==(const CompletionResult&, const CompletionResult&) = default;
};

inline Json to_json(const CompletionRequest& r) {
  Json b = Json::object();
  for (const auto& [k, v] : r.bindings) b[k] = v;
  Json j = Json::object();
  j["template_id"] = std::string(to_string(r.template_id));
  j["bindings"] = std::move(b);
  j["image_refs"] = r.image_refs;
  j["temperature"] = r.decode.temperature;
  j["max_output_tokens"] = r.decode.max_output_tokens;
  j["attempt"] = r.attempt;
  return j;
}

inline Json to_json(const CompletionResult& r) {
  Json j = Json::object();
  j["text"] = r.text;
  j["finish_reason"] = r.finish_reason;
  j["prompt_tokens"] = r.prompt_tokens;
  j["completion_tokens"] = r.completion_tokens;
  return j;
}

inline CompletionResult parse_completion_result(const Json& j) {
  CompletionResult r;
  r.text = detail::require_string(j, "text", "completion");
  r.finish_reason = detail::string_or_empty(j, "finish_reason");
  if (auto it = j.find("prompt_tokens"); it != j.end() && it->is_number_integer()) r.prompt_tokens = it->get<int>();
  if (auto it = j.find("completion_tokens"); it != j.end() && it->is_number_integer()) r.completion_tokens = it->get<int>();
  return r;
}

inline constexpr std::string_view k_cache_key_version = "v1";

namespace detail {
inline void append_field(std::string& buf, std::string_view field) {
  buf += std::to_string(field.size());
  buf.push_back(':');
  buf.append(field);
}
}  // namespace detail

// Length-prefixed fields make the digest input unambiguous. Temperature is
// printed with %.17g so any change in the double changes the key.
inline std::string cache_key(const CompletionRequest& r) {
  std::string buf;
  detail::append_field(buf, k_cache_key_version);
  detail::append_field(buf, to_string(r.template_id));
  detail::append_field(buf, std::to_string(r.bindings.size()));
  for (const auto& [k, v] : r.bindings) {
    detail::append_field(buf, k);
    detail::append_field(buf, v);
  }
  detail::append_field(buf, std::to_string(r.image_refs.size()));
  for (const auto& img : r.image_refs) detail::append_field(buf, img);
  char temp[64];
  std::snprintf(temp, sizeof temp, "%.17g", r.decode.temperature);
  detail::append_field(buf, temp);
  detail::append_field(buf, std::to_string(r.decode.max_output_tokens));
  detail::append_field(buf, std::to_string(r.attempt));
  return std::string(k_cache_key_version) + "-" + sha256_hex(buf);
}

// Rough whitespace token count, used only for bookkeeping fields.
inline int count_words(std::string_view text) {
  int n = 0;
  bool in_word = false;
  for (char c : text) {
    const bool space = c == ' ' || c == '\n' || c == '\t' || c == '\r';
    if (!space && !in_word) ++n;
    in_word = !space;
  }
  return n;
}

// ---------------------------------------------------------------------------
// Clients
// ---------------------------------------------------------------------------

class UncachedRequest : public IoError {
 public:
  explicit UncachedRequest(std::string key) : IoError("uncached request: " + key), key_(std::move(key)) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

class TransportError : public IoError {
 public:
  TransportError(const std::string& what, int attempts)
      : IoError(what + " (after " + std::to_string(attempts) + " attempts)"), attempts_(attempts) {}
  int attempts() const { return attempts_; }

 private:
  int attempts_;
};

class LlmClient {
 public:
  virtual ~LlmClient() = default;
  virtual CompletionResult complete(const CompletionRequest& request) = 0;
};

// Returns whatever the handler says. The handler sees the rendered prompt so
// tests can assert on it.
class MockClient : public LlmClient {
 public:
  using Handler = std::function<std::string(const CompletionRequest&, const std::string& prompt)>;

  explicit MockClient(Handler handler) : handler_(std::move(handler)) {}
  explicit MockClient(std::string canned)
      : handler_([text = std::move(canned)](const CompletionRequest&, const std::string&) { return text; }) {}

  CompletionResult complete(const CompletionRequest& request) override {
    const std::string prompt = render_prompt(request.template_id, request.bindings);
    ++calls_;
    CompletionResult r;
    r.text = handler_(request, prompt);
    r.prompt_tokens = count_words(prompt);
    r.completion_tokens = count_words(r.text);
    return r;
  }

  std::size_t calls() const { return calls_.load(); }

 private:
  Handler handler_;
  std::atomic<std::size_t> calls_{0};
};

// Content-addressed store: <dir>/<key>.json holds {key, request, response}.
class ResponseCache {
 public:
  explicit ResponseCache(std::filesystem::path dir) : dir_(std::move(dir)) {}

  const std::filesystem::path& dir() const { return dir_; }

  std::filesystem::path path_for(const std::string& key) const { return dir_ / (key + ".json"); }

  std::optional<CompletionResult> lookup(const std::string& key) const {
    const auto p = path_for(key);
    std::error_code ec;
    if (!std::filesystem::exists(p, ec)) return std::nullopt;
    Json j;
    try {
      j = Json::parse(read_file(p));
    } catch (const Json::parse_error& e) {
      throw IoError("corrupt cache entry " + p.string() + ": " + e.what());
    }
    return parse_completion_result(detail::require(j, "response", "cache entry"));
  }

  void store(const std::string& key, const CompletionRequest& request, const CompletionResult& result) {
    Json j = Json::object();
    j["key"] = key;
    j["request"] = to_json(request);
    j["response"] = to_json(result);
    const std::string body = j.dump(2) + "\n";
    std::lock_guard lock(write_mutex_);
    std::filesystem::create_directories(dir_);
    const auto final_path = path_for(key);
    const auto tmp = dir_ / (key + ".tmp");
    write_file(tmp, body);
    std::filesystem::rename(tmp, final_path);
  }

  // Digest over the sorted entry names; identifies the cache contents for manifests.
  std::string cache_id() const {
    std::vector<std::string> names;
    std::error_code ec;
    if (std::filesystem::is_directory(dir_, ec)) {
      for (const auto& entry : std::filesystem::directory_iterator(dir_)) {
        if (entry.path().extension() == ".json") names.push_back(entry.path().filename().string());
      }
    }
    std::sort(names.begin(), names.end());
    std::string buf;
    for (const auto& n : names) buf += n + "\n";
    return "cache-" + sha256_hex(buf).substr(0, 16) + "-" + std::to_string(names.size());
  }

 private:
  std::filesystem::path dir_;
  std::mutex write_mutex_;
};

enum class CacheMode { record, replay };

class CachingClient : public LlmClient {
 public:
  // `inner` may be null in replay mode.
  CachingClient(std::shared_ptr<ResponseCache> cache, CacheMode mode, std::shared_ptr<LlmClient> inner = nullptr)
      : cache_(std::move(cache)), mode_(mode), inner_(std::move(inner)) {
    if (mode_ == CacheMode::record && !inner_) throw std::invalid_argument("record mode needs an upstream client");
  }

  CompletionResult complete(const CompletionRequest& request) override {
    const std::string key = cache_key(request);
    if (auto hit = cache_->lookup(key)) return *hit;
    if (mode_ == CacheMode::replay) throw UncachedRequest(key);
    CompletionResult result = inner_->complete(request);
    cache_->store(key, request, result);
    return result;
  }

 private:
  std::shared_ptr<ResponseCache> cache_;
  CacheMode mode_;
  std::shared_ptr<LlmClient> inner_;
};

// ---------------------------------------------------------------------------
// Structured output
// ---------------------------------------------------------------------------

namespace detail {

// End offset (exclusive) of the bracketed value starting at `start`, or npos.
inline std::size_t match_bracket(std::string_view text, std::size_t start) {
  int depth = 0;
  bool in_string = false;
  for (std::size_t i = start; i < text.size(); ++i) {
    const char c = text[i];
    if (in_string) {
      if (c == '\\') ++i;
      else if (c == '"') in_string = false;
      continue;
    }
    if (c == '"') in_string = true;
    else if (c == '{' || c == '[') ++depth;
    else if (c == '}' || c == ']') {
      if (--depth == 0) return i + 1;
    }
  }
  return std::string_view::npos;
}

inline std::string strip_code_fences(std::string_view text) {
  const auto open = text.find("```");
  if (open == std::string_view::npos) return std::string(text);
  auto body_start = text.find('\n', open);
  if (body_start == std::string_view::npos) return std::string(text);
  ++body_start;
  const auto close = text.find("```", body_start);
  if (close == std::string_view::npos) return std::string(text.substr(body_start));
  return std::string(text.substr(body_start, close - body_start));
}

}  // namespace detail

// Pulls exactly one top-level object or array out of a model response.
inline Json extract_structured(std::string_view raw) {
  const std::string text = detail::strip_code_fences(raw);
  const auto start = text.find_first_of("{[");
  if (start == std::string::npos) throw ParseError("no structured value in response");
  const auto end = detail::match_bracket(text, start);
  if (end == std::string_view::npos) throw ParseError("unbalanced structured value in response");
  if (text.find_first_of("{[", end) != std::string::npos) throw ParseError("multiple structured values in response");
  try {
    return Json::parse(text.substr(start, end - start));
  } catch (const Json::parse_error& e) {
    throw ParseError(std::string("malformed structured value: ") + e.what());
  }
}

// Completes and parses, re-asking once (attempt + 1) on a parse failure.
// `check` may reject a well-formed value with ParseError to trigger the re-ask.
template <typename Check>
auto complete_json(LlmClient& client, CompletionRequest request, Check&& check) {
  for (int tries = 0;; ++tries) {
    const auto result = client.complete(request);
    try {
      return check(extract_structured(result.text));
    } catch (const ParseError& e) {
      if (tries >= 1) throw ParseError(std::string(to_string(request.template_id)) + ": " + e.what());
      ++request.attempt;
    }
  }
}

inline Json complete_json(LlmClient& client, CompletionRequest request) {
  return complete_json(client, std::move(request), [](Json j) { return j; });
}

}  // namespace toolcua
