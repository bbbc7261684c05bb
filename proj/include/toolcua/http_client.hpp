#pragma once

// Live client for an OpenAI-compatible chat-completions endpoint. Kept out of
// the umbrella header because it drags in httplib and TLS.

#include <chrono>
#include <cstdlib>
#include <semaphore>
#include <thread>

#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
#define CPPHTTPLIB_OPENSSL_SUPPORT
#endif
#include <httplib.h>

#include "toolcua/llm_client.hpp"

namespace toolcua {

struct HttpClientConfig {
  std::string endpoint;  // full URL of the completions route
  std::string api_key;
  std::string model = "default";
  int max_in_flight = 4;
  int max_attempts = 3;
  std::chrono::milliseconds backoff{500};
  std::chrono::seconds timeout{120};

  static HttpClientConfig from_env() {
    HttpClientConfig cfg;
    const char* endpoint = std::getenv("TOOLCUA_LLM_ENDPOINT");
    const char* key = std::getenv("TOOLCUA_LLM_API_KEY");
    if (!endpoint || !*endpoint) throw ValidationError("TOOLCUA_LLM_ENDPOINT is not set");
    if (!key || !*key) throw ValidationError("TOOLCUA_LLM_API_KEY is not set");
    cfg.endpoint = endpoint;
    cfg.api_key = key;
    if (const char* model = std::getenv("TOOLCUA_LLM_MODEL"); model && *model) cfg.model = model;
    return cfg;
  }
};

namespace detail {

struct SplitUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

inline SplitUrl split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw ValidationError("endpoint must be an absolute URL: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

}  // namespace detail

class HttpClient : public LlmClient {
 public:
  explicit HttpClient(HttpClientConfig cfg)
      : cfg_(std::move(cfg)), url_(detail::split_url(cfg_.endpoint)), slots_(std::max(1, cfg_.max_in_flight)) {}

  CompletionResult complete(const CompletionRequest& request) override {
    const std::string body = build_body(request).dump();
    slots_.acquire();
    struct Release {
      std::counting_semaphore<>& s;
      ~Release() { s.release(); }
    } release{slots_};

    std::string last_error;
    for (int attempt = 1; attempt <= cfg_.max_attempts; ++attempt) {
      httplib::Client cli(url_.origin);
      cli.set_read_timeout(cfg_.timeout);
      cli.set_write_timeout(cfg_.timeout);
      cli.set_bearer_token_auth(cfg_.api_key);
      auto res = cli.Post(url_.path, body, "application/json");
      if (res && res->status == 200) return parse_response(res->body);
      // 4xx other than rate limiting will not get better on retry.
      if (res && res->status >= 400 && res->status < 500 && res->status != 429) {
        throw TransportError("HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 200), attempt);
      }
      last_error = res ? "HTTP " + std::to_string(res->status) : httplib::to_string(res.error());
      if (attempt < cfg_.max_attempts) std::this_thread::sleep_for(cfg_.backoff * attempt);
    }
    throw TransportError(last_error, cfg_.max_attempts);
  }

 private:
  Json build_body(const CompletionRequest& request) const {
    Json content = Json::array();
    content.push_back(Json{{"type", "text"}, {"text", render_prompt(request.template_id, request.bindings)}});
    for (const auto& ref : request.image_refs) {
      content.push_back(Json{{"type", "image_url"}, {"image_url", Json{{"url", ref}}}});
    }
    Json body = Json::object();
    body["model"] = cfg_.model;
    body["messages"] = Json::array({Json{{"role", "user"}, {"content", std::move(content)}}});
    body["temperature"] = request.decode.temperature;
    body["max_tokens"] = request.decode.max_output_tokens;
    return body;
  }

  static CompletionResult parse_response(const std::string& raw) {
    Json j;
    try {
      j = Json::parse(raw);
    } catch (const Json::parse_error& e) {
      throw TransportError(std::string("unparseable completion body: ") + e.what(), 1);
    }
    CompletionResult r;
    const Json& choices = detail::require(j, "choices", "completion body");
    if (!choices.is_array() || choices.empty()) throw TransportError("completion body has no choices", 1);
    const Json& choice = choices.front();
    r.text = detail::require_string(detail::require(choice, "message", "choice"), "content", "message");
    r.finish_reason = detail::string_or_empty(choice, "finish_reason");
    if (auto it = j.find("usage"); it != j.end() && it->is_object()) {
      r.prompt_tokens = it->value("prompt_tokens", 0);
      r.completion_tokens = it->value("completion_tokens", 0);
    }
    return r;
  }

  HttpClientConfig cfg_;
  detail::SplitUrl url_;
  std::counting_semaphore<> slots_;
};

}  // namespace toolcua
