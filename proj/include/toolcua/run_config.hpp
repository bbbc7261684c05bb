#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "toolcua/common.hpp"
#include "toolcua/env_sim.hpp"
#include "toolcua/pipeline.hpp"
#include "toolcua/reward.hpp"

namespace toolcua {

enum class LlmMode { mock, replay, record, live };

inline std::string_view to_string(LlmMode m) {
  switch (m) {
    case LlmMode::mock: return "mock";
    case LlmMode::replay: return "replay";
    case LlmMode::record: return "record";
    case LlmMode::live: return "live";
  }
  return "mock";
}

inline LlmMode parse_llm_mode(std::string_view s) {
  if (s == "mock") return LlmMode::mock;
  if (s == "replay") return LlmMode::replay;
  if (s == "record") return LlmMode::record;
  if (s == "live") return LlmMode::live;
  throw ValidationError("unknown llm mode: " + std::string(s));
}

// Every knob a subcommand can read. The JSON form is the single source of
// truth: defaults, then the config file, then command-line flags are layered
// as merge patches and the result is parsed once.
struct RunConfig {
  std::uint64_t seed = 0;
  std::string input;
  std::string output = "out";
  std::string cache_dir;
  LlmMode llm_mode = LlmMode::mock;
  int jobs = 1;

  FilterConfig filter;
  std::vector<std::string> rounds = {"fine_heavy", "balanced", "coarse_heavy"};
  int repair_budget = 3;
  std::size_t grounding_window = 8;
  MergeOptions merge;
  InterleaveOptions interleave;

  RewardParams reward;
  sim::TrainConfig sim;
  int eval_episodes = 200;
};

inline Json default_config_json() {
  const RunConfig d;
  Json j = Json::object();
  j["seed"] = d.seed;
  j["llm_mode"] = std::string(to_string(d.llm_mode));
  j["jobs"] = d.jobs;
  j["paths"] = Json{{"input", d.input}, {"output", d.output}, {"cache_dir", d.cache_dir}};
  Json p = Json::object();
  p["min_steps"] = d.filter.min_steps;
  p["max_steps"] = d.filter.max_steps;
  p["max_app_fraction"] = d.filter.max_app_fraction;
  p["rounds"] = d.rounds;
  p["repair_budget"] = d.repair_budget;
  p["grounding_window"] = d.grounding_window;
  p["max_branching"] = d.merge.max_branching;
  p["max_height"] = d.merge.max_height;
  p["p_replace"] = d.interleave.p_replace;
  p["variants"] = d.interleave.variants;
  p["history_n"] = d.interleave.history_n;
  j["pipeline"] = p;
  j["reward"] = Json{{"lambda", d.reward.lambda},
                     {"beta", d.reward.beta},
                     {"s_max", d.reward.s_max},
                     {"std_epsilon", d.reward.std_epsilon},
                     {"mean_over_successes", d.reward.mean_over_successes}};
  j["sim"] = Json{{"group_size", d.sim.group_size},
                  {"iterations", d.sim.iterations},
                  {"learning_rate", d.sim.learning_rate},
                  {"temperature", d.sim.temperature},
                  {"eval_episodes", d.eval_episodes}};
  return j;
}

namespace detail {

// Rejects keys the defaults do not know and values of the wrong JSON type,
// so a typo in a config file fails loudly instead of being ignored.
inline void check_shape(const Json& defaults, const Json& value, const std::string& where) {
  if (!value.is_object()) throw ValidationError("config: " + where + " must be an object");
  for (auto it = value.begin(); it != value.end(); ++it) {
    const std::string path = where.empty() ? it.key() : where + "." + it.key();
    auto d = defaults.find(it.key());
    if (d == defaults.end()) throw ValidationError("config: unknown key " + path);
    if (d->is_object()) {
      check_shape(*d, it.value(), path);
      continue;
    }
    const bool ok = (d->is_number() && it.value().is_number()) || (d->is_string() && it.value().is_string()) ||
                    (d->is_boolean() && it.value().is_boolean()) || (d->is_array() && it.value().is_array());
    if (!ok) throw ValidationError("config: wrong type for " + path);
  }
}

template <typename T>
T num(const Json& j, const char* key) {
  if constexpr (std::is_integral_v<T>) {
    if (!j.at(key).is_number_integer()) throw ValidationError(std::string("config: ") + key + " must be an integer");
  }
  return j.at(key).get<T>();
}

}  // namespace detail

// Layers patches over the defaults (later patches win) and validates.
inline Json layer_config(const std::vector<Json>& patches) {
  const Json defaults = default_config_json();
  Json merged = defaults;
  for (const auto& p : patches) {
    detail::check_shape(defaults, p, "");
    merged.merge_patch(p);
  }
  return merged;
}

inline RunConfig parse_run_config(const Json& j) {
  RunConfig c;
  if (!j.at("seed").is_number_integer() || j.at("seed").get<long long>() < 0) {
    throw ValidationError("config: seed must be a non-negative integer");
  }
  c.seed = j.at("seed").get<std::uint64_t>();
  c.llm_mode = parse_llm_mode(j.at("llm_mode").get<std::string>());
  c.jobs = detail::num<int>(j, "jobs");
  if (c.jobs < 1) throw ValidationError("config: jobs must be positive");
  const Json& paths = j.at("paths");
  c.input = paths.at("input").get<std::string>();
  c.output = paths.at("output").get<std::string>();
  c.cache_dir = paths.at("cache_dir").get<std::string>();

  const Json& p = j.at("pipeline");
  c.filter.min_steps = detail::num<int>(p, "min_steps");
  c.filter.max_steps = detail::num<int>(p, "max_steps");
  c.filter.max_app_fraction = detail::num<double>(p, "max_app_fraction");
  c.rounds.clear();
  for (const auto& r : p.at("rounds")) {
    if (!r.is_string()) throw ValidationError("config: pipeline.rounds must hold strings");
    c.rounds.push_back(r.get<std::string>());
    try {
      (void)diversity_round(c.rounds.back());
    } catch (const std::exception&) {
      throw ValidationError("config: unknown diversity round " + c.rounds.back());
    }
  }
  if (c.rounds.empty()) throw ValidationError("config: pipeline.rounds is empty");
  c.repair_budget = detail::num<int>(p, "repair_budget");
  const int window = detail::num<int>(p, "grounding_window");
  if (window < 1) throw ValidationError("config: grounding_window must be positive");
  c.grounding_window = static_cast<std::size_t>(window);
  c.merge.max_branching = detail::num<int>(p, "max_branching");
  c.merge.max_height = detail::num<int>(p, "max_height");
  c.merge.repair_budget = c.repair_budget;
  if (c.merge.max_branching < 2 || c.merge.max_height < 1) throw ValidationError("config: need max_branching >= 2, max_height >= 1");
  c.interleave.p_replace = detail::num<double>(p, "p_replace");
  c.interleave.variants = detail::num<int>(p, "variants");
  c.interleave.history_n = detail::num<int>(p, "history_n");
  if (!(c.interleave.p_replace >= 0 && c.interleave.p_replace <= 1)) throw ValidationError("config: p_replace must be in [0, 1]");
  if (c.interleave.variants < 1) throw ValidationError("config: variants must be positive");
  if (c.interleave.history_n < 0) throw ValidationError("config: history_n must be non-negative");

  const Json& r = j.at("reward");
  c.reward.lambda = detail::num<double>(r, "lambda");
  c.reward.beta = detail::num<double>(r, "beta");
  c.reward.s_max = detail::num<int>(r, "s_max");
  c.reward.std_epsilon = detail::num<double>(r, "std_epsilon");
  c.reward.mean_over_successes = r.at("mean_over_successes").get<bool>();
  try {
    check(c.reward);
  } catch (const std::invalid_argument& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }

  const Json& s = j.at("sim");
  c.sim.reward = c.reward;
  c.sim.group_size = detail::num<int>(s, "group_size");
  c.sim.iterations = detail::num<int>(s, "iterations");
  c.sim.learning_rate = detail::num<double>(s, "learning_rate");
  c.sim.temperature = detail::num<double>(s, "temperature");
  c.sim.seed = c.seed;
  c.eval_episodes = detail::num<int>(s, "eval_episodes");
  if (c.sim.group_size < 1 || c.sim.iterations < 0 || c.eval_episodes < 1) throw ValidationError("config: bad sim sizes");
  if (!(c.sim.temperature > 0)) throw ValidationError("config: temperature must be positive");
  return c;
}

// Hash of everything that can change an artifact. Worker count and the
// output location cannot, so they are left out.
inline std::string config_hash(const Json& effective) {
  Json h = effective;
  h.erase("jobs");
  h["paths"].erase("output");
  return sha256_hex(h.dump());
}

inline std::string file_digest(const std::filesystem::path& p) { return "sha256:" + sha256_hex(read_file(p)); }

struct Manifest {
  std::string subcommand;
  std::string config_hash;
  std::uint64_t seed = 0;
  std::string cache_id;
  std::map<std::string, std::string> inputs;   // name -> digest
  std::map<std::string, std::string> outputs;  // file name -> digest
  Json config;
};

inline Json to_json(const Manifest& m) {
  Json j = Json::object();
  j["subcommand"] = m.subcommand;
  j["config_hash"] = m.config_hash;
  j["seed"] = m.seed;
  j["cache_id"] = m.cache_id;
  Json in = Json::object();
  for (const auto& [k, v] : m.inputs) in[k] = v;
  Json out = Json::object();
  for (const auto& [k, v] : m.outputs) out[k] = v;
  j["inputs"] = std::move(in);
  j["outputs"] = std::move(out);
  j["config"] = m.config;
  return j;
}

}  // namespace toolcua
