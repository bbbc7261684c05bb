#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>

#include "toolcua/http_client.hpp"
#include "toolcua/toolcua.hpp"

namespace fs = std::filesystem;
using namespace toolcua;

namespace {

constexpr int k_exit_ok = 0;
constexpr int k_exit_validation = 1;
constexpr int k_exit_io = 2;
constexpr int k_exit_usage = 64;

// Everything a subcommand needs once flags and the config file are resolved.
struct Context {
  std::string subcommand;
  Json effective;
  RunConfig cfg;
  std::shared_ptr<LlmClient> client;
  std::shared_ptr<ResponseCache> cache;
  Manifest manifest;

  fs::path out(const std::string& name) const { return fs::path(cfg.output) / name; }

  void add_input(const std::string& name, const fs::path& p) { manifest.inputs[name] = file_digest(p); }

  void write(const std::string& name, const std::string& content) {
    write_file(out(name), content);
    manifest.outputs[name] = "sha256:" + sha256_hex(content);
  }

  LlmClient& llm() {
    if (!client) client = make_client();
    return *client;
  }

  std::shared_ptr<LlmClient> make_client() {
    if (!cfg.cache_dir.empty()) cache = std::make_shared<ResponseCache>(cfg.cache_dir);
    switch (cfg.llm_mode) {
      case LlmMode::mock: {
        auto scripted = make_scripted_client();
        if (!cache) return scripted;
        return std::make_shared<CachingClient>(cache, CacheMode::record, scripted);
      }
      case LlmMode::replay:
        if (!cache) throw ValidationError("replay mode needs --cache-dir");
        return std::make_shared<CachingClient>(cache, CacheMode::replay);
      case LlmMode::record: {
        if (!cache) throw ValidationError("record mode needs --cache-dir");
        auto live = std::make_shared<HttpClient>(HttpClientConfig::from_env());
        return std::make_shared<CachingClient>(cache, CacheMode::record, live);
      }
      case LlmMode::live:
        return std::make_shared<HttpClient>(HttpClientConfig::from_env());
    }
    throw ValidationError("unsupported llm mode");
  }

  // Written last so the cache id reflects what this run actually used.
  void finish() {
    manifest.subcommand = subcommand;
    manifest.config_hash = config_hash(effective);
    manifest.seed = cfg.seed;
    manifest.config = effective;
    if (cache) manifest.cache_id = cache->cache_id();
    else if (client && cfg.llm_mode == LlmMode::mock) manifest.cache_id = std::string(ScriptedModel::k_version);
    else manifest.cache_id = "none";
    write_file(out(subcommand + ".manifest.json"), to_json(manifest).dump(2) + "\n");
  }
};

fs::path require_input(const Context& ctx, const std::string& flag_value, const char* what) {
  const std::string p = flag_value.empty() ? ctx.cfg.input : flag_value;
  if (p.empty()) throw ValidationError(std::string("missing input: ") + what);
  if (!fs::exists(p)) throw IoError("input not found: " + p);
  return p;
}

struct Rejection {
  std::string trajectory_id;
  std::string reason;
};

Json rejection_report(std::size_t kept, const std::vector<Rejection>& rejected) {
  Json arr = Json::array();
  for (const auto& r : rejected) arr.push_back(Json{{"trajectory_id", r.trajectory_id}, {"reason", r.reason}});
  return Json{{"kept", kept}, {"rejected", arr}};
}

// Runs fn over every trajectory on the worker pool. Validation and parse
// problems drop that trajectory; I/O and transport errors abort the run.
template <typename Out, typename Fn>
std::vector<Out> map_trajectories(const std::vector<Trajectory>& in, int jobs, std::vector<Rejection>& rejected,
                                  Fn fn) {
  std::vector<std::optional<Out>> results(in.size());
  std::vector<std::string> reasons(in.size());
  parallel_for(in.size(), jobs, [&](std::size_t i) {
    try {
      results[i] = fn(in[i]);
    } catch (const ValidationError& e) {
      reasons[i] = e.what();
    } catch (const ParseError& e) {
      reasons[i] = e.what();
    }
  });
  std::vector<Out> out;
  for (std::size_t i = 0; i < in.size(); ++i) {
    if (results[i]) out.push_back(std::move(*results[i]));
    else rejected.push_back({in[i].trajectory_id, reasons[i]});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

struct Inputs {
  std::string input;
  std::vector<std::string> extra_inputs;
  std::string gui;
  std::string libraries;
  std::vector<std::string> labels;
  bool lenient = false;
  bool strict = false;
  int k = 1;
  bool pool = false;
};

int cmd_ingest(Context& ctx, const Inputs& in) {
  const auto path = require_input(ctx, in.input, "--input raw trajectory file");
  ctx.add_input("input", path);
  const auto lines = split_lines(read_file(path));
  std::vector<Trajectory> ok;
  Json problems = Json::array();
  std::set<std::string> ids;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      Trajectory t = parse_trajectory_line(lines[i]);
      auto report = validate_trajectory(t, nullptr, ValidateOptions{in.lenient});
      if (!ids.insert(t.trajectory_id).second) report.push_back({"duplicate trajectory_id", t.trajectory_id, {}});
      if (!report.empty()) {
        problems.push_back(Json{{"line", i + 1}, {"trajectory_id", t.trajectory_id}, {"error", describe(report)}});
        continue;
      }
      ok.push_back(std::move(t));
    } catch (const Error& e) {
      problems.push_back(Json{{"line", i + 1}, {"trajectory_id", nullptr}, {"error", e.what()}});
    }
  }
  ctx.write("corpus.jsonl", serialize_corpus(ok));
  ctx.write("ingest_report.json", Json{{"accepted", ok.size()}, {"rejected", problems}}.dump(2) + "\n");
  std::cerr << "ingest: " << ok.size() << " accepted, " << problems.size() << " rejected\n";
  if (ok.empty() || (in.strict && !problems.empty())) return k_exit_validation;
  return k_exit_ok;
}

int cmd_filter(Context& ctx, const Inputs& in) {
  const auto path = require_input(ctx, in.input, "--input corpus");
  ctx.add_input("input", path);
  const auto kept = filter_and_balance(read_corpus(path), ctx.cfg.filter, ctx.cfg.seed);
  ctx.write("filtered.jsonl", serialize_corpus(kept));
  std::cerr << "filter: " << kept.size() << " trajectories kept\n";
  return k_exit_ok;
}

int cmd_synth_tools(Context& ctx, const Inputs& in) {
  const auto path = require_input(ctx, in.input, "--input filtered corpus");
  ctx.add_input("input", path);
  const auto corpus = read_corpus(path);
  LlmClient& client = ctx.llm();
  std::vector<Rejection> rejected;
  // Rounds rotate over the corpus so each preset shapes a share of the libraries.
  auto libs = map_trajectories<Json>(corpus, ctx.cfg.jobs, rejected, [&](const Trajectory& t) {
    const auto idx = static_cast<std::size_t>(&t - corpus.data());
    const auto& round = diversity_round(ctx.cfg.rounds[idx % ctx.cfg.rounds.size()]);
    SynthOptions opt;
    opt.repair_budget = ctx.cfg.repair_budget;
    ToolLibrary lib = synthesize_tool_library(t, round, client, opt);
    return Json{{"trajectory_id", t.trajectory_id}, {"round", round.name}, {"library", to_json(lib)}};
  });
  ctx.write("libraries.jsonl", join_jsonl(libs));
  ctx.write("synth_report.json", rejection_report(libs.size(), rejected).dump(2) + "\n");
  std::cerr << "synth-tools: " << libs.size() << " libraries, " << rejected.size() << " failed\n";
  return libs.empty() ? k_exit_validation : k_exit_ok;
}

int cmd_gen_tool_traj(Context& ctx, const Inputs& in) {
  const auto path = require_input(ctx, in.input, "--input filtered corpus");
  if (in.libraries.empty()) throw ValidationError("missing --libraries");
  if (!fs::exists(in.libraries)) throw IoError("input not found: " + in.libraries);
  ctx.add_input("input", path);
  ctx.add_input("libraries", in.libraries);
  std::map<std::string, ToolLibrary> libs;
  for (const auto& rec : read_jsonl(in.libraries)) {
    libs[detail::require_string(rec, "trajectory_id", "library record")] =
        parse_library(detail::require(rec, "library", "library record"));
  }
  std::vector<Trajectory> corpus;
  std::vector<Rejection> rejected;
  for (auto& t : read_corpus(path)) {
    if (libs.count(t.trajectory_id)) corpus.push_back(std::move(t));
    else rejected.push_back({t.trajectory_id, "no tool library"});
  }
  LlmClient& client = ctx.llm();
  auto out = map_trajectories<Trajectory>(corpus, ctx.cfg.jobs, rejected, [&](const Trajectory& t) {
    const ToolLibrary& lib = libs.at(t.trajectory_id);
    GenOptions opt;
    opt.grounding_window = ctx.cfg.grounding_window;
    opt.granularity_instruction = diversity_round(lib.round_tag.empty() ? "balanced" : lib.round_tag).instruction;
    Trajectory tool = generate_tool_trajectory(t, lib, client, opt);
    if (auto report = validate_trajectory(tool); !report.empty()) throw ValidationError(describe(report));
    return tool;
  });
  ctx.write("tool_trajectories.jsonl", serialize_corpus(out));
  ctx.write("gen_report.json", rejection_report(out.size(), rejected).dump(2) + "\n");
  std::cerr << "gen-tool-traj: " << out.size() << " tool trajectories, " << rejected.size() << " rejected\n";
  return out.empty() ? k_exit_validation : k_exit_ok;
}

int cmd_merge(Context& ctx, const Inputs& in) {
  const auto path = require_input(ctx, in.input, "--input tool trajectories");
  ctx.add_input("input", path);
  const auto corpus = read_corpus(path);
  LlmClient& client = ctx.llm();
  std::vector<Rejection> rejected;
  auto results = map_trajectories<MergeResult>(corpus, ctx.cfg.jobs, rejected, [&](const Trajectory& t) {
    if (!t.tool_pool) throw ValidationError("tool trajectory has no tool_pool");
    return plan_and_merge(t, *t.tool_pool, client, ctx.cfg.merge);
  });
  std::vector<Trajectory> variants;
  std::vector<Json> trees;
  std::size_t i = 0;
  for (const auto& t : corpus) {
    if (std::any_of(rejected.begin(), rejected.end(), [&](const auto& r) { return r.trajectory_id == t.trajectory_id; })) {
      continue;
    }
    const auto& r = results[i++];
    for (const auto& v : r.variants) variants.push_back(v);
    trees.push_back(Json{{"trajectory_id", t.trajectory_id},
                         {"fell_back_to_identity", r.fell_back_to_identity},
                         {"tree", to_json(r.tree)["tree"]}});
  }
  ctx.write("merged.jsonl", serialize_corpus(variants));
  ctx.write("merge_trees.jsonl", join_jsonl(trees));
  std::cerr << "merge: " << variants.size() << " variants from " << results.size() << " trajectories\n";
  return results.empty() ? k_exit_validation : k_exit_ok;
}

// Tool trajectory ids are the source id plus ".tool" and optional suffixes.
std::string source_id(const std::string& tool_id) {
  const auto pos = tool_id.find(".tool");
  return pos == std::string::npos ? tool_id : tool_id.substr(0, pos);
}

int cmd_interleave(Context& ctx, const Inputs& in) {
  const auto path = require_input(ctx, in.input, "--input tool trajectories");
  if (in.gui.empty()) throw ValidationError("missing --gui source corpus");
  if (!fs::exists(in.gui)) throw IoError("input not found: " + in.gui);
  ctx.add_input("input", path);
  ctx.add_input("gui", in.gui);
  std::map<std::string, Trajectory> gui;
  for (auto& g : read_corpus(in.gui)) gui.emplace(g.trajectory_id, std::move(g));
  const auto corpus = read_corpus(path);
  std::vector<Rejection> rejected;
  auto per_traj = map_trajectories<std::vector<InterleavedVariant>>(corpus, ctx.cfg.jobs, rejected,
                                                                    [&](const Trajectory& t) {
    auto it = gui.find(source_id(t.trajectory_id));
    if (it == gui.end()) throw ValidationError("no source GUI trajectory for " + t.trajectory_id);
    return interleave(t, it->second, ctx.cfg.seed, ctx.cfg.interleave);
  });
  std::vector<Trajectory> all;
  for (const auto& vs : per_traj) {
    for (const auto& v : vs) all.push_back(v.trajectory);
  }
  ctx.write("d_all.jsonl", serialize_corpus(all));
  if (!rejected.empty()) ctx.write("interleave_report.json", rejection_report(per_traj.size(), rejected).dump(2) + "\n");
  std::cerr << "interleave: " << all.size() << " variants\n";
  return per_traj.empty() ? k_exit_validation : k_exit_ok;
}

int cmd_extract_critical(Context& ctx, const Inputs& in) {
  const auto path = require_input(ctx, in.input, "--input interleaved dataset");
  ctx.add_input("input", path);
  std::vector<InterleavedVariant> variants;
  for (auto& t : read_corpus(path)) {
    InterleavedVariant v;
    v.pool = t.tool_pool.value_or(ToolLibrary{});
    v.critical_steps = find_critical_steps(t, ctx.cfg.interleave.history_n);
    v.trajectory = std::move(t);
    variants.push_back(std::move(v));
  }
  const auto records = extract_critical_dataset(variants, ctx.cfg.interleave.history_n);
  ctx.write("d_critical.jsonl", join_jsonl(records));
  std::cerr << "extract-critical: " << records.size() << " records\n";
  return k_exit_ok;
}

int cmd_stats(Context& ctx, const Inputs& in) {
  const auto path = require_input(ctx, in.input, "--input corpus");
  ctx.add_input("input", path);
  const auto stats = compute_dataset_stats(read_corpus(path));
  const std::string text = to_json(stats).dump(2) + "\n";
  ctx.write("stats.json", text);
  std::cout << text;
  return k_exit_ok;
}

// Input lines: {"task": {task_id, tool_beneficial, max_steps?}, "outcomes": [{success, steps, tool_calls, format_ok?}]}
int cmd_reward_audit(Context& ctx, const Inputs& in) {
  const auto path = require_input(ctx, in.input, "--input rollout groups");
  ctx.add_input("input", path);
  std::vector<Json> lines;
  std::size_t retained = 0;
  std::size_t groups = 0;
  for (const auto& rec : read_jsonl(path)) {
    const Json& task = detail::require(rec, "task", "rollout group");
    RolloutGroup g;
    g.task.task_id = detail::require_string(task, "task_id", "task");
    g.task.goal = detail::string_or_empty(task, "goal");
    g.task.tool_beneficial = detail::require(task, "tool_beneficial", "task").get<int>();
    g.task.max_steps = task.value("max_steps", ctx.cfg.reward.s_max);
    if (auto report = validate_task_spec(g.task); !report.empty()) throw ValidationError(describe(report));
    for (const auto& o : detail::require(rec, "outcomes", "rollout group")) {
      TrajectoryOutcome out;
      out.success = detail::require(o, "success", "outcome").get<bool>();
      out.steps = detail::require(o, "steps", "outcome").get<int>();
      out.tool_calls = detail::require(o, "tool_calls", "outcome").get<int>();
      out.format_ok = o.value("format_ok", true);
      g.outcomes.push_back(out);
    }
    ++groups;
    const bool mixed = is_mixed(g);
    retained += mixed;
    for (const auto& a : audit_group(g, ctx.cfg.reward)) {
      Json j = to_json(a);
      j["retained"] = mixed;
      lines.push_back(std::move(j));
    }
  }
  ctx.write("audit.jsonl", join_jsonl(lines));
  std::cerr << "reward-audit: " << lines.size() << " outcomes in " << groups << " groups, " << retained
            << " groups retained by dynamic filtering\n";
  return k_exit_ok;
}

int cmd_sim_train(Context& ctx, const Inputs& in) {
  const auto path = require_input(ctx, in.input, "--input simulator suite");
  ctx.add_input("input", path);
  Json suite_json;
  try {
    suite_json = Json::parse(read_file(path));
  } catch (const Json::parse_error& e) {
    throw ParseError(std::string("suite: ") + e.what());
  }
  const auto suite = sim::parse_suite(suite_json);
  const auto result = sim::train_toy_policy(suite, ctx.cfg.sim);
  const auto evals = sim::evaluate_policy(result.policy, suite, ctx.cfg.eval_episodes, ctx.cfg.seed);
  const auto baseline = sim::evaluate_gui_only(suite);

  std::vector<Json> eval_lines;
  for (const auto& r : evals) {
    eval_lines.push_back(Json{{"task_id", r.task_id},
                              {"tool_beneficial", r.tool_beneficial},
                              {"success", r.success},
                              {"steps", r.steps},
                              {"tool_calls", r.tool_calls},
                              {"run_index", r.run_index}});
  }
  const double acs = compute_acs(evals);
  const double base_acs = compute_acs(baseline);
  Json summary = Json::object();
  summary["iterations"] = ctx.cfg.sim.iterations;
  summary["reward"] = Json{{"lambda", ctx.cfg.reward.lambda}, {"beta", ctx.cfg.reward.beta}};
  summary["eval"] = to_json(metric_table(evals));
  summary["gui_only_acs"] = base_acs;
  summary["steps_ratio_vs_gui_only"] = acs / base_acs;

  ctx.write("curves.csv", sim::curves_csv(result.curves));
  ctx.write("policy.json", result.policy.to_json().dump(2) + "\n");
  ctx.write("eval.jsonl", join_jsonl(eval_lines));
  ctx.write("summary.json", summary.dump(2) + "\n");
  std::printf("sim-train: accuracy %.4f  TIR %.4f  ACS %.3f  (GUI-only ACS %.3f)\n", compute_accuracy(evals),
              compute_tir(evals), acs, base_acs);
  return k_exit_ok;
}

std::string pct(const std::optional<double>& v) {
  if (!v) return "-";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", *v * 100.0);
  return buf;
}

std::string fixed2(const std::optional<double>& v) {
  if (!v) return "-";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", *v);
  return buf;
}

std::string metrics_markdown(const AvgKReport& r) {
  std::string s = "| Split | N | Accuracy (%) | TIR (%) | ACS |\n|---|---|---|---|---|\n";
  auto row = [&](const char* name, const MetricRow& m) {
    s += std::string("| ") + name + " | " + std::to_string(m.n) + " | " + pct(m.accuracy) + " | " + pct(m.tir) + " | " +
         fixed2(m.acs) + " |\n";
  };
  row("tool-beneficial", r.aggregate.beneficial);
  row("non-beneficial", r.aggregate.non_beneficial);
  row("overall", r.aggregate.overall);
  s += "\navg@" + std::to_string(r.k) + (r.pooled ? " (pooled counts)" : " (per-run mean)") + "\n";
  return s;
}

int cmd_metrics(Context& ctx, const Inputs& in) {
  const auto path = require_input(ctx, in.input, "--input eval results");
  ctx.add_input("input", path);
  std::vector<EvalResult> results;
  for (const auto& j : read_jsonl(path)) results.push_back(parse_eval_result(j));
  if (results.empty()) throw ValidationError("no eval results");
  AvgKReport report;
  if (in.k <= 1) {
    report.k = 1;
    report.pooled = in.pool;
    report.aggregate = metric_table(results);
    report.per_run.push_back(report.aggregate);
  } else {
    report = aggregate_avg_k(results, in.k, in.pool);
  }
  const std::string md = metrics_markdown(report);
  ctx.write("metrics.json", to_json(report).dump(2) + "\n");
  ctx.write("metrics.md", md);
  std::cout << md;
  return k_exit_ok;
}

int cmd_plot(Context& ctx, const Inputs& in) {
  std::vector<std::string> files = in.extra_inputs;
  if (files.empty()) files.push_back(require_input(ctx, "", "--input curves.csv").string());
  std::vector<std::pair<std::string, NumericTable>> runs;
  for (std::size_t i = 0; i < files.size(); ++i) {
    if (!fs::exists(files[i])) throw IoError("input not found: " + files[i]);
    ctx.add_input("input" + std::to_string(i), files[i]);
    const std::string label = i < in.labels.size() ? in.labels[i] : fs::path(files[i]).parent_path().filename().string();
    runs.emplace_back(label.empty() ? "run" + std::to_string(i) : label, parse_numeric_csv(read_file(files[i])));
  }
  for (const auto& [column, svg] : plot_training_curves(runs)) ctx.write(column + ".svg", svg);
  std::cerr << "plot: wrote charts to " << ctx.cfg.output << "\n";
  return k_exit_ok;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"toolcua: hybrid GUI/tool trajectory synthesis, reward shaping and evaluation"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  std::optional<std::string> cache_dir;
  std::optional<std::string> llm_mode;
  std::optional<int> jobs;
  app.add_option("--config", config_path, "JSON config file (flags override it)");
  app.add_option("--seed", seed, "Master seed");
  app.add_option("--out", out_dir, "Output directory");
  app.add_option("--cache-dir", cache_dir, "LLM response cache directory");
  app.add_option("--llm-mode", llm_mode, "mock | replay | record | live");
  app.add_option("--jobs", jobs, "Worker threads");

  Inputs in;
  Json flag_patch = Json::object();
  auto set_flag = [&](const std::string& section, const std::string& key, Json value) {
    flag_patch[section][key] = std::move(value);
  };

  struct NumFlag {
    std::string name;
    std::string section;
    std::string key;
    std::optional<double> value;
    bool integer = false;
  };
  std::vector<std::unique_ptr<NumFlag>> num_flags;
  auto num_flag = [&](CLI::App* sub, const std::string& flag, const std::string& section, const std::string& key,
                      bool integer, const std::string& help) {
    num_flags.push_back(std::make_unique<NumFlag>(NumFlag{flag, section, key, std::nullopt, integer}));
    sub->add_option(flag, num_flags.back()->value, help)->type_name(integer ? "INT" : "FLOAT");
  };

  auto add_sub = [&](const std::string& name, const std::string& help) {
    auto* sub = app.add_subcommand(name, help);
    sub->fallthrough();
    return sub;
  };
  auto* ingest = add_sub("ingest", "Parse, normalize and validate a raw trajectory file");
  ingest->add_option("--input", in.input, "Raw trajectory JSONL");
  ingest->add_flag("--lenient", in.lenient, "Accept 'answer' actions");
  ingest->add_flag("--strict", in.strict, "Exit 1 if any line is rejected");

  auto* filter = add_sub("filter", "Quality filter and application balancing");
  filter->add_option("--input", in.input, "Corpus JSONL");
  num_flag(filter, "--min-steps", "pipeline", "min_steps", true, "Minimum step count");
  num_flag(filter, "--max-steps", "pipeline", "max_steps", true, "Maximum step count");
  num_flag(filter, "--max-app-fraction", "pipeline", "max_app_fraction", false, "Per-application share cap");

  std::vector<std::string> rounds;
  auto* synth = add_sub("synth-tools", "Synthesize a tool library per trajectory");
  synth->add_option("--input", in.input, "Filtered corpus JSONL");
  synth->add_option("--round", rounds, "Diversity round preset(s), rotated over the corpus");

  auto* gen = add_sub("gen-tool-traj", "Generate grounded tool-only trajectories");
  gen->add_option("--input", in.input, "Filtered corpus JSONL");
  gen->add_option("--libraries", in.libraries, "libraries.jsonl from synth-tools")->required();
  num_flag(gen, "--grounding-window", "pipeline", "grounding_window", true, "Candidate frames per grounding call");

  auto* merge = add_sub("merge", "Plan merge trees and emit coarser variants");
  merge->add_option("--input", in.input, "Tool trajectories JSONL");
  num_flag(merge, "--max-branching", "pipeline", "max_branching", true, "Children per merged node (B)");
  num_flag(merge, "--max-height", "pipeline", "max_height", true, "Coarse levels (H)");

  auto* inter = add_sub("interleave", "Replace tool calls by their GUI spans");
  inter->add_option("--input", in.input, "Tool trajectories JSONL (gen-tool-traj or merge output)");
  inter->add_option("--gui", in.gui, "Source GUI corpus the tool trajectories were generated from")->required();
  num_flag(inter, "--p-replace", "pipeline", "p_replace", false, "Per-tool replacement probability");
  num_flag(inter, "--variants", "pipeline", "variants", true, "Variants drawn per trajectory");

  auto* crit = add_sub("extract-critical", "Export switching-step records");
  crit->add_option("--input", in.input, "d_all.jsonl from interleave");
  num_flag(crit, "--history-n", "pipeline", "history_n", true, "Screenshot history window");

  auto* stats = add_sub("stats", "Corpus statistics report");
  stats->add_option("--input", in.input, "Corpus JSONL");

  auto* audit = add_sub("reward-audit", "Score rollout groups and log every reward term");
  audit->add_option("--input", in.input, "Rollout groups JSONL");
  num_flag(audit, "--lambda", "reward", "lambda", false, "Tool reward weight");
  num_flag(audit, "--beta", "reward", "beta", false, "Length reward weight");
  num_flag(audit, "--s-max", "reward", "s_max", true, "Execution horizon");

  bool ablation = false;
  auto* simtrain = add_sub("sim-train", "Train the toy policy on a simulator suite");
  simtrain->add_option("--input", in.input, "Suite JSON");
  simtrain->add_flag("--ablation", ablation, "Accuracy-only reward (lambda = beta = 0)");
  num_flag(simtrain, "--lambda", "reward", "lambda", false, "Tool reward weight");
  num_flag(simtrain, "--beta", "reward", "beta", false, "Length reward weight");
  num_flag(simtrain, "--iterations", "sim", "iterations", true, "Training iterations");
  num_flag(simtrain, "--group-size", "sim", "group_size", true, "Rollouts per task per iteration");
  num_flag(simtrain, "--learning-rate", "sim", "learning_rate", false, "Step size");
  num_flag(simtrain, "--eval-episodes", "sim", "eval_episodes", true, "Evaluation rollouts per task");

  auto* metrics = add_sub("metrics", "Accuracy / TIR / ACS report");
  metrics->add_option("--input", in.input, "Eval results JSONL");
  metrics->add_option("--k", in.k, "Runs per task for avg@k (1 = single run)");
  metrics->add_flag("--pool", in.pool, "Pool counts across runs instead of averaging per run");

  auto* plot = add_sub("plot", "Render training curves as SVG");
  plot->add_option("--input", in.extra_inputs, "curves.csv (repeat to overlay runs)");
  plot->add_option("--label", in.labels, "Legend label per input");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return k_exit_usage;
  }

  Context ctx;
  ctx.subcommand = app.get_subcommands().front()->get_name();
  try {
    Json patch = Json::object();
    if (seed) patch["seed"] = *seed;
    if (out_dir) patch["paths"]["output"] = *out_dir;
    if (cache_dir) patch["paths"]["cache_dir"] = *cache_dir;
    if (llm_mode) patch["llm_mode"] = *llm_mode;
    if (jobs) patch["jobs"] = *jobs;
    for (const auto& f : num_flags) {
      if (!f->value) continue;
      if (f->integer) set_flag(f->section, f->key, static_cast<long long>(*f->value));
      else set_flag(f->section, f->key, *f->value);
    }
    if (!rounds.empty()) set_flag("pipeline", "rounds", rounds);
    if (ablation) {
      set_flag("reward", "lambda", 0.0);
      set_flag("reward", "beta", 0.0);
    }
    patch.merge_patch(flag_patch);

    std::vector<Json> layers;
    if (!config_path.empty()) {
      try {
        layers.push_back(Json::parse(read_file(config_path)));
      } catch (const Json::parse_error& e) {
        throw ParseError("config: " + std::string(e.what()));
      }
    }
    layers.push_back(patch);
    ctx.effective = layer_config(layers);
    ctx.cfg = parse_run_config(ctx.effective);
    if (!config_path.empty()) ctx.add_input("config", config_path);
    fs::create_directories(ctx.cfg.output);

    static const std::map<std::string, int (*)(Context&, const Inputs&)> kCommands = {
        {"ingest", cmd_ingest},           {"filter", cmd_filter},
        {"synth-tools", cmd_synth_tools}, {"gen-tool-traj", cmd_gen_tool_traj},
        {"merge", cmd_merge},             {"interleave", cmd_interleave},
        {"extract-critical", cmd_extract_critical}, {"stats", cmd_stats},
        {"reward-audit", cmd_reward_audit}, {"sim-train", cmd_sim_train},
        {"metrics", cmd_metrics},         {"plot", cmd_plot}};
    const int rc = kCommands.at(ctx.subcommand)(ctx, in);
    ctx.finish();
    return rc;
  } catch (const UncachedRequest& e) {
    std::cerr << "error: replay cache miss, uncached request " << e.key() << "\n";
    return k_exit_io;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return k_exit_io;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return k_exit_io;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return k_exit_validation;
  }
}
