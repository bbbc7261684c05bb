// Acceptance runner: one PASS/FAIL line per criterion, exit status 0 only if
// every failure is a documented known deviation.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numeric>
#include <regex>

#include "support.hpp"

using namespace toolcua;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  bool known_deviation = false;  // failure is ledgered and expected
  std::string detail;
  std::vector<std::string> problems;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      if (problems.size() < 8) problems.push_back(what);
    }
  }
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

TrajectoryOutcome win(int s, int c = 0) { return {true, s, c, true}; }

// ---------------------------------------------------------------------------

Outcome reward_exactness() {
  Outcome o;
  const RewardParams p;
  o.require(p.lambda == 0.4 && p.beta == 0.2 && p.s_max == 30, "default weights");
  const double lin = length_reward(win(10), 20, p);
  const double ex = length_reward(win(25), 20, p);
  o.require(std::abs(lin - 1.5) <= 1e-9, "R_length(10; 20) = " + fmt("%.12f", lin));
  o.require(std::abs(ex - std::exp(-0.5)) <= 1e-9 && std::abs(ex - 0.60653) < 1e-5, "R_length(25; 20, 30)");
  o.require(tool_reward(win(5, 3), 1) == 1 && tool_reward(win(5, 0), -1) == 1 && tool_reward(win(5, 0), 1) == 0 &&
                tool_reward(win(5, 2), -1) == 0,
            "tool indicator cells");
  o.require(tool_reward({false, 5, 3, true}, 1) == 0 && tool_reward({false, 5, 0, true}, -1) == 0, "failure gate");
  const double total = total_reward(win(10, 2), 1, 20, p);
  o.require(std::abs(total - 2.7) <= 1e-9, "total = " + fmt("%.12f", total));
  o.detail = "R_length 1.5 / " + fmt("%.5f", ex) + ", total " + fmt("%.3f", total);
  return o;
}

Outcome reward_properties() {
  Outcome o;
  Rng rng(20240611);
  int checked = 0;
  for (int i = 0; i < 10000; ++i) {
    RewardParams p;
    p.s_max = 2 + static_cast<int>(rng.uniform_index(49));
    const double s_bar = 1.0 + rng.uniform01() * (p.s_max - 1);
    // Monotone non-increasing over the whole horizon and inside [0, 2).
    double prev = std::numeric_limits<double>::infinity();
    for (int s = 1; s <= p.s_max; ++s) {
      const double v = length_reward(win(s), s_bar, p);
      if (!(v <= prev + 1e-15) || !(v >= 0.0 && v < 2.0)) {
        o.require(false, "monotone/range at s=" + std::to_string(s) + " s_bar=" + fmt("%.4f", s_bar));
        break;
      }
      prev = v;
    }
    // Both branch formulas meet at s = s_bar.
    const int sb = 1 + static_cast<int>(rng.uniform_index(static_cast<std::size_t>(p.s_max)));
    const double at = length_reward(win(sb), sb, p);
    const double linear_limit = 1.0 + (sb - static_cast<double>(sb)) / sb;
    const double exp_limit = std::exp(-(sb - static_cast<double>(sb)) / (p.s_max - sb + 1e-300));
    o.require(std::abs(at - linear_limit) < 1e-12 && std::abs(at - exp_limit) < 1e-12, "branch gap");

    // Failure makes every gated term vanish whatever s, c and t_b are.
    const int s = 1 + static_cast<int>(rng.uniform_index(static_cast<std::size_t>(p.s_max)));
    const int c = static_cast<int>(rng.uniform_index(static_cast<std::size_t>(s) + 1));
    const TrajectoryOutcome fail{false, s, c, rng.bernoulli(0.5)};
    const double base = fail.format_ok ? 1.0 : 0.0;
    o.require(total_reward(fail, rng.bernoulli(0.5) ? 1 : -1, s_bar, p) == base, "failure independence");

    // Advantages: shift invariant and zero-sum.
    std::vector<double> r(2 + rng.uniform_index(31));
    for (auto& x : r) x = rng.uniform01() * 3.4;
    const double shift = rng.uniform01() * 10 - 5;
    std::vector<double> shifted = r;
    for (auto& x : shifted) x += shift;
    const auto a = group_advantages(r);
    const auto b = group_advantages(shifted);
    double sum = 0;
    for (std::size_t k = 0; k < a.size(); ++k) {
      sum += a[k];
      o.require(std::abs(a[k] - b[k]) < 1e-9, "shift invariance");
    }
    o.require(std::abs(sum) < 1e-9, "zero-sum");
    ++checked;
  }
  o.detail = std::to_string(checked) + " randomized outcomes";
  return o;
}

Outcome dynamic_filtering() {
  Outcome o;
  Rng rng(77);
  std::vector<RolloutGroup> groups;
  std::vector<std::string> expected;
  for (int g = 0; g < 1000; ++g) {
    RolloutGroup group;
    group.task.task_id = "g" + std::to_string(g);
    const double p_success = std::array<double, 4>{0.0, 1.0, 0.5, 0.97}[rng.uniform_index(4)];
    const std::size_t n = 1 + rng.uniform_index(32);
    int wins = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const bool ok = rng.bernoulli(p_success);
      wins += ok;
      group.outcomes.push_back({ok, 1 + static_cast<int>(rng.uniform_index(30)), 0, true});
    }
    if (wins > 0 && wins < static_cast<int>(n)) expected.push_back(group.task.task_id);
    groups.push_back(std::move(group));
  }
  std::vector<std::string> got;
  for (const auto& g : dynamic_filter(groups)) got.push_back(g.task.task_id);
  o.require(got == expected, "retained set differs from brute-force scan");
  o.detail = std::to_string(got.size()) + "/1000 groups retained, matches scan";
  return o;
}

Outcome pipeline_invariants() {
  Outcome o;
  testkit::TempDir dir("acceptance-pipeline");
  const fs::path corpus = testkit::data_dir() / "sample_corpus.jsonl";
  const auto a = dir / "run_a";
  const auto b = dir / "run_b";
  const auto cache = dir / "cache";
  int rc = testkit::run_pipeline(corpus, a, cache, "mock");
  o.require(rc == 0, "mock run exited " + std::to_string(rc));
  if (rc != 0) return o;
  rc = testkit::run_pipeline(corpus, b, cache, "replay");
  o.require(rc == 0, "replay run exited " + std::to_string(rc));
  if (rc != 0) return o;

  for (const char* name : {"corpus.jsonl", "filtered.jsonl", "libraries.jsonl", "tool_trajectories.jsonl",
                           "merged.jsonl", "merge_trees.jsonl", "d_all.jsonl", "d_critical.jsonl"}) {
    o.require(read_file(a / name) == read_file(b / name), std::string(name) + " differs between runs");
  }

  const auto filtered = read_corpus(a / "filtered.jsonl");
  o.require(filtered.size() == 20, "fixture corpus has " + std::to_string(filtered.size()) + " trajectories");
  std::map<std::string, Trajectory> gui, merged;
  for (const auto& t : filtered) gui.emplace(t.trajectory_id, t);
  for (const auto& t : read_corpus(a / "merged.jsonl")) merged.emplace(t.trajectory_id, t);

  const std::regex mix_suffix(R"(\.mix\d+$)");
  std::set<std::tuple<std::string, std::size_t, std::string>> scanned, exported;
  std::size_t variants = 0;
  std::size_t mixed = 0;
  for (const auto& v : read_corpus(a / "d_all.jsonl")) {
    ++variants;
    const std::string src = std::regex_replace(v.trajectory_id, mix_suffix, "");
    mixed += src != v.trajectory_id;
    const std::string gui_id = v.trajectory_id.substr(0, v.trajectory_id.find(".tool"));
    auto ms = merged.find(src);
    auto gs = gui.find(gui_id);
    if (ms == merged.end() || gs == gui.end()) {
      o.require(false, v.trajectory_id + ": no source");
      continue;
    }
    testkit::OracleReport report;
    testkit::check_variant(v, ms->second, gs->second, report);
    for (const auto& f : report.failures) o.require(false, f);
    for (const auto& [idx, direction] : testkit::scan_boundaries(v)) scanned.insert({v.trajectory_id, idx, direction});
  }
  for (const auto& rec : read_jsonl(a / "d_critical.jsonl")) {
    exported.insert({rec.at("trajectory_id").get<std::string>(), rec.at("step_index").get<std::size_t>(),
                     rec.at("direction").get<std::string>()});
  }
  o.require(scanned == exported, "critical steps: " + std::to_string(exported.size()) + " exported vs " +
                                     std::to_string(scanned.size()) + " boundaries");
  o.require(mixed > 0 && !scanned.empty(), "no interleaved variants with switches");
  o.detail = std::to_string(variants) + " variants (" + std::to_string(mixed) + " mixed), " +
             std::to_string(exported.size()) + " critical steps, replay byte-identical";
  return o;
}

Outcome merge_tree_validation() {
  Outcome o;
  long long checked = 0;
  const std::vector<std::pair<int, int>> limits{{2, 1}, {2, 2}, {3, 1}, {3, 2}, {4, 3}};
  for (const auto& [b, h] : limits) {
    for (int n = 1; n <= 5; ++n) {
      std::vector<std::vector<MergeNode>> roots;
      testkit::forests(n, b + 1, h + 1, n, {}, roots);
      std::vector<std::size_t> ident(static_cast<std::size_t>(n));
      std::iota(ident.begin(), ident.end(), 0u);
      long long accepted = 0;
      auto check = [&](const MergeNode& shape, const std::vector<std::size_t>& labels, std::size_t leaves,
                       bool identity) {
        MergeTree t;
        t.root = shape;
        std::size_t next = 0;
        testkit::label_leaves(t.root, labels, next);
        const bool got = validate_merge_tree(t, leaves, b, h).empty();
        ++checked;
        if (identity && got) ++accepted;
        o.require(got == testkit::oracle_tree_valid(t.root, leaves, b, h), "disagreement on " + to_json(t).dump());
      };
      for (const auto& kids : roots) {
        const MergeNode shape = MergeNode::make_internal(kids);
        check(shape, ident, n, true);
        auto perm = ident;
        if (n <= 4) {
          while (std::next_permutation(perm.begin(), perm.end())) check(shape, perm, n, false);
        } else {
          std::reverse(perm.begin(), perm.end());
          check(shape, perm, n, false);
        }
        auto dup = ident;
        dup.back() = dup.front();
        check(shape, dup, n, false);
        check(shape, ident, n + 1, false);
      }
      o.require(accepted == testkit::count_valid_trees(n, b, h),
                "B=" + std::to_string(b) + " H=" + std::to_string(h) + " n=" + std::to_string(n) + " count");
    }
  }
  o.detail = std::to_string(checked) + " labelled trees checked";
  return o;
}

Outcome message_protocol() {
  Outcome o;
  const Json cases = Json::parse(read_file(testkit::golden_dir() / "contexts.json"));
  const std::map<std::string, std::size_t> expected_counts{{"first_step", 2}, {"windowed", 12}, {"no_history", 2}};
  for (const auto& c : cases) {
    const std::string name = c.at("name").get<std::string>();
    AgentContext ctx;
    ctx.system_prompt = c.at("system_prompt");
    ctx.instruction = c.at("instruction");
    ctx.actions = c.at("actions").get<std::vector<std::string>>();
    ctx.responses = c.at("responses").get<std::vector<std::string>>();
    ctx.screenshots = c.at("screenshots").get<std::vector<std::string>>();
    ctx.tool_calling_results = c.at("tool_calling_results").get<std::vector<std::string>>();
    ctx.history_n = c.at("history_n");
    ctx.current_screenshot = c.at("current_screenshot");
    ctx.current_result = c.at("current_result");
    const auto msgs = build_messages(ctx);
    const std::string got = to_json(msgs).dump(2) + "\n";
    o.require(got == read_file(testkit::golden_dir() / ("messages_" + name + ".json")), name + " not byte-exact");
    o.require(msgs.size() == expected_counts.at(name), name + " message count");
    if (name == "windowed") {
      const std::string first = msgs.at(1).content.at(0).value;
      o.require(first.find("Step 1: ") != std::string::npos && first.find("Step 2: ") != std::string::npos &&
                    first.find("Step 3: ") == std::string::npos,
                "pre-window text");
    }
  }
  Rng rng(6);
  int round_trips = 0;
  for (int i = 0; i < 100; ++i) {
    ParsedTurn t;
    t.action_text = "Step " + std::to_string(rng.uniform_index(1000)) + " \"quoted\" {x} é";
    t.function_name = rng.bernoulli(0.5) ? "computer_use" : "app_tool_" + std::to_string(i);
    t.arguments = t.function_name == "computer_use"
                      ? Json{{"action", "left_click"}, {"coordinate", {int(rng.uniform_index(1001)), 7}}}
                      : Json{{"text", "line\n<b>{}</b>?"}, {"n", int(rng.uniform_index(50))}};
    try {
      const std::string raw = render_model_output(t);
      const bool ok = parse_model_output(raw) == t && render_model_output(parse_model_output(raw)) == raw;
      o.require(ok, "round trip " + std::to_string(i));
      round_trips += ok;
    } catch (const std::exception& e) {
      o.require(false, std::string("round trip threw: ") + e.what());
    }
  }
  o.detail = std::to_string(cases.size()) + " goldens byte-exact, " + std::to_string(round_trips) + " round trips";
  return o;
}

Outcome metric_formulas() {
  Outcome o;
  const std::vector<EvalResult> hand{{"b1", 1, true, 10, 2, 0}, {"b2", 1, true, 20, 1, 0}, {"b3", 1, false, 30, 0, 0},
                                     {"n1", -1, true, 5, 0, 0}, {"n2", -1, false, 5, 0, 0}};
  o.require(compute_tir(hand) == 0.6, "TIR hand count");
  o.require(compute_acs({hand[0], hand[1]}) == 15.0, "ACS [10, 20]");

  Rng rng(31);
  std::vector<EvalResult> zero;
  for (int i = 0; i < 333; ++i) zero.push_back({"t" + std::to_string(i), i % 3 ? 1 : -1, rng.bernoulli(0.3), 9, 0, 0});
  const auto table = metric_table(zero);
  o.require(*table.beneficial.tir == 0.0, "zero-tool beneficial TIR");
  o.require(*table.non_beneficial.tir == *table.non_beneficial.accuracy, "zero-tool non-beneficial identity");

  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<EvalResult> rs;
    const std::size_t n = 1 + rng.uniform_index(50);
    for (std::size_t i = 0; i < n; ++i) {
      rs.push_back({"t", rng.bernoulli(0.5) ? 1 : -1, rng.bernoulli(0.6), 1 + int(rng.uniform_index(30)),
                    int(rng.uniform_index(4)), 0});
    }
    o.require(compute_tir(rs) <= compute_accuracy(rs), "TIR > accuracy on trial " + std::to_string(trial));
  }
  o.detail = "hand counts, zero-tool identity, 1000 random sets";
  return o;
}

Outcome reward_shaping() {
  Outcome o;
  const auto suite = sim::parse_suite(Json::parse(read_file(testkit::data_dir() / "sim_suite.json")));
  const RunConfig cfg = parse_run_config(layer_config({}));
  const double base_acs = compute_acs(sim::evaluate_gui_only(suite));

  auto run = [&](bool ablation) {
    sim::TrainConfig tc = cfg.sim;
    if (ablation) {
      tc.reward.lambda = 0;
      tc.reward.beta = 0;
    }
    const auto result = sim::train_toy_policy(suite, tc);
    return sim::evaluate_policy(result.policy, suite, cfg.eval_episodes, cfg.seed);
  };
  const auto t0 = std::chrono::steady_clock::now();
  const auto full = run(false);
  const double full_secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const double full_tir = compute_tir(full);
  const double ratio = compute_acs(full) / base_acs;
  const auto abl = run(true);
  const double abl_tir = compute_tir(abl);

  const bool full_ok = full_tir >= 0.9 && ratio <= 0.6 && full_secs < 60 && cfg.sim.iterations <= 300;
  o.require(full_ok, "full reward: TIR " + fmt("%.4f", full_tir) + ", steps ratio " + fmt("%.3f", ratio));
  const bool ablation_ok = abl_tir <= 0.5;
  o.require(ablation_ok, "ablation TIR " + fmt("%.4f", abl_tir) + " > 0.5");
  // Only the ablation half is a ledgered deviation; a regression in the
  // full-reward half is a real failure.
  o.known_deviation = full_ok && !ablation_ok;
  o.detail = "full TIR " + fmt("%.4f", full_tir) + ", steps " + fmt("%.3f", ratio) + "x GUI-only; ablation TIR " +
             fmt("%.4f", abl_tir);
  return o;
}

Outcome statistics_report() {
  Outcome o;
  std::vector<Trajectory> corpus;
  std::vector<ToolDefinition> tools;
  for (int i = 0; i < 20; ++i) tools.push_back(testkit::make_tool("app_tool_" + std::to_string(i)));
  for (int i = 0; i < 100; ++i) {
    Trajectory t;
    t.trajectory_id = "s" + std::to_string(i);
    t.goal = "g";
    const std::size_t pool = i < 75 ? 20 : 19;  // 75*20 + 25*19 = 1975
    const std::size_t calls = i < 89 ? 8 : 7;   // 89*8 + 11*7 = 789
    t.tool_pool = testkit::library(std::vector<ToolDefinition>(tools.begin(), tools.begin() + pool));
    for (std::size_t k = 0; k < calls; ++k) t.steps.push_back(testkit::tool_step(k, "app_tool_" + std::to_string(k)));
    t.steps.push_back(testkit::click_step(calls));
    t.steps.push_back(testkit::terminate_step(calls + 1));
    corpus.push_back(std::move(t));
  }
  const auto stats = compute_dataset_stats(corpus);
  o.require(stats.avg_tool_pool_size == 19.75, "avg_tool_pool_size " + fmt("%.17g", stats.avg_tool_pool_size));
  o.require(stats.avg_executed_tools_per_traj == 7.89,
            "avg_executed_tools_per_traj " + fmt("%.17g", stats.avg_executed_tools_per_traj));
  const Json j = to_json(stats);
  for (const char* k : {"trajectory_count", "step_count", "unique_tool_count", "granularity_histogram",
                        "avg_tool_pool_size", "avg_executed_tools_per_traj"}) {
    o.require(j.contains(k), std::string("report lacks ") + k);
  }
  o.detail = "avg_tool_pool_size " + fmt("%.2f", stats.avg_tool_pool_size) + ", avg_executed " +
             fmt("%.2f", stats.avg_executed_tools_per_traj);
  return o;
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    double budget_s;  // 0 = no runtime bound
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria = {
      {1, "reward exactness", 1, reward_exactness},
      {2, "reward properties", 10, reward_properties},
      {3, "dynamic filtering oracle", 0, dynamic_filtering},
      {4, "pipeline invariants", 30, pipeline_invariants},
      {5, "merge-tree validation", 0, merge_tree_validation},
      {6, "message protocol goldens", 0, message_protocol},
      {7, "metric formulas", 0, metric_formulas},
      {8, "reward-shaping demonstration", 60, reward_shaping},
      {9, "statistics report", 0, statistics_report},
  };
  int unexpected = 0;
  int known = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.require(false, std::string("threw: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (c.budget_s > 0 && secs >= c.budget_s) {
      o.require(false, "runtime " + fmt("%.2f", secs) + " s over budget");
      o.known_deviation = false;
    }
    std::string tag = o.pass ? "PASS" : (o.known_deviation ? "FAIL (known deviation)" : "FAIL");
    std::printf("[%s] %d %s: %s (%.2f s)\n", tag.c_str(), c.id, c.name, o.detail.c_str(), secs);
    for (const auto& p : o.problems) std::printf("       - %s\n", p.c_str());
    if (!o.pass) (o.known_deviation ? known : unexpected) += 1;
  }
  std::printf("%d unexpected failure(s), %d known deviation(s)\n", unexpected, known);
  return unexpected == 0 ? 0 : 1;
}
