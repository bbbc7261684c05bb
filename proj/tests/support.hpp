#pragma once

// Fixture builders and independent oracles shared by the unit tests and the
// acceptance runner. Oracles here deliberately avoid calling the library
// routine they check.

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include <sys/wait.h>
#include <unistd.h>

#include "toolcua/toolcua.hpp"

#ifndef TOOLCUA_DATA_DIR
#define TOOLCUA_DATA_DIR "data"
#endif
#ifndef TOOLCUA_GOLDEN_DIR
#define TOOLCUA_GOLDEN_DIR "tests/golden"
#endif
#ifndef TOOLCUA_CLI_PATH
#define TOOLCUA_CLI_PATH "toolcua"
#endif

namespace testkit {

namespace fs = std::filesystem;
using namespace toolcua;

inline fs::path data_dir() { return TOOLCUA_DATA_DIR; }
inline fs::path golden_dir() { return TOOLCUA_GOLDEN_DIR; }
inline std::string cli_path() { return TOOLCUA_CLI_PATH; }

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = fs::temp_directory_path() /
            ("toolcua-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

// Runs the CLI with stdout/stderr sent to files, returns the exit status.
inline int run_cli(const std::string& args, const fs::path& log_dir) {
  const std::string cmd = "\"" + cli_path() + "\" " + args + " >\"" + (log_dir / "stdout.txt").string() + "\" 2>\"" +
                          (log_dir / "stderr.txt").string() + "\"";
  const int rc = std::system(cmd.c_str());
  if (rc == -1) return -1;
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

// Every pipeline stage in order, each reading the previous stage's artifact
// from `out`. Returns the first non-zero exit status, or 0.
inline int run_pipeline(const fs::path& corpus, const fs::path& out, const fs::path& cache, const std::string& mode,
                        const std::string& extra = "") {
  const std::string common = " --out \"" + out.string() + "\" --cache-dir \"" + cache.string() +
                             "\" --llm-mode " + mode + " --seed 7 " + extra;
  auto q = [&](const std::string& name) { return "\"" + (out / name).string() + "\""; };
  const std::vector<std::string> stages = {
      "ingest --input \"" + corpus.string() + "\"",
      "filter --input " + q("corpus.jsonl"),
      "synth-tools --input " + q("filtered.jsonl"),
      "gen-tool-traj --input " + q("filtered.jsonl") + " --libraries " + q("libraries.jsonl"),
      "merge --input " + q("tool_trajectories.jsonl"),
      "interleave --input " + q("merged.jsonl") + " --gui " + q("filtered.jsonl"),
      "extract-critical --input " + q("d_all.jsonl"),
  };
  fs::create_directories(out);
  for (const auto& s : stages) {
    const int rc = run_cli(s + common, out);
    if (rc != 0) return rc;
  }
  return 0;
}

// ---------------------------------------------------------------------------
// Builders
// ---------------------------------------------------------------------------

inline Step click_step(std::size_t index, int x = 100, int y = 200) {
  Step s;
  s.index = index;
  s.observation = "screen " + std::to_string(index);
  s.action_text = "Click element " + std::to_string(index);
  GuiAction a;
  a.kind = GuiKind::left_click;
  a.coordinate = std::array<int, 2>{x, y};
  s.action = a;
  s.screenshot_ref = "file:///shots/" + std::to_string(index) + ".png";
  return s;
}

inline Step terminate_step(std::size_t index, TaskStatus status = TaskStatus::success) {
  Step s;
  s.index = index;
  s.action_text = "Finish the task";
  GuiAction a;
  a.kind = GuiKind::terminate;
  a.status = status;
  s.action = a;
  s.screenshot_ref = "file:///shots/" + std::to_string(index) + ".png";
  return s;
}

inline Step tool_step(std::size_t index, const std::string& name, Json args = Json::object()) {
  Step s;
  s.index = index;
  s.action_text = "Call " + name;
  s.action = ToolCallAction{name, std::move(args)};
  s.tool_response = ToolResponse{true, Json("ok"), std::nullopt};
  return s;
}

// n clicks followed by a terminate.
inline Trajectory gui_trajectory(const std::string& id, std::size_t n_clicks, const std::string& app = "chrome") {
  Trajectory t;
  t.trajectory_id = id;
  t.goal = "Do something in " + app;
  t.application_tags = {app};
  for (std::size_t i = 0; i < n_clicks; ++i) t.steps.push_back(click_step(i, 10 + static_cast<int>(i), 20));
  t.steps.push_back(terminate_step(n_clicks));
  return t;
}

inline ToolDefinition make_tool(const std::string& name, const std::string& granularity = "fine",
                                std::vector<std::string> string_params = {}) {
  ToolDefinition t;
  t.name = name;
  t.description = "Performs " + name;
  t.granularity = granularity;
  for (const auto& p : string_params) t.parameters.push_back({p, ParameterSpec{"the " + p, Json("string")}});
  t.returns = canonical_returns();
  t.category = "interaction";
  return t;
}

inline ToolDefinition terminate_tool() {
  ToolDefinition t;
  t.name = "terminate";
  t.description = "Ends the task and reports its outcome";
  t.granularity = "coarse";
  t.has_parameters_field = false;
  t.returns = canonical_returns();
  t.category = "terminate";
  return t;
}

inline ToolLibrary library(std::vector<ToolDefinition> tools) {
  ToolLibrary lib;
  lib.tools = std::move(tools);
  return lib;
}

// ---------------------------------------------------------------------------
// Oracles
// ---------------------------------------------------------------------------

enum class Kind { gui, tool, end };

inline Kind kind_of(const Step& s) {
  if (const auto* g = std::get_if<GuiAction>(&s.action)) return g->kind == GuiKind::terminate ? Kind::end : Kind::gui;
  return std::get<ToolCallAction>(s.action).tool_name == "terminate" ? Kind::end : Kind::tool;
}

// Every adjacent (i-1, i) pair whose kinds differ, ignoring the episode end.
inline std::vector<std::pair<std::size_t, std::string>> scan_boundaries(const Trajectory& t) {
  std::vector<std::pair<std::size_t, std::string>> out;
  for (std::size_t i = 1; i < t.steps.size(); ++i) {
    const Kind a = kind_of(t.steps[i - 1]);
    const Kind b = kind_of(t.steps[i]);
    if (a == Kind::end || b == Kind::end || a == b) continue;
    out.emplace_back(i, b == Kind::tool ? "gui_to_tool" : "tool_to_gui");
  }
  return out;
}

// Index of the terminating step of a source GUI trajectory.
inline std::size_t last_frame(const Trajectory& gui) {
  for (std::size_t i = 0; i < gui.steps.size(); ++i) {
    if (kind_of(gui.steps[i]) == Kind::end) return i;
  }
  return gui.steps.size();
}

struct OracleReport {
  std::vector<std::string> failures;
  bool ok() const { return failures.empty(); }
  void fail(const std::string& what) { failures.push_back(what); }
};

// Conservation and pool soundness of one interleaved variant against the tool
// trajectory it came from and the GUI trajectory the tool steps are anchored in.
inline void check_variant(const Trajectory& variant, const Trajectory& source, const Trajectory& gui,
                          OracleReport& report) {
  const std::string id = variant.trajectory_id;
  std::set<std::string> pool;
  if (variant.tool_pool) {
    for (const auto& t : variant.tool_pool->tools) pool.insert(t.name);
  }
  std::set<std::string> source_pool;
  if (source.tool_pool) {
    for (const auto& t : source.tool_pool->tools) source_pool.insert(t.name);
  }
  std::set<std::string> replaced;
  for (const auto& name : source_pool) {
    if (!pool.count(name)) replaced.insert(name);
  }
  for (const auto& name : pool) {
    if (!source_pool.count(name)) report.fail(id + ": pool gained tool " + name);
  }

  // Walk the source, predicting the variant's steps.
  std::size_t expected = 0;
  std::size_t prev_anchor = 0;
  std::vector<const Step*> predicted;
  for (const auto& s : source.steps) {
    if (kind_of(s) == Kind::end) {
      predicted.push_back(&s);
      ++expected;
      continue;
    }
    if (!s.anchor_frame) {
      report.fail(id + ": source step without anchor");
      return;
    }
    const std::size_t anchor = *s.anchor_frame;
    const bool is_replaced = kind_of(s) == Kind::tool && replaced.count(std::get<ToolCallAction>(s.action).tool_name);
    if (is_replaced) {
      for (std::size_t k = prev_anchor; k < anchor; ++k) predicted.push_back(&gui.steps.at(k));
      expected += anchor - prev_anchor;
    } else {
      predicted.push_back(&s);
      ++expected;
    }
    prev_anchor = anchor;
  }
  if (variant.steps.size() != expected) {
    report.fail(id + ": step count " + std::to_string(variant.steps.size()) + " != " + std::to_string(expected));
    return;
  }
  for (std::size_t i = 0; i < expected; ++i) {
    const Step& got = variant.steps[i];
    const Step& want = *predicted[i];
    if (got.index != i) report.fail(id + ": step " + std::to_string(i) + " has index " + std::to_string(got.index));
    if (got.action != want.action || got.action_text != want.action_text) {
      report.fail(id + ": step " + std::to_string(i) + " differs from its source");
    }
  }

  // Final anchored frame equals the source's final frame.
  std::optional<std::size_t> final_anchor;
  for (const auto& s : variant.steps) {
    if (kind_of(s) != Kind::end && s.anchor_frame) final_anchor = s.anchor_frame;
  }
  if (final_anchor != last_frame(gui)) report.fail(id + ": final anchored frame mismatch");

  // Pool soundness.
  for (const auto& s : variant.steps) {
    if (kind_of(s) != Kind::tool) continue;
    const auto& name = std::get<ToolCallAction>(s.action).tool_name;
    if (!pool.count(name)) report.fail(id + ": calls " + name + " outside its pool");
    if (replaced.count(name)) report.fail(id + ": calls replaced tool " + name);
  }
  if (kind_of(variant.steps.back()) != Kind::end) report.fail(id + ": terminate missing or replaced");
}

// Independent validity rule for merge trees: flattening gives 0..n-1, non-root
// internals have 2..B children, and at most H levels sit between root and leaves.
inline void flatten(const MergeNode& n, std::vector<std::size_t>& out) {
  if (n.leaf) {
    out.push_back(*n.leaf);
    return;
  }
  for (const auto& c : n.children) flatten(c, out);
}

inline int depth_below(const MergeNode& n) {
  if (n.leaf) return 0;
  int d = 0;
  for (const auto& c : n.children) d = std::max(d, 1 + depth_below(c));
  return d;
}

inline bool arity_ok(const MergeNode& n, int b, bool root) {
  if (n.leaf) return true;
  const int k = static_cast<int>(n.children.size());
  if (root ? k < 1 : (k < 2 || k > b)) return false;
  for (const auto& c : n.children) {
    if (!arity_ok(c, b, false)) return false;
  }
  return true;
}

inline bool oracle_tree_valid(const MergeNode& root, std::size_t n, int b, int h) {
  if (root.leaf || n == 0) return false;
  std::vector<std::size_t> leaves;
  flatten(root, leaves);
  if (leaves.size() != n) return false;
  for (std::size_t i = 0; i < n; ++i) {
    if (leaves[i] != i) return false;
  }
  return arity_ok(root, b, true) && depth_below(root) - 1 <= h;
}

// All non-root subtrees over `leaves` consecutive leaf slots with unlabeled
// leaves, arity 1..max_arity and height <= max_height. Leaf values are filled
// in later, so index 0 is a placeholder.
inline std::vector<MergeNode> subtrees(int leaves, int max_arity, int max_height);

inline void forests(int leaves, int max_arity, int max_height, int max_children, std::vector<MergeNode> prefix,
                    std::vector<std::vector<MergeNode>>& out) {
  if (leaves == 0) {
    if (!prefix.empty()) out.push_back(prefix);
    return;
  }
  if (static_cast<int>(prefix.size()) == max_children) return;
  for (int take = 1; take <= leaves; ++take) {
    for (auto& t : subtrees(take, max_arity, max_height)) {
      prefix.push_back(std::move(t));
      forests(leaves - take, max_arity, max_height, max_children, prefix, out);
      prefix.pop_back();
    }
  }
}

inline std::vector<MergeNode> subtrees(int leaves, int max_arity, int max_height) {
  std::vector<MergeNode> out;
  if (leaves == 1) out.push_back(MergeNode::make_leaf(0));
  if (max_height == 0) return out;
  std::vector<std::vector<MergeNode>> kids;
  forests(leaves, max_arity, max_height - 1, max_arity, {}, kids);
  for (auto& k : kids) out.push_back(MergeNode::make_internal(std::move(k)));
  return out;
}

inline void label_leaves(MergeNode& n, const std::vector<std::size_t>& labels, std::size_t& next) {
  if (n.leaf) {
    n.leaf = labels.at(next++);
    return;
  }
  for (auto& c : n.children) label_leaves(c, labels, next);
}

// Number of valid trees over n ordered leaves, by direct recurrence.
inline long long count_valid_trees(int n, int b, int h) {
  // sub[height][m]: non-root subtrees over m leaves with height <= height.
  std::vector<std::vector<long long>> sub(static_cast<std::size_t>(h) + 1,
                                          std::vector<long long>(static_cast<std::size_t>(n) + 1, 0));
  for (int lvl = 0; lvl <= h; ++lvl) {
    sub[lvl][1] = 1;
    if (lvl == 0) continue;
    // seq[k][m]: sequences of k children (height <= lvl-1) covering m leaves.
    std::vector<std::vector<long long>> seq(static_cast<std::size_t>(b) + 1,
                                            std::vector<long long>(static_cast<std::size_t>(n) + 1, 0));
    seq[0][0] = 1;
    for (int k = 1; k <= b; ++k) {
      for (int m = 1; m <= n; ++m) {
        for (int part = 1; part <= m; ++part) seq[k][m] += seq[k - 1][m - part] * sub[lvl - 1][part];
      }
    }
    for (int m = 2; m <= n; ++m) {
      for (int k = 2; k <= b; ++k) sub[lvl][m] += seq[k][m];
    }
  }
  // Root: any non-empty sequence of subtrees with height <= h.
  std::vector<long long> root(static_cast<std::size_t>(n) + 1, 0);
  root[0] = 1;
  for (int m = 1; m <= n; ++m) {
    for (int part = 1; part <= m; ++part) root[m] += root[m - part] * sub[h][part];
  }
  return root[n];
}

}  // namespace testkit
