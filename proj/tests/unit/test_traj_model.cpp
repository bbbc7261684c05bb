#include <gtest/gtest.h>

#include "support.hpp"

using namespace toolcua;
using testkit::click_step;
using testkit::terminate_step;
using testkit::tool_step;

namespace {

Trajectory single(Step s) {
  Trajectory t;
  t.trajectory_id = "t";
  t.goal = "g";
  t.steps.push_back(std::move(s));
  return t;
}

std::vector<std::string> codes(const ValidationReport& r) {
  std::vector<std::string> out;
  for (const auto& v : r) out.push_back(v.code);
  return out;
}

}  // namespace

TEST(ValidateTrajectory, MinimalTerminateIsValid) {
  EXPECT_TRUE(validate_trajectory(single(terminate_step(0))).empty());
}

TEST(ValidateTrajectory, TerminateNotLast) {
  Trajectory t;
  t.trajectory_id = "t";
  for (std::size_t i = 0; i < 5; ++i) t.steps.push_back(i == 1 ? terminate_step(i) : click_step(i));
  const auto r = validate_trajectory(t);
  ASSERT_EQ(r.size(), 1u);
  EXPECT_EQ(r[0].code, "terminate not last");
  EXPECT_EQ(r[0].step_index, 1u);
}

TEST(ValidateTrajectory, UnknownToolAgainstPool) {
  Trajectory t = single(tool_step(0, "ghost_tool"));
  t.steps.push_back(terminate_step(1));
  t.tool_pool = testkit::library({testkit::make_tool("real_tool"), testkit::terminate_tool()});
  EXPECT_EQ(codes(validate_trajectory(t)), std::vector<std::string>{"unknown tool"});
}

TEST(ValidateTrajectory, GuiFieldInvariants) {
  auto with = [](GuiKind k) {
    Step s;
    GuiAction a;
    a.kind = k;
    s.action = a;
    return single(s);
  };
  EXPECT_EQ(codes(validate_trajectory(with(GuiKind::key))), std::vector<std::string>{"missing keys"});
  EXPECT_EQ(codes(validate_trajectory(with(GuiKind::type))), std::vector<std::string>{"missing text"});
  EXPECT_EQ(codes(validate_trajectory(with(GuiKind::scroll))), std::vector<std::string>{"missing pixels"});
  EXPECT_EQ(codes(validate_trajectory(with(GuiKind::wait))), std::vector<std::string>{"missing time"});
  EXPECT_EQ(codes(validate_trajectory(with(GuiKind::left_click))), std::vector<std::string>{"missing coordinate"});
  EXPECT_EQ(codes(validate_trajectory(with(GuiKind::answer))), std::vector<std::string>{"answer action not in enum"});
  EXPECT_TRUE(validate_trajectory(with(GuiKind::answer), nullptr, {true}).empty());

  EXPECT_EQ(codes(validate_trajectory(single(click_step(0, 1001, 5)))),
            std::vector<std::string>{"coordinate out of range"});
  EXPECT_TRUE(validate_trajectory(single(click_step(0, 1000, 0))).empty());
}

TEST(ValidateTrajectory, ToolResponseConsistency) {
  Step s = tool_step(0, "x");
  s.tool_response->success = false;  // but no error_message
  EXPECT_EQ(codes(validate_trajectory(single(s))), std::vector<std::string>{"tool response inconsistent"});
  s.tool_response.reset();
  EXPECT_EQ(codes(validate_trajectory(single(s))), std::vector<std::string>{"missing tool response"});
  EXPECT_EQ(codes(validate_trajectory(single(tool_step(0, "computer_use")))),
            std::vector<std::string>{"reserved tool name"});
}

TEST(ValidateTrajectory, OrderingAndCounts) {
  Trajectory t;
  t.trajectory_id = "t";
  EXPECT_EQ(codes(validate_trajectory(t)), std::vector<std::string>{"empty trajectory"});
  t.steps = {click_step(0), click_step(0), terminate_step(2), terminate_step(3)};
  const auto c = codes(validate_trajectory(t));
  EXPECT_NE(std::find(c.begin(), c.end(), "step indices not increasing"), c.end());
  EXPECT_NE(std::find(c.begin(), c.end(), "multiple terminate actions"), c.end());
  EXPECT_NE(std::find(c.begin(), c.end(), "terminate not last"), c.end());
}

TEST(ValidateTrajectory, ArgumentsCheckedAgainstSchema) {
  Trajectory t = single(tool_step(0, "rename", Json{{"target", 5}}));
  t.steps.push_back(terminate_step(1));
  t.tool_pool = testkit::library({testkit::make_tool("rename", "fine", {"target"}), testkit::terminate_tool()});
  EXPECT_EQ(codes(validate_trajectory(t)), std::vector<std::string>{"invalid tool arguments"});
  std::get<ToolCallAction>(t.steps[0].action).arguments = Json{{"target", "a.txt"}};
  EXPECT_TRUE(validate_trajectory(t).empty());
}

TEST(Serialization, RoundTripIsByteIdentical) {
  const auto corpus = read_corpus(testkit::data_dir() / "sample_corpus.jsonl");
  ASSERT_EQ(corpus.size(), 22u);
  for (const auto& t : corpus) {
    const std::string once = serialize_trajectory(t);
    EXPECT_EQ(serialize_trajectory(parse_trajectory_line(once)), once) << t.trajectory_id;
  }
}

TEST(Serialization, RoundTripCarriesToolFields) {
  Trajectory t = single(tool_step(0, "rename", Json{{"target", "a"}}));
  t.steps[0].anchor_frame = 3;
  t.steps[0].leaf_span = std::array<std::size_t, 2>{0, 2};
  t.steps[0].tool_response = ToolResponse{false, nullptr, std::string("denied")};
  t.steps.push_back(terminate_step(1, TaskStatus::failure));
  t.tool_pool = testkit::library({testkit::make_tool("rename", "fine", {"target"}), testkit::terminate_tool()});
  t.terminal_status = TerminalStatus::failure;
  const std::string once = serialize_trajectory(t);
  const Trajectory back = parse_trajectory_line(once);
  EXPECT_EQ(back.steps, t.steps);
  EXPECT_EQ(serialize_trajectory(back), once);
  EXPECT_EQ(to_json(back)["schema_version"], 1);
}

TEST(Serialization, ActionAliasesNormalize) {
  const std::string line =
      R"({"schema_version":1,"trajectory_id":"a","goal":"g","application_tags":[],"terminal_status":"success",)"
      R"("steps":[{"index":0,"observation":"","thought":"","action_text":"x","action":{"type":"gui","kind":"click","coordinate":[1,2]}},)"
      R"({"index":1,"observation":"","thought":"","action_text":"y","action":{"type":"gui","kind":"triple_click","coordinate":[1,2]}},)"
      R"({"index":2,"observation":"","thought":"","action_text":"z","action":{"type":"gui","kind":"hscroll","pixels":-3}}]})";
  const auto t = parse_trajectory_line(line);
  EXPECT_EQ(std::get<GuiAction>(t.steps[0].action).kind, GuiKind::left_click);
  EXPECT_EQ(std::get<GuiAction>(t.steps[1].action).kind, GuiKind::double_click);
  EXPECT_EQ(std::get<GuiAction>(t.steps[2].action).kind, GuiKind::scroll);
}

TEST(Serialization, MalformedLinesThrowParseError) {
  EXPECT_THROW(parse_trajectory_line("{"), ParseError);
  EXPECT_THROW(parse_trajectory_line(R"({"schema_version":1})"), ParseError);
}

TEST(TerminalStatus, Classification) {
  Trajectory t = testkit::gui_trajectory("a", 2);
  EXPECT_EQ(classify_terminal_status(t, 30), TerminalStatus::success);
  t.steps.pop_back();
  EXPECT_EQ(classify_terminal_status(t, 30), TerminalStatus::failure);
  EXPECT_EQ(classify_terminal_status(t, 2), TerminalStatus::truncated);
}

TEST(DatasetStats, SingleTrajectoryAverages) {
  Trajectory t = single(tool_step(0, "a"));
  t.steps.push_back(tool_step(1, "b"));
  t.steps.push_back(terminate_step(2));
  t.tool_pool = testkit::library({testkit::make_tool("a"), testkit::make_tool("b"), testkit::make_tool("c")});
  const auto s = compute_dataset_stats({t});
  EXPECT_DOUBLE_EQ(s.avg_tool_pool_size, 3.0);
  EXPECT_DOUBLE_EQ(s.avg_executed_tools_per_traj, 2.0);
  EXPECT_EQ(s.step_count, 3u);
}

TEST(DatasetStats, UniqueToolsBySetUnion) {
  Trajectory a = testkit::gui_trajectory("a", 1), b = testkit::gui_trajectory("b", 1);
  a.tool_pool = testkit::library({testkit::make_tool("a"), testkit::make_tool("b")});
  b.tool_pool = testkit::library({testkit::make_tool("b"), testkit::make_tool("c", "coarse")});
  const auto s = compute_dataset_stats({a, b});
  EXPECT_EQ(s.unique_tool_count, 3u);
  EXPECT_EQ(s.granularity_histogram.fine, 2u);
  EXPECT_EQ(s.granularity_histogram.mid, 1u);
}

TEST(DatasetStats, EmptyDatasetRejected) {
  try {
    compute_dataset_stats({});
    FAIL();
  } catch (const std::invalid_argument& e) {
    EXPECT_STREQ(e.what(), "empty dataset");
  }
}

TEST(DatasetStats, ReportFieldsPresent) {
  const auto j = to_json(compute_dataset_stats({testkit::gui_trajectory("a", 2)}));
  for (const char* k : {"trajectory_count", "step_count", "unique_tool_count", "granularity_histogram",
                        "avg_tool_pool_size", "avg_executed_tools_per_traj"}) {
    EXPECT_TRUE(j.contains(k)) << k;
  }
}
