#include <gtest/gtest.h>

#include "support.hpp"

using namespace toolcua;

namespace {

Bindings joint_bindings() {
  return {{"granularity_instruction", "g"}, {"goal", "Export"}, {"history", "None"},
          {"screenshot_description", "d"}, {"world_state", "None"}, {"tools", "[]"}};
}

}  // namespace

TEST(Templates, PlaceholderSets) {
  using V = std::vector<std::string>;
  EXPECT_EQ(placeholder_names(template_body(TemplateId::screenshot_description)), V{});
  EXPECT_EQ(placeholder_names(template_body(TemplateId::fix_tool)), (V{"error_msg", "meta_schema", "tool"}));
  EXPECT_EQ(placeholder_names(template_body(TemplateId::joint_generation)),
            (V{"goal", "granularity_instruction", "history", "screenshot_description", "tools", "world_state"}));
  EXPECT_EQ(placeholder_names(template_body(TemplateId::describe_and_locate)),
            (V{"num_candidates", "tool_name", "tool_parameters", "tool_response"}));
  EXPECT_EQ(placeholder_names(template_body(TemplateId::merge_tree_planning)),
            (V{"goal", "leaf_summary", "max_branching_factor", "max_coarse_levels", "max_leaf_index"}));
  EXPECT_EQ(placeholder_names(template_body(TemplateId::bottom_up_merge)), (V{"chunk_summary", "goal", "target_level"}));
  EXPECT_EQ(placeholder_names(template_body(TemplateId::tool_generation)).size(), 8u);
  EXPECT_EQ(placeholder_names(template_body(TemplateId::predict_screenshot)).size(), 6u);
}

TEST(Templates, RenderExamples) {
  const std::string desc = render_prompt(TemplateId::screenshot_description, {});
  EXPECT_EQ(desc.rfind("Describe this desktop screenshot in English.", 0), 0u);

  const std::string plan = render_prompt("merge_tree_planning", {{"goal", "g"},
                                                                 {"leaf_summary", "0: a"},
                                                                 {"max_leaf_index", "0"},
                                                                 {"max_branching_factor", "4"},
                                                                 {"max_coarse_levels", "2"}});
  EXPECT_NE(plan.find("between 2 and 4 contiguous children"), std::string::npos);
  EXPECT_EQ(plan.find("{max_branching_factor}"), std::string::npos);
}

TEST(Templates, UnboundPlaceholderNamed) {
  auto b = joint_bindings();
  b.erase("goal");
  try {
    render_prompt(TemplateId::joint_generation, b);
    FAIL();
  } catch (const std::invalid_argument& e) {
    EXPECT_STREQ(e.what(), "unbound placeholder: goal");
  }
  EXPECT_THROW(render_prompt("no_such_template", {}), std::invalid_argument);
}

TEST(CacheKey, SensitiveToEveryField) {
  auto base = CompletionRequest::make(TemplateId::joint_generation, joint_bindings(), {"file:///a.png"});
  const std::string k = cache_key(base);
  EXPECT_EQ(k, cache_key(base));
  EXPECT_EQ(k.rfind("v1-", 0), 0u);

  auto t = base;
  t.decode.temperature = 0.8000000000000001;
  EXPECT_NE(cache_key(t), k);
  auto a = base;
  a.attempt = 1;
  EXPECT_NE(cache_key(a), k);
  auto img = base;
  img.image_refs.push_back("file:///b.png");
  EXPECT_NE(cache_key(img), k);
  auto bind = base;
  bind.bindings["goal"] = "Export2";
  EXPECT_NE(cache_key(bind), k);
  auto len = base;
  len.decode.max_output_tokens = 100;
  EXPECT_NE(cache_key(len), k);

  // Field boundaries cannot be shifted between key and value.
  auto x = CompletionRequest::make(TemplateId::bottom_up_merge, {{"ab", "c"}});
  auto y = CompletionRequest::make(TemplateId::bottom_up_merge, {{"a", "bc"}});
  EXPECT_NE(cache_key(x), cache_key(y));
}

TEST(DecodeDefaults, ValidationPromptsRunCool) {
  EXPECT_DOUBLE_EQ(default_decode(TemplateId::fix_tool).temperature, 0.2);
  EXPECT_DOUBLE_EQ(default_decode(TemplateId::describe_and_locate).temperature, 0.2);
  EXPECT_DOUBLE_EQ(default_decode(TemplateId::tool_generation).temperature, 0.8);
}

TEST(MockClient, ReturnsCannedText) {
  MockClient m(std::string("{\"tools\": []}"));
  auto r = m.complete(CompletionRequest::make(TemplateId::screenshot_description, {}));
  EXPECT_EQ(r.text, "{\"tools\": []}");
  EXPECT_EQ(m.calls(), 1u);
  // Rendering happens before the handler, so unbound requests fail loudly.
  EXPECT_THROW(m.complete(CompletionRequest::make(TemplateId::fix_tool, {})), std::invalid_argument);
}

TEST(Cache, RecordThenReplay) {
  testkit::TempDir dir("cache");
  auto cache = std::make_shared<ResponseCache>(dir.path());
  auto inner = std::make_shared<MockClient>([](const CompletionRequest& r, const std::string&) {
    return "answer to attempt " + std::to_string(r.attempt);
  });
  CachingClient recorder(cache, CacheMode::record, inner);
  auto req = CompletionRequest::make(TemplateId::screenshot_description, {}, {"file:///x.png"});
  const auto first = recorder.complete(req);
  const auto again = recorder.complete(req);
  EXPECT_EQ(first, again);
  EXPECT_EQ(inner->calls(), 1u);

  CachingClient replay(cache, CacheMode::replay);
  EXPECT_EQ(replay.complete(req), first);
  EXPECT_EQ(replay.complete(req), first);

  auto miss = req;
  miss.attempt = 3;
  try {
    replay.complete(miss);
    FAIL();
  } catch (const UncachedRequest& e) {
    EXPECT_EQ(e.key(), cache_key(miss));
    EXPECT_NE(std::string(e.what()).find("uncached request"), std::string::npos);
  }
  EXPECT_EQ(cache->cache_id().substr(0, 6), "cache-");
  EXPECT_EQ(cache->cache_id().substr(cache->cache_id().size() - 2), "-1");
  EXPECT_THROW((void)CachingClient(cache, CacheMode::record), std::invalid_argument);
}

TEST(Cache, CorruptEntryIsIoError) {
  testkit::TempDir dir("cache-corrupt");
  auto cache = std::make_shared<ResponseCache>(dir.path());
  auto req = CompletionRequest::make(TemplateId::screenshot_description, {});
  write_file(cache->path_for(cache_key(req)), "{not json");
  CachingClient replay(cache, CacheMode::replay);
  EXPECT_THROW(replay.complete(req), IoError);
}

TEST(ExtractStructured, StripsProseAndFences) {
  EXPECT_EQ(extract_structured("Sure! Here it is:\n```json\n{\"a\": [1, 2]}\n```\nDone."), (Json{{"a", {1, 2}}}));
  EXPECT_EQ(extract_structured("[1, {\"b\": \"}\"}]"), Json::parse("[1, {\"b\": \"}\"}]"));
  EXPECT_THROW(extract_structured("no json here"), ParseError);
  EXPECT_THROW(extract_structured("{\"a\": 1} and {\"b\": 2}"), ParseError);
  EXPECT_THROW(extract_structured("{\"a\": 1"), ParseError);
}

TEST(CompleteJson, ReasksOnceThenFails) {
  int calls = 0;
  MockClient flaky([&](const CompletionRequest& r, const std::string&) {
    ++calls;
    return r.attempt == 0 ? std::string("prose only") : std::string("{\"ok\": true}");
  });
  const auto req = CompletionRequest::make(TemplateId::screenshot_description, {});
  EXPECT_EQ(complete_json(flaky, req), (Json{{"ok", true}}));
  EXPECT_EQ(calls, 2);

  MockClient broken(std::string("never json"));
  EXPECT_THROW(complete_json(broken, req), ParseError);
  EXPECT_EQ(broken.calls(), 2u);
}
