#include <gtest/gtest.h>

#include "support.hpp"

using namespace toolcua;

TEST(Hashing, Sha256KnownVectors) {
  EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Hashing, Fnv1aAndSeedDerivation) {
  EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
  EXPECT_EQ(derive_seed(7, "x", 1), derive_seed(7, "x", 1));
  EXPECT_NE(derive_seed(7, "x", 1), derive_seed(7, "x", 2));
  EXPECT_NE(derive_seed(7, "x", 1), derive_seed(8, "x", 1));
  EXPECT_NE(derive_seed(7, "x", 1), derive_seed(7, "y", 1));
}

TEST(Rng, SameSeedSameStream) {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) ASSERT_EQ(a.next(), b.next());
}

TEST(Rng, BoundsHold) {
  Rng r(3);
  for (int i = 0; i < 10000; ++i) {
    const double u = r.uniform01();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    ASSERT_LT(r.uniform_index(7), 7u);
  }
  EXPECT_THROW(r.uniform_index(0), std::invalid_argument);
  EXPECT_FALSE(r.bernoulli(0.0));
  EXPECT_TRUE(r.bernoulli(1.0));
}

TEST(PyDumps, MatchesPythonSeparators) {
  Json j = Json::object();
  j["b"] = 1;
  j["a"] = Json::array({1, "x", nullptr, true});
  j["nested"] = Json{{"k", 2.5}};
  EXPECT_EQ(py_dumps(j), R"({"b": 1, "a": [1, "x", null, true], "nested": {"k": 2.5}})");
  EXPECT_EQ(py_dumps(Json::object()), "{}");
  EXPECT_EQ(py_dumps(Json::array()), "[]");
  // Non-ASCII passes through unescaped.
  EXPECT_EQ(py_dumps(Json("café")), "\"café\"");
}

TEST(FormatNamed, SubstitutesAndUnescapesBraces) {
  auto lookup = [](std::string_view name) { return "<" + std::string(name) + ">"; };
  EXPECT_EQ(format_named("a {x} b {{literal}} {y}", lookup), "a <x> b {literal} <y>");
  EXPECT_THROW(format_named("broken {x", lookup), ParseError);
  EXPECT_EQ(placeholder_names("{b} {a} {{c}} {b}"), (std::vector<std::string>{"a", "b"}));
}

TEST(Files, RoundTripAndErrors) {
  testkit::TempDir dir("common");
  const auto p = dir / "nested/dir/file.txt";
  write_file(p, "line1\r\n\nline2\n");
  EXPECT_EQ(read_file(p), "line1\r\n\nline2\n");
  EXPECT_EQ(split_lines(read_file(p)), (std::vector<std::string>{"line1", "line2"}));
  EXPECT_THROW(read_file(dir / "missing"), IoError);

  write_file(dir / "x.jsonl", "{\"a\":1}\nnot json\n");
  EXPECT_THROW(read_jsonl(dir / "x.jsonl"), ParseError);
  EXPECT_EQ(join_jsonl({Json{{"a", 1}}, Json{{"b", 2}}}), "{\"a\":1}\n{\"b\":2}\n");
}

TEST(Violations, DescribeAndLookup) {
  ValidationReport r{{"missing text", "", 3}, {"empty trajectory", "", std::nullopt}};
  EXPECT_TRUE(has_violation(r, "missing text"));
  EXPECT_FALSE(has_violation(r, "missing keys"));
  const std::string d = describe(r);
  EXPECT_NE(d.find("missing text"), std::string::npos);
  EXPECT_NE(d.find("3"), std::string::npos);
}
