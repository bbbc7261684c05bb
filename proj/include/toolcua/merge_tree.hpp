#pragma once

#include <optional>
#include <string>
#include <vector>

#include "toolcua/common.hpp"

namespace toolcua {

// A node is either a leaf (index into the fine steps) or an internal merge.
// The root is a grouping container: it is never materialized as a tool and
// does not count toward the coarse height, so the identity tree is simply
// root -> [0, 1, ..., n-1].
struct MergeNode {
  std::optional<std::size_t> leaf;
  std::string summary;
  std::vector<MergeNode> children;

  bool is_leaf() const { return leaf.has_value(); }

  static MergeNode make_leaf(std::size_t i) {
    MergeNode n;
    n.leaf = i;
    return n;
  }
  static MergeNode make_internal(std::vector<MergeNode> kids, std::string summary = {}) {
    MergeNode n;
    n.children = std::move(kids);
    n.summary = std::move(summary);
    return n;
  }

  friend bool operator==(const MergeNode&, const MergeNode&) = default;
};

struct MergeTree {
  MergeNode root;
};

inline MergeTree identity_tree(std::size_t n) {
  std::vector<MergeNode> kids;
  for (std::size_t i = 0; i < n; ++i) kids.push_back(MergeNode::make_leaf(i));
  return {MergeNode::make_internal(std::move(kids), "identity")};
}

inline MergeNode parse_merge_node(const Json& j) {
  if (j.is_number_integer()) {
    if (j.get<long long>() < 0) throw ParseError("merge tree: negative leaf index");
    return MergeNode::make_leaf(j.get<std::size_t>());
  }
  if (!j.is_object()) throw ParseError("merge tree: node must be a leaf index or an object");
  auto it = j.find("children");
  if (it == j.end() || !it->is_array()) throw ParseError("merge tree: internal node without children array");
  MergeNode node;
  node.summary = detail::string_or_empty(j, "summary");
  for (const auto& c : *it) node.children.push_back(parse_merge_node(c));
  return node;
}

// Accepts either {"tree": node} (the planning output) or a bare node.
inline MergeTree parse_merge_tree(const Json& j) {
  if (j.is_object() && j.contains("tree")) return {parse_merge_node(j.at("tree"))};
  return {parse_merge_node(j)};
}

inline Json to_json(const MergeNode& n) {
  if (n.is_leaf()) return Json(*n.leaf);
  Json kids = Json::array();
  for (const auto& c : n.children) kids.push_back(to_json(c));
  Json j = Json::object();
  j["summary"] = n.summary;
  j["children"] = std::move(kids);
  return j;
}

inline Json to_json(const MergeTree& t) { return Json{{"tree", to_json(t.root)}}; }

// Leaves have height 0; an internal node sits one above its tallest child.
inline int node_height(const MergeNode& n) {
  if (n.is_leaf()) return 0;
  int h = 0;
  for (const auto& c : n.children) h = std::max(h, node_height(c));
  return h + 1;
}

// Coarse levels above the leaves, not counting the root container.
inline int coarse_height(const MergeTree& t) {
  if (t.root.is_leaf()) return 0;
  return node_height(t.root) - 1;
}

struct LeafSpan {
  std::size_t lo = 0;
  std::size_t hi = 0;  // inclusive
};

namespace detail {

inline std::optional<LeafSpan> check_node(const MergeNode& n, bool is_root, int max_branching, ValidationReport& out) {
  if (n.is_leaf()) return LeafSpan{*n.leaf, *n.leaf};
  const auto arity = static_cast<int>(n.children.size());
  if (is_root) {
    if (arity < 1) out.push_back({"root has no children", {}, std::nullopt});
  } else if (arity < 2 || arity > max_branching) {
    out.push_back({"arity out of range", std::to_string(arity), std::nullopt});
  }
  std::optional<LeafSpan> span;
  bool contiguous = true;
  for (const auto& c : n.children) {
    auto s = check_node(c, false, max_branching, out);
    if (!s) {
      contiguous = false;
      continue;
    }
    if (!span) {
      span = s;
    } else if (contiguous && s->lo == span->hi + 1) {
      span->hi = s->hi;
    } else {
      contiguous = false;
    }
  }
  if (!contiguous) {
    out.push_back({"children not contiguous", n.summary, std::nullopt});
    return std::nullopt;
  }
  return span;
}

}  // namespace detail

// A tree over n leaves is valid when an in-order walk yields 0..n-1 once
// each, every non-root internal node has 2..B children, sibling spans are
// contiguous, and there are at most H coarse levels.
inline ValidationReport validate_merge_tree(const MergeTree& tree, std::size_t n, int max_branching, int max_height) {
  if (max_branching < 2) throw std::invalid_argument("max_branching_factor must be at least 2");
  if (max_height < 1) throw std::invalid_argument("max_coarse_levels must be at least 1");
  ValidationReport out;
  if (tree.root.is_leaf()) {
    out.push_back({"root must be an internal node", {}, std::nullopt});
    return out;
  }
  const auto span = detail::check_node(tree.root, true, max_branching, out);
  if (n == 0) {
    out.push_back({"no leaves to merge", {}, std::nullopt});
  } else if (span && (span->lo != 0 || span->hi != n - 1)) {
    out.push_back({"leaves do not cover 0..n-1",
                   std::to_string(span->lo) + ".." + std::to_string(span->hi), std::nullopt});
  }
  const int h = coarse_height(tree);
  if (h > max_height) out.push_back({"tree too tall", std::to_string(h), std::nullopt});
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

// Span of leaves under a node. Only meaningful on a validated tree.
inline LeafSpan leaf_span(const MergeNode& n) {
  if (n.is_leaf()) return {*n.leaf, *n.leaf};
  return {leaf_span(n.children.front()).lo, leaf_span(n.children.back()).hi};
}

// Non-root internal nodes in post-order (children before parents).
inline void collect_merge_nodes(const MergeNode& n, std::vector<const MergeNode*>& out, bool is_root = true) {
  if (n.is_leaf()) return;
  for (const auto& c : n.children) collect_merge_nodes(c, out, false);
  if (!is_root) out.push_back(&n);
}

}  // namespace toolcua
