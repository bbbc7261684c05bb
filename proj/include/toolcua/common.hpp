#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>
#include <openssl/evp.h>

namespace toolcua {

// Insertion-ordered JSON keeps serialized records byte-stable across runs.
using Json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input (JSON shape, enum spelling, ...).
class ParseError : public Error {
 public:
  using Error::Error;
};

// Input was well-formed but failed a domain rule. Maps to CLI exit code 1.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Filesystem or transport failure. Maps to CLI exit code 2.
class IoError : public Error {
 public:
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Validation reports
// ---------------------------------------------------------------------------

struct Violation {
  std::string code;    // stable short message, e.g. "terminate not last"
  std::string detail;  // free-form context
  std::optional<std::size_t> step_index;

  friend bool operator==(const Violation&, const Violation&) = default;
  friend auto operator<=>(const Violation&, const Violation&) = default;
};

using ValidationReport = std::vector<Violation>;

inline bool has_violation(const ValidationReport& report, std::string_view code) {
  return std::any_of(report.begin(), report.end(),
                     [&](const Violation& v) { return v.code == code; });
}

inline std::string describe(const Violation& v) {
  std::string out = v.code;
  if (v.step_index) out += " at step " + std::to_string(*v.step_index);
  if (!v.detail.empty()) out += " (" + v.detail + ")";
  return out;
}

inline std::string describe(const ValidationReport& report) {
  std::string out;
  for (const auto& v : report) {
    if (!out.empty()) out += "; ";
    out += describe(v);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Hashing
// ---------------------------------------------------------------------------

inline std::string sha256_hex(std::string_view data) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest.data(), &len, EVP_sha256(), nullptr) != 1) {
    throw Error("sha256 digest failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 0xF]);
  }
  return out;
}

inline std::uint64_t fnv1a64(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Derives an independent stream seed from a run seed and a label (e.g. a
// trajectory id) so per-item randomness does not depend on processing order.
inline std::uint64_t derive_seed(std::uint64_t seed, std::string_view label, std::uint64_t salt = 0) {
  return splitmix64(splitmix64(seed ^ fnv1a64(label)) + salt);
}

// ---------------------------------------------------------------------------
// Deterministic RNG
// ---------------------------------------------------------------------------

// std::mt19937_64 output is fixed by the standard; the distributions are not,
// so the mapping to indices and reals is done here.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  // Uniform in [0, 1) with 53 bits of precision.
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // Uniform in [0, n), unbiased.
  std::size_t uniform_index(std::size_t n) {
    if (n == 0) throw std::invalid_argument("uniform_index: empty range");
    const std::uint64_t bound = static_cast<std::uint64_t>(n);
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t x = engine_();
    while (x >= limit) x = engine_();
    return static_cast<std::size_t>(x % bound);
  }

  bool bernoulli(double p) { return uniform01() < p; }

 private:
  std::mt19937_64 engine_;
};

// ---------------------------------------------------------------------------
// JSON rendering
// ---------------------------------------------------------------------------

// Renders JSON the way Python's json.dumps does with default separators and
// ensure_ascii=False: `{"a": 1, "b": [1, 2]}`. Key order is preserved.
inline void py_dumps_into(const Json& value, std::string& out) {
  switch (value.type()) {
    case Json::value_t::object: {
      out.push_back('{');
      bool first = true;
      for (auto it = value.begin(); it != value.end(); ++it) {
        if (!first) out += ", ";
        first = false;
        out += Json(it.key()).dump();
        out += ": ";
        py_dumps_into(it.value(), out);
      }
      out.push_back('}');
      break;
    }
    case Json::value_t::array: {
      out.push_back('[');
      bool first = true;
      for (const auto& item : value) {
        if (!first) out += ", ";
        first = false;
        py_dumps_into(item, out);
      }
      out.push_back(']');
      break;
    }
    default:
      out += value.dump();
  }
}

inline std::string py_dumps(const Json& value) {
  std::string out;
  py_dumps_into(value, out);
  return out;
}

// Python str.format semantics restricted to named fields: `{name}` is
// substituted, `{{` and `}}` are literal braces.
template <typename Lookup>
std::string format_named(std::string_view body, Lookup&& lookup) {
  std::string out;
  out.reserve(body.size());
  for (std::size_t i = 0; i < body.size(); ++i) {
    const char c = body[i];
    if (c == '{') {
      if (i + 1 < body.size() && body[i + 1] == '{') {
        out.push_back('{');
        ++i;
        continue;
      }
      const auto close = body.find('}', i + 1);
      if (close == std::string_view::npos) throw ParseError("unterminated placeholder in template");
      out += lookup(body.substr(i + 1, close - i - 1));
      i = close;
    } else if (c == '}') {
      if (i + 1 < body.size() && body[i + 1] == '}') ++i;
      out.push_back('}');
    } else {
      out.push_back(c);
    }
  }
  return out;
}

inline std::vector<std::string> placeholder_names(std::string_view body) {
  std::vector<std::string> names;
  format_named(body, [&](std::string_view name) {
    if (std::find(names.begin(), names.end(), name) == names.end()) names.emplace_back(name);
    return std::string{};
  });
  std::sort(names.begin(), names.end());
  return names;
}

// ---------------------------------------------------------------------------
// Files
// ---------------------------------------------------------------------------

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& path, std::string_view content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw IoError("short write to " + path.string());
}

inline std::vector<std::string> split_lines(std::string_view text) {
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (!line.empty()) lines.emplace_back(line);
    start = end + 1;
  }
  return lines;
}

inline std::vector<Json> read_jsonl(const std::filesystem::path& path) {
  std::vector<Json> records;
  std::size_t line_no = 0;
  for (const auto& line : split_lines(read_file(path))) {
    ++line_no;
    try {
      records.push_back(Json::parse(line));
    } catch (const Json::parse_error& e) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return records;
}

inline std::string join_jsonl(const std::vector<Json>& records) {
  std::string out;
  for (const auto& r : records) {
    out += r.dump();
    out.push_back('\n');
  }
  return out;
}

// ---------------------------------------------------------------------------
// Small JSON accessors
// ---------------------------------------------------------------------------

namespace detail {

inline const Json& require(const Json& obj, std::string_view key, std::string_view context) {
  if (!obj.is_object()) throw ParseError(std::string(context) + ": expected an object");
  auto it = obj.find(std::string(key));
  if (it == obj.end()) throw ParseError(std::string(context) + ": missing field '" + std::string(key) + "'");
  return *it;
}

inline std::string require_string(const Json& obj, std::string_view key, std::string_view context) {
  const Json& v = require(obj, key, context);
  if (!v.is_string()) throw ParseError(std::string(context) + ": field '" + std::string(key) + "' must be a string");
  return v.get<std::string>();
}

inline std::optional<std::string> optional_string(const Json& obj, std::string_view key, std::string_view context) {
  auto it = obj.find(std::string(key));
  if (it == obj.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) throw ParseError(std::string(context) + ": field '" + std::string(key) + "' must be a string");
  return it->get<std::string>();
}

inline std::string string_or_empty(const Json& obj, std::string_view key) {
  auto it = obj.find(std::string(key));
  if (it == obj.end() || !it->is_string()) return {};
  return it->get<std::string>();
}

}  // namespace detail

}  // namespace toolcua
