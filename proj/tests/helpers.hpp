#pragma once

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <regex>
#include <sstream>
#include <string>
#include <string_view>
#include <sys/wait.h>
#include <vector>

#include "json.hpp"
#include "pccforge/core.hpp"

namespace testutil {

namespace fs = std::filesystem;

class TempDir {
 public:
  TempDir() {
    static std::atomic<unsigned> counter{0};
    std::random_device rd;
    path_ = fs::temp_directory_path() /
            ("pccforge_" + std::to_string(rd()) + "_" +
             std::to_string(counter.fetch_add(1)));
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(std::string_view sub) const { return path_ / sub; }

 private:
  fs::path path_;
};

inline std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void spit(const fs::path& p, std::string_view body) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out.write(body.data(), static_cast<std::streamsize>(body.size()));
}

inline pccforge::LabeledCloud random_cloud(std::size_t n, std::uint64_t seed,
                                           float extent = 50.0f) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> coord(-extent, extent);
  std::uniform_real_distribution<float> rem(0.0f, 1.0f);
  std::uniform_int_distribution<int> cls(0, pccforge::kClassCount - 1);
  std::uniform_int_distribution<int> inst(0, 65535);
  pccforge::LabeledCloud cloud;
  cloud.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    cloud.push_back({coord(rng), coord(rng), coord(rng), rem(rng)},
                    static_cast<pccforge::ClassId>(cls(rng)),
                    static_cast<std::uint16_t>(inst(rng)));
  }
  return cloud;
}

// Just enough of JSON Schema to check the shipped schema files: type,
// required, properties, additionalProperties, items, enum, pattern,
// minimum/maximum.
inline bool matches_schema(const nlohmann::json& value,
                           const nlohmann::json& schema, std::string* why) {
  auto fail = [&](const std::string& msg) {
    if (why) *why = msg;
    return false;
  };

  if (schema.contains("type")) {
    auto accepts = [&](const std::string& t) {
      if (t == "object") return value.is_object();
      if (t == "array") return value.is_array();
      if (t == "string") return value.is_string();
      if (t == "integer") return value.is_number_integer();
      if (t == "number") return value.is_number();
      if (t == "boolean") return value.is_boolean();
      if (t == "null") return value.is_null();
      return false;
    };
    const auto& type = schema["type"];
    bool ok = false;
    if (type.is_string()) {
      ok = accepts(type.get<std::string>());
    } else {
      for (const auto& t : type) ok = ok || accepts(t.get<std::string>());
    }
    if (!ok) return fail("type mismatch at " + value.dump());
  }

  if (schema.contains("enum")) {
    bool ok = false;
    for (const auto& candidate : schema["enum"]) ok = ok || candidate == value;
    if (!ok) return fail("enum mismatch: " + value.dump());
  }

  if (value.is_string() && schema.contains("pattern")) {
    const std::regex re(schema["pattern"].get<std::string>());
    if (!std::regex_search(value.get<std::string>(), re)) {
      return fail("pattern mismatch: " + value.dump());
    }
  }

  if (value.is_number()) {
    const double v = value.get<double>();
    if (schema.contains("minimum") && v < schema["minimum"].get<double>()) {
      return fail("below minimum: " + value.dump());
    }
    if (schema.contains("maximum") && v > schema["maximum"].get<double>()) {
      return fail("above maximum: " + value.dump());
    }
  }

  if (value.is_object()) {
    if (schema.contains("required")) {
      for (const auto& key : schema["required"]) {
        if (!value.contains(key.get<std::string>())) {
          return fail("missing required key: " + key.get<std::string>());
        }
      }
    }
    const auto props = schema.contains("properties")
                           ? schema["properties"]
                           : nlohmann::json::object();
    for (const auto& [key, sub] : value.items()) {
      if (props.contains(key)) {
        if (!matches_schema(sub, props[key], why)) return false;
      } else if (schema.contains("additionalProperties") &&
                 schema["additionalProperties"].is_boolean() &&
                 !schema["additionalProperties"].get<bool>()) {
        return fail("unexpected key: " + key);
      }
    }
  }

  if (value.is_array() && schema.contains("items")) {
    for (const auto& element : value) {
      if (!matches_schema(element, schema["items"], why)) return false;
    }
  }

  return true;
}

inline nlohmann::json load_schema(const std::string& name) {
  const fs::path dir = PCCFORGE_SCHEMAS_DIR;
  return nlohmann::json::parse(slurp(dir / name));
}

struct CmdResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

// Runs the installed CLI binary (path from the PCCFORGE_BIN environment
// variable) with the given argument string.
inline CmdResult run_cli(const std::string& args) {
  const char* bin = std::getenv("PCCFORGE_BIN");
  if (bin == nullptr) throw std::runtime_error("PCCFORGE_BIN is not set");
  TempDir scratch;
  const fs::path out_file = scratch / "out";
  const fs::path err_file = scratch / "err";
  const std::string cmd = std::string(bin) + " " + args + " > " +
                          out_file.string() + " 2> " + err_file.string();
  const int raw = std::system(cmd.c_str());
  CmdResult result;
  result.exit_code = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  result.out = slurp(out_file);
  result.err = slurp(err_file);
  return result;
}

// Byte-level comparison of two directory trees.
inline bool same_tree(const fs::path& a, const fs::path& b, std::string* why) {
  auto listing = [](const fs::path& root) {
    std::vector<fs::path> rel;
    for (const auto& entry : fs::recursive_directory_iterator(root)) {
      if (entry.is_regular_file()) {
        rel.push_back(fs::relative(entry.path(), root));
      }
    }
    std::sort(rel.begin(), rel.end());
    return rel;
  };
  const auto la = listing(a);
  const auto lb = listing(b);
  if (la != lb) {
    if (why) *why = "file lists differ";
    return false;
  }
  for (const auto& rel : la) {
    if (slurp(a / rel) != slurp(b / rel)) {
      if (why) *why = "content differs: " + rel.string();
      return false;
    }
  }
  return true;
}

}  // namespace testutil
