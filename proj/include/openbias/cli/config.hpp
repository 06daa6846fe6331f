#pragma once

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "openbias/core/error.hpp"
#include "openbias/core/hash.hpp"
#include "openbias/core/text.hpp"

namespace openbias::cli {

namespace fs = std::filesystem;

inline constexpr std::string_view kVersion = "0.1.0";

enum ExitCode : int { kSuccess = 0, kConfigFailure = 1, kProviderFailure = 2, kNumericalFailure = 3 };

inline int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::ProviderFailure: return kProviderFailure;
    case ErrorKind::NumericalFault: return kNumericalFailure;
    default: return kConfigFailure;
  }
}

/// Replaces ${NAME} and ${NAME:-default} in every string value.
inline std::string interpolate_env(std::string_view text) {
  std::string out;
  std::size_t i = 0;
  while (i < text.size()) {
    if (text[i] == '$' && i + 1 < text.size() && text[i + 1] == '{') {
      const auto close = text.find('}', i + 2);
      require(close != std::string_view::npos, ErrorKind::ConfigError, "unterminated ${ in '" + std::string(text) + "'");
      std::string expr(text.substr(i + 2, close - i - 2));
      std::optional<std::string> fallback;
      if (const auto d = expr.find(":-"); d != std::string::npos) {
        fallback = expr.substr(d + 2);
        expr.resize(d);
      }
      const char* v = std::getenv(expr.c_str());
      if (v != nullptr && *v != '\0') out += v;
      else if (fallback) out += *fallback;
      else fail(ErrorKind::ConfigError, "environment variable " + expr + " is not set");
      i = close + 1;
    } else {
      out += text[i++];
    }
  }
  return out;
}

inline void interpolate_env(Json& j) {
  if (j.is_string()) {
    j = interpolate_env(j.get<std::string>());
  } else if (j.is_structured()) {
    for (auto& v : j) interpolate_env(v);
  }
}

/// "a.b.c" -> JSON pointer "/a/b/c".
inline Json::json_pointer dotted_pointer(std::string_view key) {
  std::string p;
  std::size_t start = 0;
  while (start <= key.size()) {
    const auto dot = key.find('.', start);
    const auto part = key.substr(start, dot == std::string_view::npos ? std::string_view::npos : dot - start);
    require(!part.empty(), ErrorKind::ConfigError, "malformed config key '" + std::string(key) + "'");
    p += "/" + std::string(part);
    if (dot == std::string_view::npos) break;
    start = dot + 1;
  }
  return Json::json_pointer(p);
}

/// Parses "key=value"; the value is read as JSON when possible, else as a string.
inline std::pair<std::string, Json> parse_override(std::string_view assignment) {
  const auto eq = assignment.find('=');
  require(eq != std::string_view::npos && eq > 0, ErrorKind::ConfigError,
          "override '" + std::string(assignment) + "' is not key=value");
  const std::string key(trim(assignment.substr(0, eq)));
  const std::string raw(assignment.substr(eq + 1));
  Json value;
  try {
    value = Json::parse(raw);
  } catch (const Json::parse_error&) {
    value = raw;
  }
  return {key, value};
}

/// Resolved configuration for one command. Values from the config file resolve
/// relative paths against the file's directory; command-line overrides resolve
/// against the working directory.
class Config {
 public:
  Config() : json_(Json::object()), base_dir_(fs::current_path()) {}

  static Config load(const std::optional<fs::path>& file, const std::vector<std::string>& overrides) {
    Config c;
    if (file) {
      try {
        c.json_ = Json::parse(read_file(*file));
      } catch (const Json::parse_error& e) {
        fail(ErrorKind::ConfigError, file->string() + ": " + e.what());
      }
      require(c.json_.is_object(), ErrorKind::ConfigError, file->string() + ": top level must be an object");
      c.base_dir_ = fs::absolute(*file).parent_path();
      c.file_ = fs::absolute(*file);
    }
    for (const auto& o : overrides) {
      auto [key, value] = parse_override(o);
      c.set(key, std::move(value));
    }
    interpolate_env(c.json_);
    return c;
  }

  void set(const std::string& key, Json value) {
    json_[dotted_pointer(key)] = std::move(value);
    overridden_.insert(key);
  }

  const Json& json() const { return json_; }
  const std::optional<fs::path>& file() const { return file_; }

  bool has(const std::string& key) const {
    const auto p = dotted_pointer(key);
    return json_.contains(p) && !json_[p].is_null();
  }

  const Json& at(const std::string& key) const {
    require(has(key), ErrorKind::ConfigError, "missing config key '" + key + "'");
    return json_[dotted_pointer(key)];
  }

  Json section(const std::string& key) const { return has(key) ? at(key) : Json::object(); }

  template <typename T>
  T get(const std::string& key, T fallback) const {
    if (!has(key)) return fallback;
    try {
      return at(key).get<T>();
    } catch (const Json::exception& e) {
      fail(ErrorKind::ConfigError, "config key '" + key + "': " + e.what());
    }
  }

  template <typename T>
  T get(const std::string& key) const {
    try {
      return at(key).get<T>();
    } catch (const Json::exception& e) {
      fail(ErrorKind::ConfigError, "config key '" + key + "': " + e.what());
    }
  }

  fs::path path(const std::string& key) const {
    fs::path p = get<std::string>(key);
    if (p.is_absolute()) return p;
    return (overridden_.count(key) ? fs::current_path() : base_dir_) / p;
  }

  std::optional<fs::path> optional_path(const std::string& key) const {
    if (!has(key)) return std::nullopt;
    return path(key);
  }

  std::uint64_t seed() const { return get<std::uint64_t>("seed", 0); }

  /// Hash over the canonical (sorted-key) dump of the resolved config, leaving
  /// out where the outputs go.
  std::string hash() const {
    Json j = json_;
    j.erase("run_dir");
    j.erase("run_root");
    return hex64(fnv1a64(j.dump()));
  }

 private:
  Json json_;
  fs::path base_dir_;
  std::optional<fs::path> file_;
  std::set<std::string> overridden_;
};

inline std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y%m%dT%H%M%SZ", &tm);
  return buf;
}

/// Output directory plus the manifest describing how it was produced.
class RunDir {
 public:
  RunDir(std::string command, const Config& cfg) : command_(std::move(command)), config_hash_(cfg.hash()) {
    if (cfg.has("run_dir")) {
      root_ = cfg.path("run_dir");
    } else {
      const fs::path parent = cfg.has("run_root") ? cfg.path("run_root") : fs::current_path() / "runs";
      root_ = parent / (command_ + "-" + utc_timestamp() + "-" + config_hash_.substr(0, 8));
    }
    fs::create_directories(root_);
    config_ = cfg.json();
    if (cfg.file()) record_input(*cfg.file());
  }

  const fs::path& path() const { return root_; }
  fs::path operator/(const fs::path& rel) const { return root_ / rel; }

  /// Hashes an input file into the manifest.
  void record_input(const fs::path& p) { inputs_[p.string()] = file_hash(p); }

  void note(const std::string& key, Json value) { extra_[key] = std::move(value); }

  void write(const fs::path& rel, std::string_view bytes) const { write_file(root_ / rel, bytes); }

  /// Writes manifest.json listing every file under the run directory with its
  /// hash. Contains no timestamps so reruns compare byte-equal.
  void finish() const {
    std::map<std::string, std::string> outputs;
    for (const auto& e : fs::recursive_directory_iterator(root_)) {
      if (!e.is_regular_file()) continue;
      const auto rel = fs::relative(e.path(), root_).generic_string();
      if (rel != "manifest.json") outputs[rel] = file_hash(e.path());
    }
    OrderedJson m;
    m["command"] = command_;
    m["version"] = kVersion;
    m["config_hash"] = config_hash_;
    m["config"] = config_;
    m["inputs"] = inputs_;
    m["outputs"] = outputs;
    for (const auto& [k, v] : extra_) m[k] = v;
    write_file(root_ / "manifest.json", m.dump(2) + "\n");
  }

 private:
  std::string command_;
  std::string config_hash_;
  fs::path root_;
  Json config_;
  std::map<std::string, std::string> inputs_;
  std::map<std::string, Json> extra_;
};

/// Streams a command talks to; tests substitute string streams.
struct Io {
  std::istream& in = std::cin;
  std::ostream& out = std::cout;
  std::ostream& err = std::cerr;
};

}  // namespace openbias::cli
