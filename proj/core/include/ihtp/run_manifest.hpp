#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace ihtp {

/// Provenance written next to every output artifact.
struct RunManifest {
  std::string tool_version;
  std::string command;
  nlohmann::json config = nlohmann::json::object();
  std::map<std::string, std::string> input_hashes;
  std::map<std::string, std::uint64_t> seeds;
  nlohmann::json host = nlohmann::json::object();
  std::string started_at;
  std::string finished_at;

  /// Hash over everything except host and timestamps.
  std::string content_hash() const;
  nlohmann::json to_json() const;
  static RunManifest from_json(const nlohmann::json& doc);
  /// Writes `<output>.manifest.json`.
  std::filesystem::path write_next_to(const std::filesystem::path& output) const;
};

RunManifest start_manifest(std::string command, nlohmann::json config);
std::string utc_timestamp();
nlohmann::json host_descriptor();
std::string library_version();

/// Flat `key = value` settings. `#` starts a comment; later assignments win.
class KeyValueConfig {
 public:
  static KeyValueConfig parse(const std::string& text, const std::string& origin = "<string>");
  static KeyValueConfig load(const std::filesystem::path& path);

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  std::optional<std::string> get(const std::string& key) const;
  std::string get_or(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  long long get_int(const std::string& key, long long fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;

  void set(const std::string& key, std::string value) { values_[key] = std::move(value); }
  /// Values from `overrides` replace ours.
  void merge(const KeyValueConfig& overrides);
  /// Keys not in `known`, for reporting typos.
  std::vector<std::string> unknown_keys(const std::vector<std::string>& known) const;

  const std::map<std::string, std::string>& values() const { return values_; }
  nlohmann::json to_json() const;

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace ihtp
