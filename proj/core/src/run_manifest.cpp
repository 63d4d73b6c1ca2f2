#include "ihtp/run_manifest.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <ctime>
#include <sstream>
#include <thread>

#include <unistd.h>

#include "ihtp/error.hpp"
#include "ihtp/io.hpp"

namespace ihtp {

std::string library_version() { return IHTP_VERSION; }

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

nlohmann::json host_descriptor() {
  char name[256] = {};
  if (gethostname(name, sizeof name - 1) != 0) name[0] = '\0';
  return {{"hostname", name},
          {"hardware_threads", std::thread::hardware_concurrency()},
          {"compiler", __VERSION__}};
}

RunManifest start_manifest(std::string command, nlohmann::json config) {
  RunManifest m;
  m.tool_version = library_version();
  m.command = std::move(command);
  m.config = std::move(config);
  m.host = host_descriptor();
  m.started_at = utc_timestamp();
  return m;
}

std::string RunManifest::content_hash() const {
  return io::json_hash({{"tool_version", tool_version},
                        {"command", command},
                        {"config", config},
                        {"input_hashes", input_hashes},
                        {"seeds", seeds}});
}

nlohmann::json RunManifest::to_json() const {
  return {{"format", "ihtp-run-manifest"},
          {"tool_version", tool_version},
          {"command", command},
          {"config", config},
          {"input_hashes", input_hashes},
          {"seeds", seeds},
          {"host", host},
          {"started_at", started_at},
          {"finished_at", finished_at},
          {"content_hash", content_hash()}};
}

RunManifest RunManifest::from_json(const nlohmann::json& doc) {
  require(doc.value("format", "") == "ihtp-run-manifest", ErrorKind::Io, "not a run manifest");
  RunManifest m;
  m.tool_version = doc.at("tool_version").get<std::string>();
  m.command = doc.at("command").get<std::string>();
  m.config = doc.at("config");
  m.input_hashes = doc.at("input_hashes").get<std::map<std::string, std::string>>();
  m.seeds = doc.at("seeds").get<std::map<std::string, std::uint64_t>>();
  m.host = doc.at("host");
  m.started_at = doc.at("started_at").get<std::string>();
  m.finished_at = doc.at("finished_at").get<std::string>();
  return m;
}

std::filesystem::path RunManifest::write_next_to(const std::filesystem::path& output) const {
  std::filesystem::path path = output;
  path += ".manifest.json";
  RunManifest copy = *this;
  if (copy.finished_at.empty()) copy.finished_at = utc_timestamp();
  io::write_json(path, copy.to_json());
  return path;
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

KeyValueConfig KeyValueConfig::parse(const std::string& text, const std::string& origin) {
  KeyValueConfig cfg;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    require(eq != std::string::npos, ErrorKind::InvalidArgument,
            origin + ":" + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    require(!key.empty(), ErrorKind::InvalidArgument, origin + ":" + std::to_string(lineno) + ": empty key");
    cfg.values_[key] = trim(line.substr(eq + 1));
  }
  return cfg;
}

KeyValueConfig KeyValueConfig::load(const std::filesystem::path& path) {
  return parse(io::read_text(path), path.string());
}

std::optional<std::string> KeyValueConfig::get(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  return it->second;
}

std::string KeyValueConfig::get_or(const std::string& key, const std::string& fallback) const {
  return get(key).value_or(fallback);
}

double KeyValueConfig::get_double(const std::string& key, double fallback) const {
  const auto v = get(key);
  if (!v) return fallback;
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
  require(ec == std::errc() && ptr == v->data() + v->size(), ErrorKind::InvalidArgument,
          "config key '" + key + "' is not a number: " + *v);
  return out;
}

long long KeyValueConfig::get_int(const std::string& key, long long fallback) const {
  const auto v = get(key);
  if (!v) return fallback;
  long long out = 0;
  const auto [ptr, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
  require(ec == std::errc() && ptr == v->data() + v->size(), ErrorKind::InvalidArgument,
          "config key '" + key + "' is not an integer: " + *v);
  return out;
}

bool KeyValueConfig::get_bool(const std::string& key, bool fallback) const {
  const auto v = get(key);
  if (!v) return fallback;
  if (*v == "true" || *v == "1" || *v == "yes" || *v == "on") return true;
  if (*v == "false" || *v == "0" || *v == "no" || *v == "off") return false;
  fail(ErrorKind::InvalidArgument, "config key '" + key + "' is not a boolean: " + *v);
}

void KeyValueConfig::merge(const KeyValueConfig& overrides) {
  for (const auto& [k, v] : overrides.values_) values_[k] = v;
}

std::vector<std::string> KeyValueConfig::unknown_keys(const std::vector<std::string>& known) const {
  std::vector<std::string> out;
  for (const auto& [k, v] : values_)
    if (std::find(known.begin(), known.end(), k) == known.end()) out.push_back(k);
  return out;
}

nlohmann::json KeyValueConfig::to_json() const { return values_; }

}  // namespace ihtp
