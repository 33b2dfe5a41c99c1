#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "failbench/error.hpp"
#include "failbench/version.hpp"

namespace failbench {

// FNV-1a, used for configuration digests and content digests in manifests.
inline std::uint64_t digest64(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ULL) {
  std::uint64_t h = seed;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = digits[v & 0xF];
    v >>= 4;
  }
  return out;
}

// Declarative key=value configuration files: one pair per line, '#' comments,
// surrounding whitespace ignored.
using ConfigMap = std::map<std::string, std::string>;

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline ConfigMap parse_config(const std::string& text) {
  ConfigMap cfg;
  std::istringstream is(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    require(eq != std::string::npos, Errc::config,
            "config line " + std::to_string(lineno) + " is not key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    require(!key.empty(), Errc::config, "empty key on config line " + std::to_string(lineno));
    require(cfg.emplace(key, val).second, Errc::config, "duplicate config key '" + key + "'");
  }
  return cfg;
}

inline std::string config_digest(const ConfigMap& cfg) {
  std::string canon;
  for (const auto& [k, v] : cfg) {
    canon += k;
    canon += '=';
    canon += v;
    canon += '\n';
  }
  return hex64(digest64(canon));
}

inline std::vector<std::string> split_list(const std::string& s, char sep = ',') {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, sep)) {
    cur = trim(cur);
    if (!cur.empty()) out.push_back(cur);
  }
  return out;
}

// Reproducibility stamp carried by every emitted report.
struct ReproStamp {
  std::optional<std::uint64_t> seed;
  std::string config_digest;
  std::string version{failbench::version};

  std::string csv_comment() const { return "# stamp: " + desc_text(); }

  std::string desc_text() const {
    std::string out;
    if (seed) out += "seed=" + std::to_string(*seed) + " ";
    out += "config_digest=" + config_digest + " version=" + version;
    return out;
  }
};

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), Errc::config, "cannot read '" + path.string() + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  require(out.good(), Errc::config, "cannot write '" + path.string() + "'");
  out << text;
  require(out.good(), Errc::config, "write failed for '" + path.string() + "'");
}

}  // namespace failbench
