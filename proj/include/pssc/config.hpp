#pragma once

// Flat "key = value" configuration files. '#' starts a comment; blank lines
// are ignored. Keys are unique; every key must be consumed by the reader
// unless it carries the "report." prefix, which run reports use for results
// so that a report can be fed back in as a config.

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "pssc/dataset.hpp"
#include "pssc/errors.hpp"

namespace pssc {

class KeyValueConfig {
 public:
  static KeyValueConfig parse(std::string_view text) {
    KeyValueConfig cfg;
    std::size_t pos = 0;
    std::size_t lineno = 0;
    while (pos < text.size()) {
      std::size_t eol = text.find('\n', pos);
      if (eol == std::string_view::npos) eol = text.size();
      std::string_view line = text.substr(pos, eol - pos);
      pos = eol + 1;
      ++lineno;
      if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
      line = detail::trim(line);
      if (line.empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string_view::npos)
        throw ConfigError("config line " + std::to_string(lineno) + ": expected 'key = value'");
      const std::string key(detail::trim(line.substr(0, eq)));
      const std::string value(detail::trim(line.substr(eq + 1)));
      if (key.empty()) throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
      if (!cfg.values_.emplace(key, value).second)
        throw ConfigError("config line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
    }
    return cfg;
  }

  static KeyValueConfig load(const std::string& path) {
    try {
      return parse(read_file(path));
    } catch (const IngestionError& e) {
      throw ConfigError(std::string("cannot read config: ") + e.what());
    }
  }

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  void set(const std::string& key, const std::string& value) { values_[key] = value; }

  std::string get(const std::string& key, const std::string& fallback) const {
    used_.insert(key);
    auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
  }

  double get_double(const std::string& key, double fallback) const {
    if (!has(key)) return get(key, ""), fallback;
    const std::string s = get(key, "");
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (s.empty() || end != s.c_str() + s.size()) throw ConfigError("config key '" + key + "': not a number");
    return v;
  }

  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const {
    if (!has(key)) return get(key, ""), fallback;
    const std::string s = get(key, "");
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
      throw ConfigError("config key '" + key + "': not a non-negative integer");
    return v;
  }

  std::size_t get_size(const std::string& key, std::size_t fallback) const {
    return static_cast<std::size_t>(get_u64(key, fallback));
  }

  bool get_bool(const std::string& key, bool fallback) const {
    if (!has(key)) return get(key, ""), fallback;
    const std::string s = get(key, "");
    if (s == "true" || s == "1" || s == "on" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "off" || s == "no") return false;
    throw ConfigError("config key '" + key + "': expected a boolean");
  }

  // Comma-separated list of sizes; empty string means an empty list.
  std::vector<std::size_t> get_sizes(const std::string& key, const std::vector<std::size_t>& fallback) const {
    if (!has(key)) return get(key, ""), fallback;
    const std::string s = get(key, "");
    std::vector<std::size_t> out;
    std::size_t p = 0;
    while (p < s.size()) {
      std::size_t c = s.find(',', p);
      if (c == std::string::npos) c = s.size();
      const auto tok = detail::trim(std::string_view(s).substr(p, c - p));
      std::size_t v = 0;
      const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
      if (tok.empty() || ec != std::errc() || ptr != tok.data() + tok.size())
        throw ConfigError("config key '" + key + "': expected comma-separated integers");
      out.push_back(v);
      p = c + 1;
    }
    return out;
  }

  // Throws on keys nobody asked for (typos).
  void reject_unknown() const {
    for (const auto& [k, _] : values_)
      if (!used_.count(k) && k.rfind("report.", 0) != 0) throw ConfigError("unknown config key '" + k + "'");
  }

 private:
  std::map<std::string, std::string> values_;
  mutable std::set<std::string> used_;
};

inline std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string format_sizes(const std::vector<std::size_t>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

}  // namespace pssc
