#pragma once

// Minimal "key = value" text format shared by the hull, camera and scenario
// files. Lines may contain `#` comments; `[name]` opens a section. Keys may
// repeat (obstacle lists), values are whitespace-separated tokens.

#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace usvplan {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ConfigEntry {
  std::string key;
  std::vector<std::string> values;
  int line = 0;
};

class ConfigSection {
 public:
  explicit ConfigSection(std::string name = {}) : name_(std::move(name)) {}

  const std::string& name() const { return name_; }
  const std::vector<ConfigEntry>& entries() const { return entries_; }
  void add(ConfigEntry e) { entries_.push_back(std::move(e)); }

  bool has(const std::string& key) const { return find(key) != nullptr; }

  const ConfigEntry* find(const std::string& key) const {
    const ConfigEntry* found = nullptr;
    for (const auto& e : entries_)
      if (e.key == key) found = &e;  // last one wins
    return found;
  }

  std::vector<const ConfigEntry*> all(const std::string& key) const {
    std::vector<const ConfigEntry*> out;
    for (const auto& e : entries_)
      if (e.key == key) out.push_back(&e);
    return out;
  }

  double number(const std::string& key) const {
    const auto* e = find(key);
    if (!e) throw ConfigError(qualified(key) + ": missing key");
    return parse_number(*e, 0);
  }

  double number_or(const std::string& key, double fallback) const {
    return has(key) ? number(key) : fallback;
  }

  std::vector<double> numbers(const std::string& key, std::size_t expected) const {
    const auto* e = find(key);
    if (!e) throw ConfigError(qualified(key) + ": missing key");
    return parse_numbers(*e, expected);
  }

  std::string text(const std::string& key) const {
    const auto* e = find(key);
    if (!e || e->values.empty()) throw ConfigError(qualified(key) + ": missing key");
    std::string out = e->values.front();
    for (std::size_t i = 1; i < e->values.size(); ++i) out += " " + e->values[i];
    return out;
  }

  std::string text_or(const std::string& key, const std::string& fallback) const {
    return has(key) ? text(key) : fallback;
  }

  std::vector<double> parse_numbers(const ConfigEntry& e, std::size_t expected) const {
    if (expected != 0 && e.values.size() != expected)
      throw ConfigError(qualified(e.key) + " (line " + std::to_string(e.line) + "): expected " +
                        std::to_string(expected) + " numbers, got " +
                        std::to_string(e.values.size()));
    std::vector<double> out;
    out.reserve(e.values.size());
    for (std::size_t i = 0; i < e.values.size(); ++i) out.push_back(parse_number(e, i));
    return out;
  }

  double parse_number(const ConfigEntry& e, std::size_t idx) const {
    if (idx >= e.values.size())
      throw ConfigError(qualified(e.key) + " (line " + std::to_string(e.line) +
                        "): missing value");
    const std::string& s = e.values[idx];
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v))
      throw ConfigError(qualified(e.key) + " (line " + std::to_string(e.line) +
                        "): not a finite number: '" + s + "'");
    return v;
  }

 private:
  std::string qualified(const std::string& key) const {
    return name_.empty() ? key : name_ + "." + key;
  }

  std::string name_;
  std::vector<ConfigEntry> entries_;
};

class ConfigFile {
 public:
  static ConfigFile parse(std::istream& in) {
    ConfigFile cfg;
    cfg.sections_.emplace_back("");
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      trim(line);
      if (line.empty()) continue;
      if (line.front() == '[') {
        if (line.back() != ']')
          throw ConfigError("line " + std::to_string(lineno) + ": unterminated section header");
        std::string name = line.substr(1, line.size() - 2);
        trim(name);
        cfg.sections_.emplace_back(name);
        continue;
      }
      auto eq = line.find('=');
      if (eq == std::string::npos)
        throw ConfigError("line " + std::to_string(lineno) + ": expected 'key = value'");
      ConfigEntry e;
      e.key = line.substr(0, eq);
      trim(e.key);
      e.line = lineno;
      if (e.key.empty()) throw ConfigError("line " + std::to_string(lineno) + ": empty key");
      std::istringstream vs(line.substr(eq + 1));
      for (std::string tok; vs >> tok;) e.values.push_back(tok);
      cfg.sections_.back().add(std::move(e));
    }
    return cfg;
  }

  static ConfigFile parse_string(const std::string& text) {
    std::istringstream in(text);
    return parse(in);
  }

  static ConfigFile load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open '" + path + "'");
    return parse(in);
  }

  /// Keys that appear before any section header.
  const ConfigSection& root() const { return sections_.front(); }

  const ConfigSection* section(const std::string& name) const {
    for (const auto& s : sections_)
      if (s.name() == name) return &s;
    return nullptr;
  }

  const ConfigSection& require(const std::string& name) const {
    const auto* s = section(name);
    if (!s) throw ConfigError("missing section [" + name + "]");
    return *s;
  }

 private:
  static void trim(std::string& s) {
    const char* ws = " \t\r\n";
    auto b = s.find_first_not_of(ws);
    if (b == std::string::npos) {
      s.clear();
      return;
    }
    s = s.substr(b, s.find_last_not_of(ws) - b + 1);
  }

  std::vector<ConfigSection> sections_;
};

}  // namespace usvplan
