// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "tomosar/errors.hpp"

namespace tomosar {

/// A scalar, string or flat list from a key-value config file.
struct ConfigValue {
  enum class Kind { number, boolean, string, list };
  Kind kind = Kind::number;
  double number = 0.0;
  bool boolean = false;
  std::string text;
  std::vector<ConfigValue> items;
  int line = 0;
};

/// Subset of TOML: [section] headers, key = value lines, '#' comments,
/// numbers, booleans, double-quoted strings and single-line lists. Keys are
/// addressed as "section.key".
class Config {
 public:
  static Config parse(const std::string& text, const std::string& source = "<config>") {
    Config cfg;
    cfg.source_ = source;
    std::istringstream in(text);
    std::string raw;
    std::string section;
    int line_no = 0;
    while (std::getline(in, raw)) {
      ++line_no;
      std::string line = trim(strip_comment(raw));
      if (line.empty()) continue;
      if (line.front() == '[') {
        if (line.back() != ']') cfg.fail(line_no, "unterminated section header");
        section = trim(line.substr(1, line.size() - 2));
        if (section.empty() || !valid_key(section)) cfg.fail(line_no, "invalid section name '" + section + "'");
        continue;
      }
      const auto eq = line.find('=');
      if (eq == std::string::npos) cfg.fail(line_no, "expected 'key = value'");
      const std::string key = trim(line.substr(0, eq));
      if (!valid_key(key)) cfg.fail(line_no, "invalid key '" + key + "'");
      const std::string full = section.empty() ? key : section + "." + key;
      if (cfg.values_.count(full)) cfg.fail(line_no, "duplicate key '" + full + "'");
      std::size_t pos = 0;
      const std::string rhs = trim(line.substr(eq + 1));
      ConfigValue v = cfg.parse_value(rhs, pos, line_no);
      if (trim(rhs.substr(pos)).size() != 0) cfg.fail(line_no, "trailing characters after value of '" + full + "'");
      cfg.values_[full] = std::move(v);
    }
    return cfg;
  }

  static Config load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InvalidArgument("cannot open config file " + path.string());
    std::ostringstream s;
    s << in.rdbuf();
    return parse(s.str(), path.string());
  }

  bool has(const std::string& key) const { return values_.count(key) != 0; }

  double number(const std::string& key, double fallback) const {
    const ConfigValue* v = find(key);
    if (!v) return fallback;
    if (v->kind != ConfigValue::Kind::number) field_error(key, "expected a number");
    return v->number;
  }

  double number(const std::string& key) const {
    if (!has(key)) field_error(key, "required field is missing");
    return number(key, 0.0);
  }

  std::int64_t integer(const std::string& key, std::int64_t fallback) const {
    if (!has(key)) return fallback;
    const double d = number(key);
    if (d != std::floor(d) || std::abs(d) > 9.0e15) field_error(key, "expected an integer");
    return static_cast<std::int64_t>(d);
  }

  std::size_t count(const std::string& key, std::size_t fallback, std::size_t minimum = 0) const {
    const std::int64_t v = integer(key, static_cast<std::int64_t>(fallback));
    if (v < static_cast<std::int64_t>(minimum)) field_error(key, "must be >= " + std::to_string(minimum));
    return static_cast<std::size_t>(v);
  }

  bool boolean(const std::string& key, bool fallback) const {
    const ConfigValue* v = find(key);
    if (!v) return fallback;
    if (v->kind != ConfigValue::Kind::boolean) field_error(key, "expected true or false");
    return v->boolean;
  }

  std::string string(const std::string& key, const std::string& fallback) const {
    const ConfigValue* v = find(key);
    if (!v) return fallback;
    if (v->kind != ConfigValue::Kind::string) field_error(key, "expected a quoted string");
    return v->text;
  }

  std::vector<double> numbers(const std::string& key, const std::vector<double>& fallback) const {
    const ConfigValue* v = find(key);
    if (!v) return fallback;
    if (v->kind == ConfigValue::Kind::number) return {v->number};
    if (v->kind != ConfigValue::Kind::list) field_error(key, "expected a list of numbers");
    std::vector<double> out;
    for (const auto& it : v->items) {
      if (it.kind != ConfigValue::Kind::number) field_error(key, "expected a list of numbers");
      out.push_back(it.number);
    }
    return out;
  }

  std::vector<std::string> strings(const std::string& key, const std::vector<std::string>& fallback) const {
    const ConfigValue* v = find(key);
    if (!v) return fallback;
    if (v->kind == ConfigValue::Kind::string) return {v->text};
    if (v->kind != ConfigValue::Kind::list) field_error(key, "expected a list of strings");
    std::vector<std::string> out;
    for (const auto& it : v->items) {
      if (it.kind != ConfigValue::Kind::string) field_error(key, "expected a list of strings");
      out.push_back(it.text);
    }
    return out;
  }

  void set_number(const std::string& key, double v) {
    ConfigValue c;
    c.number = v;
    values_[key] = c;
  }

  void set_string(const std::string& key, const std::string& v) {
    ConfigValue c;
    c.kind = ConfigValue::Kind::string;
    c.text = v;
    values_[key] = c;
  }

  /// Rejects keys of the given sections that are not in `known`.
  void check_known(const std::set<std::string>& sections, const std::set<std::string>& known) const {
    for (const auto& [key, v] : values_) {
      const auto dot = key.find('.');
      const std::string section = dot == std::string::npos ? "" : key.substr(0, dot);
      if (!sections.count(section)) continue;
      if (!known.count(key)) field_error(key, "unknown field");
    }
  }

  [[noreturn]] void field_error(const std::string& key, const std::string& what) const {
    const ConfigValue* v = find(key);
    std::string where = source_;
    if (v && v->line > 0) where += ":" + std::to_string(v->line);
    throw InvalidArgument(where + ": field '" + key + "': " + what);
  }

  const std::string& source() const { return source_; }

 private:
  const ConfigValue* find(const std::string& key) const {
    auto it = values_.find(key);
    return it == values_.end() ? nullptr : &it->second;
  }

  [[noreturn]] void fail(int line, const std::string& what) const {
    throw InvalidArgument(source_ + ":" + std::to_string(line) + ": " + what);
  }

  static std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  }

  static std::string strip_comment(const std::string& s) {
    bool quoted = false;
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (s[i] == '"') quoted = !quoted;
      if (s[i] == '#' && !quoted) return s.substr(0, i);
    }
    return s;
  }

  static bool valid_key(const std::string& k) {
    if (k.empty()) return false;
    for (char c : k)
      if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.')) return false;
    return true;
  }

  ConfigValue parse_value(const std::string& s, std::size_t& pos, int line) const {
    while (pos < s.size() && (s[pos] == ' ' || s[pos] == '\t')) ++pos;
    if (pos >= s.size()) fail(line, "missing value");
    ConfigValue v;
    v.line = line;
    if (s[pos] == '"') {
      const auto end = s.find('"', pos + 1);
      if (end == std::string::npos) fail(line, "unterminated string");
      v.kind = ConfigValue::Kind::string;
      v.text = s.substr(pos + 1, end - pos - 1);
      pos = end + 1;
      return v;
    }
    if (s[pos] == '[') {
      v.kind = ConfigValue::Kind::list;
      ++pos;
      while (true) {
        while (pos < s.size() && (s[pos] == ' ' || s[pos] == '\t')) ++pos;
        if (pos >= s.size()) fail(line, "unterminated list");
        if (s[pos] == ']') {
          ++pos;
          return v;
        }
        ConfigValue item = parse_value(s, pos, line);
        if (item.kind == ConfigValue::Kind::list) fail(line, "nested lists are not supported");
        v.items.push_back(std::move(item));
        while (pos < s.size() && (s[pos] == ' ' || s[pos] == '\t')) ++pos;
        if (pos < s.size() && s[pos] == ',') ++pos;
      }
    }
    std::size_t end = pos;
    while (end < s.size() && s[end] != ',' && s[end] != ']' && s[end] != ' ' && s[end] != '\t') ++end;
    const std::string tok = s.substr(pos, end - pos);
    pos = end;
    if (tok == "true" || tok == "false") {
      v.kind = ConfigValue::Kind::boolean;
      v.boolean = tok == "true";
      return v;
    }
    std::string cleaned;
    for (char c : tok)
      if (c != '_') cleaned += c;
    std::size_t used = 0;
    try {
      v.number = std::stod(cleaned, &used);
    } catch (const std::exception&) {
      fail(line, "cannot parse value '" + tok + "'");
    }
    if (used != cleaned.size() || !std::isfinite(v.number)) fail(line, "cannot parse value '" + tok + "'");
    return v;
  }

  std::string source_;
  std::map<std::string, ConfigValue> values_;
};

}  // namespace tomosar
