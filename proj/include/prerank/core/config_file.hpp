/*
 * Copyright 2026 The Prerank Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <charconv>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "prerank/core/error.hpp"
#include "prerank/core/log_io.hpp"

namespace prerank {

// Flat `key = value` text configuration. Lines starting with '#' are
// comments. Later assignments override earlier ones, which is how command
// line overrides are layered on top of a file.
class KeyValueConfig {
 public:
  KeyValueConfig() = default;

  static KeyValueConfig Parse(std::istream& in) {
    KeyValueConfig config;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      std::string_view view = Trim(StripCr(line));
      if (view.empty() || view.front() == '#') continue;
      const std::size_t eq = view.find('=');
      if (eq == std::string_view::npos) {
        throw Error(ErrorCode::kMalformedLine, "expected key = value", line_no);
      }
      const std::string_view key = Trim(view.substr(0, eq));
      if (key.empty()) throw Error(ErrorCode::kMalformedLine, "empty key", line_no);
      config.Set(std::string(key), std::string(Trim(view.substr(eq + 1))));
    }
    return config;
  }

  static KeyValueConfig Load(const std::string& path) {
    auto in = OpenInput(path);
    return Parse(in);
  }

  void Set(const std::string& key, const std::string& value) { values_[key] = value; }
  bool Has(const std::string& key) const { return values_.count(key) != 0; }
  const std::map<std::string, std::string>& values() const { return values_; }

  std::string GetString(const std::string& key, const std::string& fallback) const {
    auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
  }

  double GetDouble(const std::string& key, double fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    return ParseDouble(it->second, key, 0);
  }

  template <typename Int>
  Int GetInt(const std::string& key, Int fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    return ParseInteger<Int>(it->second, key, 0);
  }

  bool GetBool(const std::string& key, bool fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    const std::string& v = it->second;
    if (v == "1" || v == "true" || v == "yes") return true;
    if (v == "0" || v == "false" || v == "no") return false;
    throw Error(ErrorCode::kBadField, "cannot parse boolean " + key + " from '" + v + "'");
  }

  std::vector<int> GetIntList(const std::string& key, const std::vector<int>& fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    std::vector<int> out;
    std::stringstream ss(it->second);
    std::string part;
    while (std::getline(ss, part, ',')) {
      const std::string_view p = Trim(part);
      if (!p.empty()) out.push_back(ParseInteger<int>(p, key, 0));
    }
    return out;
  }

  std::string Serialize() const {
    std::string out;
    for (const auto& [k, v] : values_) out += k + " = " + v + "\n";
    return out;
  }

  static std::string_view Trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
    return s;
  }

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace prerank
