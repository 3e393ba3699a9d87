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
#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "prerank/core/error.hpp"
#include "prerank/core/query.hpp"
#include "prerank/core/types.hpp"

namespace prerank {

inline std::vector<std::string_view> SplitTabs(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t tab = line.find('\t', start);
    if (tab == std::string_view::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
}

template <typename Int>
Int ParseInteger(std::string_view field, std::string_view what, std::size_t line_no) {
  Int value{};
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || ptr != field.data() + field.size() || field.empty()) {
    throw Error(ErrorCode::kBadField,
                "cannot parse " + std::string(what) + " from '" + std::string(field) + "'",
                line_no);
  }
  return value;
}

inline double ParseDouble(std::string_view field, std::string_view what, std::size_t line_no) {
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || ptr != field.data() + field.size() || field.empty()) {
    throw Error(ErrorCode::kBadField,
                "cannot parse " + std::string(what) + " from '" + std::string(field) + "'",
                line_no);
  }
  return value;
}

inline bool IsSkippableLine(std::string_view line) {
  return line.empty() || line.front() == '#';
}

inline std::string_view StripCr(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  return line;
}

// Engagement log, one event per line:
//   timestamp  user_id  query  item_id  action  surface  session_id
inline EngagementEvent ParseEventLine(std::string_view line, std::size_t line_no = 0) {
  line = StripCr(line);
  const auto f = SplitTabs(line);
  if (f.size() != 7) {
    throw Error(ErrorCode::kMalformedLine,
                "expected 7 tab-separated columns, got " + std::to_string(f.size()), line_no);
  }
  EngagementEvent e;
  e.timestamp = ParseInteger<std::int64_t>(f[0], "timestamp", line_no);
  if (e.timestamp <= 0) {
    throw Error(ErrorCode::kBadField, "timestamp must be positive", line_no);
  }
  e.user_id = ParseInteger<std::uint64_t>(f[1], "user_id", line_no);
  try {
    e.query = NormalizeQuery(f[2]);
  } catch (const Error&) {
    throw Error(ErrorCode::kBadField, "empty query", line_no);
  }
  e.item = ItemId{ParseInteger<std::uint64_t>(f[3], "item_id", line_no)};
  if (!e.item.valid()) throw Error(ErrorCode::kBadField, "item_id must be nonzero", line_no);
  const auto action = ParseAction(f[4]);
  if (!action) {
    throw Error(ErrorCode::kBadField, "unknown action '" + std::string(f[4]) + "'", line_no);
  }
  e.action = *action;
  e.surface = std::string(f[5]);
  e.session_id = ParseInteger<std::uint64_t>(f[6], "session_id", line_no);
  return e;
}

inline std::string FormatEventLine(const EngagementEvent& e) {
  std::string out;
  out += std::to_string(e.timestamp);
  out += '\t';
  out += std::to_string(e.user_id);
  out += '\t';
  out += e.query.normalized_text;
  out += '\t';
  out += std::to_string(e.item.value);
  out += '\t';
  out += ActionName(e.action);
  out += '\t';
  out += e.surface;
  out += '\t';
  out += std::to_string(e.session_id);
  return out;
}

// Request log: timestamp  user_id  query  session_id
inline SearchRequest ParseRequestLine(std::string_view line, std::size_t line_no = 0) {
  line = StripCr(line);
  const auto f = SplitTabs(line);
  if (f.size() != 4) {
    throw Error(ErrorCode::kMalformedLine,
                "expected 4 tab-separated columns, got " + std::to_string(f.size()), line_no);
  }
  SearchRequest r;
  r.timestamp = ParseInteger<std::int64_t>(f[0], "timestamp", line_no);
  r.user_id = ParseInteger<std::uint64_t>(f[1], "user_id", line_no);
  try {
    r.query = NormalizeQuery(f[2]);
  } catch (const Error&) {
    throw Error(ErrorCode::kBadField, "empty query", line_no);
  }
  r.session_id = ParseInteger<std::uint64_t>(f[3], "session_id", line_no);
  return r;
}

inline std::string FormatRequestLine(const SearchRequest& r) {
  return std::to_string(r.timestamp) + '\t' + std::to_string(r.user_id) + '\t' +
         r.query.normalized_text + '\t' + std::to_string(r.session_id);
}

// User table: user_id  country  device  language  age_bucket  gender_bucket
inline RequestContext ParseUserLine(std::string_view line, std::size_t line_no = 0) {
  line = StripCr(line);
  const auto f = SplitTabs(line);
  if (f.size() != 6) {
    throw Error(ErrorCode::kMalformedLine,
                "expected 6 tab-separated columns, got " + std::to_string(f.size()), line_no);
  }
  RequestContext c;
  c.user_id = ParseInteger<std::uint64_t>(f[0], "user_id", line_no);
  c.country = std::string(f[1]);
  const auto device = ParseDevice(f[2]);
  if (!device) throw Error(ErrorCode::kBadField, "unknown device '" + std::string(f[2]) + "'", line_no);
  c.device = *device;
  c.language = std::string(f[3]);
  c.age_bucket = ParseInteger<std::uint32_t>(f[4], "age_bucket", line_no);
  c.gender_bucket = ParseInteger<std::uint32_t>(f[5], "gender_bucket", line_no);
  return c;
}

inline std::string FormatUserLine(const RequestContext& c) {
  return std::to_string(c.user_id) + '\t' + c.country + '\t' + std::string(DeviceName(c.device)) +
         '\t' + c.language + '\t' + std::to_string(c.age_bucket) + '\t' +
         std::to_string(c.gender_bucket);
}

// Reads every non-comment line of `in` through `parse`.
template <typename Record, typename ParseFn>
std::vector<Record> ReadLines(std::istream& in, ParseFn parse) {
  std::vector<Record> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (IsSkippableLine(StripCr(line))) continue;
    out.push_back(parse(line, line_no));
  }
  return out;
}

inline std::ifstream OpenInput(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open '" + path + "' for reading");
  return in;
}

inline std::ofstream OpenOutput(const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIoError, "cannot open '" + path + "' for writing");
  return out;
}

inline std::vector<EngagementEvent> ReadEventLog(std::istream& in) {
  return ReadLines<EngagementEvent>(in, [](std::string_view l, std::size_t n) {
    return ParseEventLine(l, n);
  });
}

inline std::vector<EngagementEvent> ReadEventLog(const std::string& path) {
  auto in = OpenInput(path);
  return ReadEventLog(in);
}

inline std::vector<SearchRequest> ReadRequestLog(std::istream& in) {
  return ReadLines<SearchRequest>(in, [](std::string_view l, std::size_t n) {
    return ParseRequestLine(l, n);
  });
}

inline std::vector<SearchRequest> ReadRequestLog(const std::string& path) {
  auto in = OpenInput(path);
  return ReadRequestLog(in);
}

inline std::vector<RequestContext> ReadUserTable(const std::string& path) {
  auto in = OpenInput(path);
  return ReadLines<RequestContext>(in, [](std::string_view l, std::size_t n) {
    return ParseUserLine(l, n);
  });
}

inline void WriteEventLog(std::ostream& out, const std::vector<EngagementEvent>& events) {
  out << "# timestamp\tuser_id\tquery\titem_id\taction\tsurface\tsession_id\n";
  for (const auto& e : events) out << FormatEventLine(e) << '\n';
}

inline void WriteRequestLog(std::ostream& out, const std::vector<SearchRequest>& requests) {
  out << "# timestamp\tuser_id\tquery\tsession_id\n";
  for (const auto& r : requests) out << FormatRequestLine(r) << '\n';
}

inline void WriteUserTable(std::ostream& out, const std::vector<RequestContext>& users) {
  out << "# user_id\tcountry\tdevice\tlanguage\tage_bucket\tgender_bucket\n";
  for (const auto& u : users) out << FormatUserLine(u) << '\n';
}

}  // namespace prerank
