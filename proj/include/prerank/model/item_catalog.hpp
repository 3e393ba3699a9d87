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

#include <cstdio>
#include <istream>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "prerank/core/error.hpp"
#include "prerank/core/log_io.hpp"
#include "prerank/model/features.hpp"

namespace prerank::model {

struct ItemRecord {
  ItemFeatures features;
  // Concatenated item text used by lexical baselines.
  std::string text;
};

// Item features keyed by id. Iteration is in ascending id order.
class ItemCatalog {
 public:
  void Add(ItemRecord record) {
    const ItemId id = record.features.id;
    if (!items_.emplace(id.value, std::move(record)).second) {
      throw Error(ErrorCode::kDuplicateItem, "duplicate item " + std::to_string(id.value));
    }
  }

  const ItemRecord* Find(ItemId id) const {
    auto it = items_.find(id.value);
    return it == items_.end() ? nullptr : &it->second;
  }

  const ItemRecord& At(ItemId id) const {
    const ItemRecord* r = Find(id);
    if (r == nullptr) throw Error(ErrorCode::kMissingFeatures, "no features for item " + std::to_string(id.value));
    return *r;
  }

  std::size_t size() const { return items_.size(); }
  const std::map<std::uint64_t, ItemRecord>& items() const { return items_; }

 private:
  std::map<std::uint64_t, ItemRecord> items_;
};

inline std::vector<float> ParseFloatList(std::string_view s, std::size_t line_no) {
  std::vector<float> out;
  if (s.empty()) return out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = s.find(',', start);
    const auto part = s.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
    out.push_back(static_cast<float>(ParseDouble(part, "float list", line_no)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

inline std::string FormatFloatList(std::span<const float> values) {
  std::string out;
  char buf[32];
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i > 0) out += ',';
    std::snprintf(buf, sizeof(buf), "%.9g", static_cast<double>(values[i]));
    out += buf;
  }
  return out;
}

// Columns: item_id, engagement rates, content embedding, text.
inline ItemRecord ParseItemLine(std::string_view line, std::size_t line_no) {
  const auto cols = SplitTabs(line);
  if (cols.size() != 4) {
    throw Error(ErrorCode::kMalformedLine, "expected 4 item columns, got " + std::to_string(cols.size()), line_no);
  }
  ItemRecord r;
  r.features.id = ItemId{ParseInteger<std::uint64_t>(cols[0], "item_id", line_no)};
  r.features.engagement_rates = ParseFloatList(cols[1], line_no);
  r.features.content = EmbeddingVec(ParseFloatList(cols[2], line_no));
  r.text = std::string(cols[3]);
  return r;
}

inline std::string FormatItemLine(const ItemRecord& r) {
  return std::to_string(r.features.id.value) + '\t' + FormatFloatList(r.features.engagement_rates) + '\t' +
         FormatFloatList(r.features.content.values()) + '\t' + r.text;
}

inline ItemCatalog ReadItemCatalog(std::istream& in) {
  ItemCatalog catalog;
  for (auto& r : ReadLines<ItemRecord>(in, ParseItemLine)) catalog.Add(std::move(r));
  return catalog;
}

inline ItemCatalog ReadItemCatalog(const std::string& path) {
  auto in = OpenInput(path);
  return ReadItemCatalog(in);
}

inline void WriteItemCatalog(std::ostream& out, const ItemCatalog& catalog) {
  out << "# item_id\tengagement_rates\tcontent\ttext\n";
  for (const auto& [id, r] : catalog.items()) out << FormatItemLine(r) << '\n';
}

}  // namespace prerank::model
