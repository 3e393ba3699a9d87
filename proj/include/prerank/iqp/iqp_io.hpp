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
#include <cstdio>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "prerank/core/error.hpp"
#include "prerank/core/hash.hpp"
#include "prerank/core/log_io.hpp"
#include "prerank/iqp/count_store.hpp"
#include "prerank/iqp/iqp_store.hpp"

namespace prerank::iqp {

namespace io_detail {

// Query text is percent-escaped so it can sit inside the list syntax.
inline std::string Escape(std::string_view text) {
  std::string out;
  for (unsigned char c : text) {
    if (c == '%' || c == '\t' || c == '\n' || c == '\r' || c == ';' || c == ',' || c == '/' ||
        c == ' ') {
      char buf[4];
      std::snprintf(buf, sizeof(buf), "%%%02X", c);
      out += buf;
    } else {
      out.push_back(static_cast<char>(c));
    }
  }
  return out;
}

inline unsigned ParseHex(std::string_view hex, std::size_t line_no) {
  unsigned v = 0;
  const auto [ptr, ec] = std::from_chars(hex.data(), hex.data() + hex.size(), v, 16);
  if (ec != std::errc() || ptr != hex.data() + hex.size()) {
    throw Error(ErrorCode::kFormatError, "bad escape", line_no);
  }
  return v;
}

inline std::string Unescape(std::string_view text, std::size_t line_no) {
  std::string out;
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] != '%') {
      out.push_back(text[i]);
      continue;
    }
    if (i + 2 >= text.size()) throw Error(ErrorCode::kFormatError, "bad escape", line_no);
    out.push_back(static_cast<char>(ParseHex(text.substr(i + 1, 2), line_no)));
    i += 2;
  }
  return out;
}

inline std::string FormatScore(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::vector<std::string_view> Split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  if (s.empty()) return out;
  std::size_t start = 0;
  while (true) {
    const std::size_t p = s.find(sep, start);
    if (p == std::string_view::npos) {
      out.push_back(s.substr(start));
      return out;
    }
    out.push_back(s.substr(start, p - start));
    start = p + 1;
  }
}

}  // namespace io_detail

// Text store:
//   IQP v1 <K> <window list> <context variant list> as_of=<unix seconds>
//   <item_id> \t <slot 0> \t ... \t <slot F-1>
// A global slot is a ';'-separated list of hash,text,score triples; a context
// slot prefixes each triple with "<context key>/".
inline void WriteIqpStore(std::ostream& out, const IqpStore& store) {
  std::string windows, variants;
  for (const SlotSpec& s : store.slots()) {
    if (s.variant == ContextVariant::kNone) {
      if (!windows.empty()) windows += ',';
      windows += s.window.name + ":" + std::to_string(s.window.length_days);
    } else {
      if (!variants.empty()) variants += ',';
      variants += std::string(ContextVariantName(s.variant)) + "@" + s.window.name + ":" +
                  std::to_string(s.window.length_days);
    }
  }
  if (windows.empty()) windows = "-";
  if (variants.empty()) variants = "-";
  out << "IQP v1 " << store.k() << ' ' << windows << ' ' << variants
      << " as_of=" << store.as_of() << '\n';
  for (const auto& [item, signal] : store.items()) {
    out << item.value;
    for (std::size_t s = 0; s < store.slots().size(); ++s) {
      out << '\t';
      const bool conditioned = store.slots()[s].variant != ContextVariant::kNone;
      bool first = true;
      if (s < signal.slots.size()) {
        for (const auto& list : signal.slots[s]) {
          for (const auto& q : list.queries) {
            if (!first) out << ';';
            first = false;
            if (conditioned) out << list.context_key << '/';
            out << q.query_hash << ',' << io_detail::Escape(q.text) << ','
                << io_detail::FormatScore(q.score);
          }
        }
      }
    }
    out << '\n';
  }
}

inline IqpStore ReadIqpStore(std::istream& in) {
  using namespace io_detail;
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::kFormatError, "empty IQP store", 1);
  std::istringstream header(line);
  std::string magic, version, windows, variants, as_of_field;
  std::size_t k = 0;
  header >> magic >> version >> k >> windows >> variants >> as_of_field;
  if (magic != "IQP" || version != "v1" || as_of_field.rfind("as_of=", 0) != 0) {
    throw Error(ErrorCode::kFormatError, "bad IQP store header", 1);
  }
  const std::int64_t as_of = ParseInteger<std::int64_t>(std::string_view(as_of_field).substr(6), "as_of", 1);

  auto parse_window = [](std::string_view w) {
    const std::size_t colon = w.find(':');
    if (colon == std::string_view::npos) throw Error(ErrorCode::kFormatError, "bad window", 1);
    return WindowSpec{std::string(w.substr(0, colon)),
                      ParseInteger<int>(w.substr(colon + 1), "window length", 1)};
  };
  std::vector<SlotSpec> slots;
  if (windows != "-") {
    for (auto w : Split(windows, ',')) slots.push_back({parse_window(w), ContextVariant::kNone});
  }
  if (variants != "-") {
    for (auto v : Split(variants, ',')) {
      const std::size_t at = v.find('@');
      if (at == std::string_view::npos) throw Error(ErrorCode::kFormatError, "bad variant", 1);
      const auto variant = ParseContextVariant(v.substr(0, at));
      if (!variant || *variant == ContextVariant::kNone) {
        throw Error(ErrorCode::kFormatError, "unknown context variant", 1);
      }
      slots.push_back({parse_window(v.substr(at + 1)), *variant});
    }
  }

  IqpStore store(k, slots, as_of);
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view view = StripCr(line);
    if (IsSkippableLine(view)) continue;
    const auto fields = SplitTabs(view);
    if (fields.size() != slots.size() + 1) {
      throw Error(ErrorCode::kMalformedLine, "slot count mismatch", line_no);
    }
    const ItemId item{ParseInteger<std::uint64_t>(fields[0], "item_id", line_no)};
    for (std::size_t s = 0; s < slots.size(); ++s) {
      const bool conditioned = slots[s].variant != ContextVariant::kNone;
      std::map<std::uint32_t, std::vector<RankedQuery>> lists;
      for (auto entry : Split(fields[s + 1], ';')) {
        std::uint32_t key = 0;
        if (conditioned) {
          const std::size_t slash = entry.find('/');
          if (slash == std::string_view::npos) {
            throw Error(ErrorCode::kMalformedLine, "missing context key", line_no);
          }
          key = ParseInteger<std::uint32_t>(entry.substr(0, slash), "context key", line_no);
          entry = entry.substr(slash + 1);
        }
        const auto parts = Split(entry, ',');
        if (parts.size() != 3) throw Error(ErrorCode::kMalformedLine, "bad triple", line_no);
        RankedQuery q;
        q.query_hash = ParseInteger<std::uint64_t>(parts[0], "query hash", line_no);
        q.text = Unescape(parts[1], line_no);
        q.score = ParseDouble(parts[2], "score", line_no);
        lists[key].push_back(std::move(q));
      }
      for (auto& [key, list] : lists) store.SetList(item, s, key, std::move(list));
    }
  }
  store.Seal();
  return store;
}

inline std::string SerializeIqpStore(const IqpStore& store) {
  std::ostringstream out;
  WriteIqpStore(out, store);
  return out.str();
}

inline std::uint64_t IqpStoreDigest(const IqpStore& store) {
  return Fnv1a64(SerializeIqpStore(store));
}

// Count store text form, used to carry state between `iqp build` and
// `iqp update`. One section per store:
//   COUNTS v1 <window name> <length days> <as_of> <variant> <context key>
//   T \t <hash> \t <escaped text>
//   P \t <day> \t <item> \t <hash> \t <count>
//   Q \t <day> \t <hash> \t <count>
//   END
struct CountSection {
  ContextVariant variant = ContextVariant::kNone;
  std::uint32_t context_key = 0;
  CountStore store;
};

inline void WriteCountSection(std::ostream& out, const CountSection& section) {
  const CountStore& cs = section.store;
  out << "COUNTS v1 " << cs.window().name << ' ' << cs.window().length_days << ' ' << cs.as_of()
      << ' ' << ContextVariantName(section.variant) << ' ' << section.context_key << '\n';
  std::map<std::uint64_t, std::string> texts(cs.query_texts().begin(), cs.query_texts().end());
  for (const auto& [h, t] : texts) out << "T\t" << h << '\t' << io_detail::Escape(t) << '\n';
  for (const DayShard& shard : cs.shards()) {
    std::map<PairKey, std::uint64_t> pairs(shard.pairs.begin(), shard.pairs.end());
    for (const auto& [key, c] : pairs) {
      out << "P\t" << shard.day << '\t' << key.item << '\t' << key.query_hash << '\t' << c << '\n';
    }
    std::map<std::uint64_t, std::uint64_t> queries(shard.queries.begin(), shard.queries.end());
    for (const auto& [q, c] : queries) out << "Q\t" << shard.day << '\t' << q << '\t' << c << '\n';
  }
  out << "END\n";
}

inline std::vector<CountSection> ReadCountSections(std::istream& in) {
  std::vector<CountSection> sections;
  std::string line;
  std::size_t line_no = 0;
  CountSection* current = nullptr;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view view = StripCr(line);
    if (IsSkippableLine(view)) continue;
    if (view.rfind("COUNTS ", 0) == 0) {
      std::istringstream header{std::string(view)};
      std::string magic, version, name, variant_name;
      int length = 0;
      std::int64_t as_of = 0;
      std::uint32_t key = 0;
      header >> magic >> version >> name >> length >> as_of >> variant_name >> key;
      const auto variant = ParseContextVariant(variant_name);
      if (version != "v1" || !header || !variant) {
        throw Error(ErrorCode::kFormatError, "bad COUNTS header", line_no);
      }
      sections.push_back({*variant, key, CountStore(WindowSpec{name, length}, as_of)});
      current = &sections.back();
      continue;
    }
    if (view == "END") {
      current = nullptr;
      continue;
    }
    if (!current) throw Error(ErrorCode::kFormatError, "record outside a COUNTS section", line_no);
    const auto f = SplitTabs(view);
    CountStore& cs = current->store;
    auto check_day = [&](std::int64_t day) {
      if (day < cs.first_day() || day >= cs.first_day() + cs.window().length_days) {
        throw Error(ErrorCode::kFormatError, "day outside window", line_no);
      }
      return day;
    };
    if (f[0] == "T" && f.size() == 3) {
      cs.NoteText(ParseInteger<std::uint64_t>(f[1], "hash", line_no),
                  io_detail::Unescape(f[2], line_no));
    } else if (f[0] == "P" && f.size() == 5) {
      const std::int64_t day = check_day(ParseInteger<std::int64_t>(f[1], "day", line_no));
      cs.AddPair(day,
                 PairKey{ParseInteger<std::uint64_t>(f[2], "item", line_no),
                         ParseInteger<std::uint64_t>(f[3], "hash", line_no)},
                 ParseInteger<std::uint64_t>(f[4], "count", line_no));
    } else if (f[0] == "Q" && f.size() == 4) {
      const std::int64_t day = check_day(ParseInteger<std::int64_t>(f[1], "day", line_no));
      cs.AddQuery(day, ParseInteger<std::uint64_t>(f[2], "hash", line_no),
                  ParseInteger<std::uint64_t>(f[3], "count", line_no));
    } else {
      throw Error(ErrorCode::kMalformedLine, "unknown count record", line_no);
    }
  }
  return sections;
}

}  // namespace prerank::iqp
