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

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "prerank/core/error.hpp"
#include "prerank/core/types.hpp"

namespace prerank::eval {

// 1 if any positive ranks within the top k by descending score, 0 if none
// does, nullopt when the request has no positive. Equal scores rank by
// ascending item id, or by position when `ids` is empty.
inline std::optional<int> HitsAtK(std::span<const double> scores, std::span<const int> labels, std::size_t k,
                                  std::span<const ItemId> ids = {}) {
  if (scores.size() != labels.size() || (!ids.empty() && ids.size() != scores.size())) {
    throw Error(ErrorCode::kLengthMismatch, "scores, labels and ids must have the same length");
  }
  if (k == 0) throw Error(ErrorCode::kInvalidArgument, "k must be at least 1");
  auto before = [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return ids.empty() ? a < b : ids[a] < ids[b];
  };
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] != 0 && (!best || before(i, *best))) best = i;
  }
  if (!best) return std::nullopt;
  std::size_t ahead = 0;
  for (std::size_t j = 0; j < scores.size() && ahead < k; ++j) {
    if (j != *best && before(j, *best)) ++ahead;
  }
  return ahead < k ? 1 : 0;
}

struct HitsSummary {
  std::size_t hits = 0;
  std::size_t evaluated = 0;
  std::size_t skipped = 0;

  void Add(std::optional<int> h) {
    if (!h) {
      ++skipped;
      return;
    }
    hits += static_cast<std::size_t>(*h);
    ++evaluated;
  }
  double mean() const { return evaluated == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(evaluated); }
};

enum class Segment : std::uint8_t { kHead = 0, kTorso, kTail, kSingle };
constexpr std::size_t kNumSegments = 4;

inline std::string_view SegmentName(Segment s) {
  switch (s) {
    case Segment::kHead: return "HEAD";
    case Segment::kTorso: return "TORSO";
    case Segment::kTail: return "TAIL";
    case Segment::kSingle: return "SINGLE";
  }
  return "HEAD";
}

struct SegmentCuts {
  double head = 0.5;
  double torso = 0.3;
};

// Frequency 1 is SINGLE. The rest, sorted by descending frequency (ties by
// query text), are HEAD while the volume ranked above them is below 50% of
// their total, TORSO below 80%, TAIL otherwise.
inline std::map<std::string, Segment> SegmentQueries(const std::map<std::string, std::uint64_t>& frequency,
                                                     SegmentCuts cuts = {}) {
  std::map<std::string, Segment> out;
  std::vector<std::pair<std::uint64_t, const std::string*>> ranked;
  std::uint64_t volume = 0;
  for (const auto& [query, f] : frequency) {
    if (f == 0) throw Error(ErrorCode::kInvalidArgument, "query frequency must be at least 1: " + query);
    if (f == 1) {
      out[query] = Segment::kSingle;
    } else {
      ranked.emplace_back(f, &query);
      volume += f;
    }
  }
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first > b.first : *a.second < *b.second;
  });
  const double head_end = cuts.head * static_cast<double>(volume);
  const double torso_end = (cuts.head + cuts.torso) * static_cast<double>(volume);
  std::uint64_t above = 0;
  for (const auto& [f, query] : ranked) {
    const double a = static_cast<double>(above);
    out[*query] = a < head_end ? Segment::kHead : a < torso_end ? Segment::kTorso : Segment::kTail;
    above += f;
  }
  return out;
}

// Requests per normalized query text.
inline std::map<std::string, std::uint64_t> QueryFrequencies(std::span<const SearchRequest> requests) {
  std::map<std::string, std::uint64_t> out;
  for (const auto& r : requests) ++out[r.query.normalized_text];
  return out;
}

struct FeedItem {
  ItemId item;
  ActionSet actions;
};

struct SearchFeed {
  std::int64_t timestamp = 0;
  QueryKey query;
  std::vector<FeedItem> items;
};

struct SessionLog {
  std::uint64_t session_id = 0;
  std::vector<SearchFeed> searches;
};

// Groups events by session; each distinct (timestamp, query) is one search.
inline std::vector<SessionLog> BuildSessions(std::span<const EngagementEvent> events) {
  using SearchKey = std::tuple<std::int64_t, std::string>;
  std::map<std::uint64_t, std::map<SearchKey, std::map<ItemId, ActionSet>>> grouped;
  std::map<std::pair<std::uint64_t, SearchKey>, QueryKey> queries;
  for (const auto& e : events) {
    const SearchKey key{e.timestamp, e.query.normalized_text};
    ActionSet& a = grouped[e.session_id][key][e.item];
    a.Insert(e.action);
    queries.try_emplace({e.session_id, key}, e.query);
  }
  std::vector<SessionLog> out;
  out.reserve(grouped.size());
  for (const auto& [sid, searches] : grouped) {
    SessionLog log;
    log.session_id = sid;
    for (const auto& [key, items] : searches) {
      SearchFeed feed;
      feed.timestamp = std::get<0>(key);
      feed.query = queries.at({sid, key});
      for (const auto& [item, actions] : items) feed.items.push_back({item, actions});
      log.searches.push_back(std::move(feed));
    }
    out.push_back(std::move(log));
  }
  return out;
}

inline bool FeedFulfilled(const SearchFeed& feed) {
  const std::uint8_t fulfilling = FulfillingActions().bits();
  return std::any_of(feed.items.begin(), feed.items.end(),
                     [&](const FeedItem& f) { return (f.actions.bits() & fulfilling) != 0; });
}

// Fraction of sessions with a fulfilling action anywhere.
inline double Sifr(std::span<const SessionLog> sessions) {
  if (sessions.empty()) throw Error(ErrorCode::kEmptyInput, "no sessions");
  std::size_t fulfilled = 0;
  for (const auto& s : sessions) {
    fulfilled += std::any_of(s.searches.begin(), s.searches.end(), FeedFulfilled) ? 1 : 0;
  }
  return static_cast<double>(fulfilled) / static_cast<double>(sessions.size());
}

// Fraction of sessions fulfilled on the first search's feed.
inline double F1s(std::span<const SessionLog> sessions) {
  if (sessions.empty()) throw Error(ErrorCode::kEmptyInput, "no sessions");
  std::size_t fulfilled = 0;
  for (const auto& s : sessions) {
    fulfilled += !s.searches.empty() && FeedFulfilled(s.searches.front()) ? 1 : 0;
  }
  return static_cast<double>(fulfilled) / static_cast<double>(sessions.size());
}

}  // namespace prerank::eval
