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
#include <deque>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <thread>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "prerank/core/error.hpp"
#include "prerank/core/hash.hpp"
#include "prerank/core/types.hpp"

namespace prerank::iqp {

struct WindowSpec {
  std::string name;
  int length_days = 1;

  friend bool operator==(const WindowSpec&, const WindowSpec&) = default;
};

inline std::vector<WindowSpec> DefaultWindows() {
  return {{"7d", 7}, {"90d", 90}, {"1y", 365}, {"2y", 730}};
}

struct PairKey {
  std::uint64_t item = 0;
  std::uint64_t query_hash = 0;

  friend auto operator<=>(const PairKey&, const PairKey&) = default;
};

struct PairKeyHash {
  std::size_t operator()(const PairKey& k) const noexcept {
    return HashCombine(k.item, k.query_hash);
  }
};

using PairCounts = std::unordered_map<PairKey, std::uint64_t, PairKeyHash>;
using QueryCounts = std::unordered_map<std::uint64_t, std::uint64_t>;

// Counts of one UTC day.
struct DayShard {
  std::int64_t day = 0;
  PairCounts pairs;
  QueryCounts queries;

  bool empty() const { return pairs.empty() && queries.empty(); }
  friend bool operator==(const DayShard&, const DayShard&) = default;
};

// Windowed engagement counts as of a day boundary. The window is the
// half-open interval [as_of - length_days, as_of) and is held as one shard per
// day so that sliding forward expires exactly one shard.
class CountStore {
 public:
  CountStore() = default;

  CountStore(WindowSpec window, std::int64_t as_of) : window_(std::move(window)), as_of_(as_of) {
    if (window_.length_days <= 0) {
      throw Error(ErrorCode::kInvalidArgument, "window length must be positive");
    }
    if (as_of % kSecondsPerDay != 0) {
      throw Error(ErrorCode::kInvalidArgument, "as_of must be a UTC day boundary");
    }
    const std::int64_t end_day = as_of / kSecondsPerDay;
    for (std::int64_t d = end_day - window_.length_days; d < end_day; ++d) {
      shards_.push_back(DayShard{d, {}, {}});
    }
  }

  const WindowSpec& window() const { return window_; }
  std::int64_t as_of() const { return as_of_; }
  std::int64_t first_day() const { return as_of_ / kSecondsPerDay - window_.length_days; }
  const std::deque<DayShard>& shards() const { return shards_; }
  const PairCounts& pair_counts() const { return pair_totals_; }
  const QueryCounts& query_counts() const { return query_totals_; }
  const std::unordered_map<std::uint64_t, std::string>& query_texts() const { return texts_; }

  std::uint64_t pair_count(ItemId item, std::uint64_t query_hash) const {
    auto it = pair_totals_.find(PairKey{item.value, query_hash});
    return it == pair_totals_.end() ? 0 : it->second;
  }

  std::uint64_t query_count(std::uint64_t query_hash) const {
    auto it = query_totals_.find(query_hash);
    return it == query_totals_.end() ? 0 : it->second;
  }

  std::string query_text(std::uint64_t query_hash) const {
    auto it = texts_.find(query_hash);
    return it == texts_.end() ? std::string() : it->second;
  }

  bool Covers(std::int64_t timestamp) const {
    return timestamp >= as_of_ - window_.length_days * kSecondsPerDay && timestamp < as_of_;
  }

  // Number of queries q for which the sum over items of C(p,q) exceeds C(q).
  // Zero whenever every request yields at most one counted engagement.
  std::size_t CountOverEngagedQueries() const {
    std::unordered_map<std::uint64_t, std::uint64_t> sums;
    for (const auto& [key, c] : pair_totals_) sums[key.query_hash] += c;
    std::size_t bad = 0;
    for (const auto& [q, s] : sums) {
      if (s > query_count(q)) ++bad;
    }
    return bad;
  }

  friend bool operator==(const CountStore& a, const CountStore& b) {
    return a.window_ == b.window_ && a.as_of_ == b.as_of_ && a.shards_ == b.shards_ &&
           a.pair_totals_ == b.pair_totals_ && a.query_totals_ == b.query_totals_;
  }

  // Mutators used by the builders below.
  DayShard& ShardFor(std::int64_t day) { return shards_[static_cast<std::size_t>(day - first_day())]; }

  void AddPair(std::int64_t day, PairKey key, std::uint64_t n) {
    ShardFor(day).pairs[key] += n;
    pair_totals_[key] += n;
  }

  void AddQuery(std::int64_t day, std::uint64_t query_hash, std::uint64_t n) {
    ShardFor(day).queries[query_hash] += n;
    query_totals_[query_hash] += n;
  }

  void NoteText(std::uint64_t query_hash, const std::string& text) {
    texts_.try_emplace(query_hash, text);
  }

  void MergeTexts(const CountStore& other) {
    for (const auto& [h, t] : other.texts_) texts_.try_emplace(h, t);
  }

  // Forgets texts of queries that no longer have any count in the window.
  void PruneTexts() {
    std::unordered_set<std::uint64_t> live;
    for (const auto& [key, c] : pair_totals_) live.insert(key.query_hash);
    for (const auto& [q, c] : query_totals_) live.insert(q);
    std::erase_if(texts_, [&live](const auto& entry) { return !live.contains(entry.first); });
  }

  // Drops the oldest shard, subtracts it from the totals and appends `next`.
  void Slide(DayShard next) {
    const DayShard& oldest = shards_.front();
    for (const auto& [key, c] : oldest.pairs) Subtract(pair_totals_, key, c);
    for (const auto& [q, c] : oldest.queries) Subtract(query_totals_, q, c);
    shards_.pop_front();
    for (const auto& [key, c] : next.pairs) pair_totals_[key] += c;
    for (const auto& [q, c] : next.queries) query_totals_[q] += c;
    shards_.push_back(std::move(next));
    as_of_ += kSecondsPerDay;
  }

 private:
  template <typename Map, typename Key>
  static void Subtract(Map& map, const Key& key, std::uint64_t c) {
    auto it = map.find(key);
    it->second -= c;
    if (it->second == 0) map.erase(it);
  }

  WindowSpec window_;
  std::int64_t as_of_ = 0;
  std::deque<DayShard> shards_;
  PairCounts pair_totals_;
  QueryCounts query_totals_;
  std::unordered_map<std::uint64_t, std::string> texts_;
};

namespace detail {

inline void CheckNotFuture(std::int64_t ts, std::int64_t as_of) {
  if (ts > as_of) {
    throw Error(ErrorCode::kEventAfterAsOf,
                "record at " + std::to_string(ts) + " is after as_of " + std::to_string(as_of));
  }
}

// Counts into `store` only the events/requests whose partition is `part`.
inline void AccumulatePartition(std::span<const EngagementEvent> events,
                                std::span<const SearchRequest> requests,
                                ActionSet engagement_actions, std::size_t part,
                                std::size_t parts, CountStore& store) {
  for (const EngagementEvent& e : events) {
    if (!engagement_actions.Contains(e.action) || !store.Covers(e.timestamp)) continue;
    const PairKey key{e.item.value, e.query.key_hash};
    if (parts > 1 && PairKeyHash{}(key) % parts != part) continue;
    store.AddPair(DayOf(e.timestamp), key, 1);
    store.NoteText(e.query.key_hash, e.query.normalized_text);
  }
  for (const SearchRequest& r : requests) {
    if (!store.Covers(r.timestamp)) continue;
    if (parts > 1 && Mix64(r.query.key_hash) % parts != part) continue;
    store.AddQuery(DayOf(r.timestamp), r.query.key_hash, 1);
    store.NoteText(r.query.key_hash, r.query.normalized_text);
  }
}

inline void AddInto(CountStore& dst, const CountStore& src) {
  for (const DayShard& shard : src.shards()) {
    for (const auto& [key, c] : shard.pairs) dst.AddPair(shard.day, key, c);
    for (const auto& [q, c] : shard.queries) dst.AddQuery(shard.day, q, c);
  }
  dst.MergeTexts(src);
}

}  // namespace detail

// C(p,q) = engagement events with action in `engagement_actions`, C(q) =
// search requests, both restricted to the window ending at `as_of`.
// With threads > 1 the input is partitioned on the pair (resp. query) hash;
// partitions have disjoint keys so the result does not depend on the count.
inline CountStore AccumulateCounts(std::span<const EngagementEvent> events,
                                   std::span<const SearchRequest> requests,
                                   const WindowSpec& window, ActionSet engagement_actions,
                                   std::int64_t as_of, std::size_t threads = 1) {
  for (const auto& e : events) detail::CheckNotFuture(e.timestamp, as_of);
  for (const auto& r : requests) detail::CheckNotFuture(r.timestamp, as_of);

  CountStore store(window, as_of);
  if (threads <= 1) {
    detail::AccumulatePartition(events, requests, engagement_actions, 0, 1, store);
    return store;
  }
  std::vector<CountStore> partials(threads, CountStore(window, as_of));
  std::vector<std::thread> workers;
  for (std::size_t p = 0; p < threads; ++p) {
    workers.emplace_back([&, p] {
      detail::AccumulatePartition(events, requests, engagement_actions, p, threads, partials[p]);
    });
  }
  for (auto& w : workers) w.join();
  for (const auto& partial : partials) detail::AddInto(store, partial);
  return store;
}

// Slides `base` forward by one day using the newest shard of `delta`.
// `delta` must share the window spec, be as of exactly one day later and hold
// data only in its newest shard.
inline CountStore MergeCounts(CountStore base, const CountStore& delta) {
  if (!(base.window() == delta.window())) {
    throw Error(ErrorCode::kWindowMismatch,
                "window " + base.window().name + " vs " + delta.window().name);
  }
  if (delta.as_of() != base.as_of() + kSecondsPerDay) {
    throw Error(ErrorCode::kNonAdjacentDelta, "delta is not the day after base.as_of");
  }
  const auto& shards = delta.shards();
  for (std::size_t i = 0; i + 1 < shards.size(); ++i) {
    if (!shards[i].empty()) {
      throw Error(ErrorCode::kNonAdjacentDelta, "delta holds data outside its newest day");
    }
  }
  base.Slide(shards.back());
  base.MergeTexts(delta);
  base.PruneTexts();
  return base;
}

// Builds the one-day delta for day [day_start, day_start + 1 day) in the
// shape MergeCounts expects. Records outside that day are ignored.
inline CountStore AccumulateDay(std::span<const EngagementEvent> events,
                                std::span<const SearchRequest> requests,
                                const WindowSpec& window, ActionSet engagement_actions,
                                std::int64_t day_start) {
  CountStore store(window, day_start + kSecondsPerDay);
  const std::int64_t day = day_start / kSecondsPerDay;
  for (const EngagementEvent& e : events) {
    if (!engagement_actions.Contains(e.action) || DayOf(e.timestamp) != day) continue;
    store.AddPair(day, PairKey{e.item.value, e.query.key_hash}, 1);
    store.NoteText(e.query.key_hash, e.query.normalized_text);
  }
  for (const SearchRequest& r : requests) {
    if (DayOf(r.timestamp) != day) continue;
    store.AddQuery(day, r.query.key_hash, 1);
    store.NoteText(r.query.key_hash, r.query.normalized_text);
  }
  return store;
}

// Maps a record to a discrete context key (country, device, ...).
struct ContextExtractor {
  std::function<std::uint32_t(const EngagementEvent&)> of_event;
  std::function<std::uint32_t(const SearchRequest&)> of_request;
};

// One CountStore per context key, each equal to AccumulateCounts restricted
// to the records carrying that key. Keys with nothing inside the window are
// omitted.
inline std::map<std::uint32_t, CountStore> ConditionedCounts(
    std::span<const EngagementEvent> events, std::span<const SearchRequest> requests,
    const WindowSpec& window, ActionSet engagement_actions, std::int64_t as_of,
    const ContextExtractor& extractor) {
  std::map<std::uint32_t, std::vector<EngagementEvent>> event_parts;
  std::map<std::uint32_t, std::vector<SearchRequest>> request_parts;
  for (const auto& e : events) event_parts[extractor.of_event(e)].push_back(e);
  for (const auto& r : requests) request_parts[extractor.of_request(r)].push_back(r);

  std::map<std::uint32_t, CountStore> out;
  std::vector<std::uint32_t> keys;
  for (const auto& [k, _] : event_parts) keys.push_back(k);
  for (const auto& [k, _] : request_parts) keys.push_back(k);
  std::sort(keys.begin(), keys.end());
  keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
  for (std::uint32_t k : keys) {
    static const std::vector<EngagementEvent> kNoEvents;
    static const std::vector<SearchRequest> kNoRequests;
    const auto ev = event_parts.find(k);
    const auto rq = request_parts.find(k);
    CountStore store = AccumulateCounts(ev == event_parts.end() ? kNoEvents : ev->second,
                                        rq == request_parts.end() ? kNoRequests : rq->second,
                                        window, engagement_actions, as_of);
    // Keys whose records all fall outside the window get no entry.
    if (store.pair_counts().empty() && store.query_counts().empty()) continue;
    out.emplace(k, std::move(store));
  }
  return out;
}

}  // namespace prerank::iqp
