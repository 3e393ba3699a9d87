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

#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <sstream>

#include "prerank/core/query.hpp"
#include "prerank/core/random.hpp"
#include "prerank/iqp/count_store.hpp"
#include "prerank/iqp/iqp_io.hpp"
#include "prerank/iqp/iqp_store.hpp"
#include "prerank/iqp/timeline.hpp"

namespace prerank::iqp {
namespace {

constexpr std::int64_t kDay0 = 19676 * kSecondsPerDay;  // 2023-11-15 00:00 UTC

EngagementEvent MakeEvent(std::int64_t ts, std::uint64_t user, const std::string& q, std::uint64_t item,
                          ActionType action) {
  EngagementEvent e;
  e.timestamp = ts;
  e.user_id = user;
  e.query = NormalizeQuery(q);
  e.item = ItemId{item};
  e.action = action;
  e.surface = "search";
  return e;
}

SearchRequest MakeRequest(std::int64_t ts, std::uint64_t user, const std::string& q) {
  return SearchRequest{ts, user, NormalizeQuery(q), 0};
}

struct RandomLog {
  std::vector<EngagementEvent> events;
  std::vector<SearchRequest> requests;
};

// Random log over `days` days starting at kDay0.
RandomLog MakeRandomLog(std::uint64_t seed, std::size_t n_events, int days, int n_queries = 40,
                        int n_items = 60, int n_users = 30) {
  Rng rng(seed);
  RandomLog log;
  for (std::size_t i = 0; i < n_events; ++i) {
    const std::int64_t ts = kDay0 + 1 + static_cast<std::int64_t>(rng.Below(days * kSecondsPerDay - 1));
    const std::string q = "query " + std::to_string(rng.Below(n_queries));
    const std::uint64_t user = 1 + rng.Below(n_users);
    log.requests.push_back(MakeRequest(ts, user, q));
    const std::size_t shown = rng.Below(3);
    for (std::size_t k = 0; k < shown; ++k) {
      log.events.push_back(MakeEvent(ts, user, q, 1 + rng.Below(n_items), kAllActions[rng.Below(kNumActionTypes)]));
    }
  }
  return log;
}

// Nested-loop recount of C(p,q) and C(q) over [as_of - window, as_of).
struct BruteCounts {
  std::map<std::pair<std::uint64_t, std::uint64_t>, std::uint64_t> pairs;
  std::map<std::uint64_t, std::uint64_t> queries;
};

BruteCounts BruteForceCount(const RandomLog& log, int window_days, ActionSet actions, std::int64_t as_of) {
  BruteCounts out;
  const std::int64_t lo = as_of - window_days * kSecondsPerDay;
  std::set<std::pair<std::uint64_t, std::uint64_t>> keys;
  for (const auto& e : log.events) keys.insert({e.item.value, e.query.key_hash});
  for (const auto& key : keys) {
    std::uint64_t c = 0;
    for (const auto& e : log.events) {
      if (e.item.value == key.first && e.query.key_hash == key.second && actions.Contains(e.action) &&
          e.timestamp >= lo && e.timestamp < as_of) {
        ++c;
      }
    }
    if (c > 0) out.pairs[key] = c;
  }
  std::set<std::uint64_t> qs;
  for (const auto& r : log.requests) qs.insert(r.query.key_hash);
  for (std::uint64_t q : qs) {
    std::uint64_t c = 0;
    for (const auto& r : log.requests) {
      if (r.query.key_hash == q && r.timestamp >= lo && r.timestamp < as_of) ++c;
    }
    if (c > 0) out.queries[q] = c;
  }
  return out;
}

void ExpectMatchesBrute(const CountStore& store, const BruteCounts& brute) {
  ASSERT_EQ(store.pair_counts().size(), brute.pairs.size());
  for (const auto& [key, c] : brute.pairs) {
    ASSERT_EQ(store.pair_count(ItemId{key.first}, key.second), c);
  }
  ASSERT_EQ(store.query_counts().size(), brute.queries.size());
  for (const auto& [q, c] : brute.queries) ASSERT_EQ(store.query_count(q), c);
}

const WindowSpec k7d{"7d", 7};

TEST(AccumulateCountsTest, CountsEngagementsAndRequests) {
  std::vector<EngagementEvent> events;
  std::vector<SearchRequest> requests;
  for (int i = 0; i < 3; ++i) events.push_back(MakeEvent(kDay0 + 100 + i, 1, "red dress", 9001, ActionType::kSave));
  events.push_back(MakeEvent(kDay0 + 200, 1, "red dress", 9001, ActionType::kImpression));
  for (int i = 0; i < 10; ++i) requests.push_back(MakeRequest(kDay0 + 50 + i, 1, "red dress"));
  const CountStore store =
      AccumulateCounts(events, requests, k7d, {ActionType::kSave}, kDay0 + 7 * kSecondsPerDay);
  const auto q = NormalizeQuery("red dress").key_hash;
  EXPECT_EQ(store.pair_count(ItemId{9001}, q), 3u);
  EXPECT_EQ(store.query_count(q), 10u);
  EXPECT_EQ(store.shards().size(), 7u);
  EXPECT_EQ(store.CountOverEngagedQueries(), 0u);
}

TEST(AccumulateCountsTest, EventsOutsideWindowAreExcluded) {
  const std::int64_t as_of = kDay0 + 10 * kSecondsPerDay;
  std::vector<EngagementEvent> events = {
      MakeEvent(as_of - 8 * kSecondsPerDay, 1, "red dress", 9001, ActionType::kSave)};
  std::vector<SearchRequest> requests = {MakeRequest(as_of - 8 * kSecondsPerDay, 1, "red dress")};
  const CountStore store = AccumulateCounts(events, requests, k7d, {ActionType::kSave}, as_of);
  EXPECT_EQ(store.pair_counts().size(), 0u);
  EXPECT_EQ(store.query_counts().size(), 0u);
}

TEST(AccumulateCountsTest, WindowIsHalfOpenAtDayBoundaries) {
  const std::int64_t as_of = kDay0 + 10 * kSecondsPerDay;
  std::vector<EngagementEvent> events = {
      MakeEvent(as_of - 7 * kSecondsPerDay, 1, "a", 1, ActionType::kSave),      // first second: in
      MakeEvent(as_of - 7 * kSecondsPerDay - 1, 1, "a", 1, ActionType::kSave),  // before: out
      MakeEvent(as_of, 1, "a", 1, ActionType::kSave)};                          // at as_of: out
  const CountStore store = AccumulateCounts(events, {}, k7d, {ActionType::kSave}, as_of);
  EXPECT_EQ(store.pair_count(ItemId{1}, NormalizeQuery("a").key_hash), 1u);
}

TEST(AccumulateCountsTest, FutureRecordIsRejected) {
  const std::int64_t as_of = kDay0 + 10 * kSecondsPerDay;
  std::vector<EngagementEvent> events = {MakeEvent(as_of + 1, 1, "a", 1, ActionType::kSave)};
  try {
    AccumulateCounts(events, {}, k7d, {ActionType::kSave}, as_of);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kEventAfterAsOf);
  }
  EXPECT_THROW(AccumulateCounts({}, {}, k7d, {ActionType::kSave}, as_of + 5), Error);
}

TEST(AccumulateCountsTest, MatchesNestedLoopOracleOnRandomLog) {
  const RandomLog log = MakeRandomLog(3, 5000, 14);
  const std::int64_t as_of = kDay0 + 14 * kSecondsPerDay;
  const ActionSet actions = DefaultLabelActions();
  ExpectMatchesBrute(AccumulateCounts(log.events, log.requests, k7d, actions, as_of),
                     BruteForceCount(log, 7, actions, as_of));
}

TEST(AccumulateCountsTest, ResultIsIndependentOfPartitionCount) {
  const RandomLog log = MakeRandomLog(5, 3000, 10);
  const std::int64_t as_of = kDay0 + 10 * kSecondsPerDay;
  const CountStore one = AccumulateCounts(log.events, log.requests, k7d, DefaultLabelActions(), as_of, 1);
  for (std::size_t threads : {2u, 3u, 8u}) {
    EXPECT_EQ(one, AccumulateCounts(log.events, log.requests, k7d, DefaultLabelActions(), as_of, threads));
  }
}

TEST(MergeCountsTest, SlidesTheWindowByOneShard) {
  const RandomLog log = MakeRandomLog(9, 2000, 8);
  const std::int64_t as_of = kDay0 + 7 * kSecondsPerDay;
  std::vector<EngagementEvent> before;
  std::vector<SearchRequest> before_r;
  for (const auto& e : log.events) if (e.timestamp < as_of) before.push_back(e);
  for (const auto& r : log.requests) if (r.timestamp < as_of) before_r.push_back(r);
  const CountStore base = AccumulateCounts(before, before_r, k7d, DefaultLabelActions(), as_of);
  EXPECT_EQ(base.shards().front().day, kDay0 / kSecondsPerDay);
  const CountStore delta = AccumulateDay(log.events, log.requests, k7d, DefaultLabelActions(), as_of);
  const CountStore merged = MergeCounts(base, delta);
  EXPECT_EQ(merged.as_of(), as_of + kSecondsPerDay);
  EXPECT_EQ(merged.shards().front().day, kDay0 / kSecondsPerDay + 1);
  EXPECT_EQ(merged.shards().back().day, kDay0 / kSecondsPerDay + 7);
  EXPECT_EQ(merged, AccumulateCounts(log.events, log.requests, k7d, DefaultLabelActions(), as_of + kSecondsPerDay));
}

TEST(MergeCountsTest, EmptyDeltaOnlyExpiresTheOldestShard) {
  const RandomLog log = MakeRandomLog(4, 1000, 7);
  const std::int64_t as_of = kDay0 + 7 * kSecondsPerDay;
  const CountStore base = AccumulateCounts(log.events, log.requests, k7d, DefaultLabelActions(), as_of);
  const CountStore merged = MergeCounts(base, CountStore(k7d, as_of + kSecondsPerDay));
  std::uint64_t dropped = 0, total = 0;
  for (const auto& [k, c] : base.shards().front().queries) dropped += c;
  for (const auto& [k, c] : base.query_counts()) total += c;
  std::uint64_t after = 0;
  for (const auto& [k, c] : merged.query_counts()) after += c;
  EXPECT_EQ(after, total - dropped);
  EXPECT_TRUE(merged.shards().back().empty());
}

TEST(MergeCountsTest, RejectsMismatchedOrNonAdjacentDeltas) {
  const std::int64_t as_of = kDay0 + 7 * kSecondsPerDay;
  const CountStore base(k7d, as_of);
  try {
    MergeCounts(base, CountStore(WindowSpec{"90d", 90}, as_of + kSecondsPerDay));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kWindowMismatch);
  }
  try {
    MergeCounts(base, CountStore(k7d, as_of + 2 * kSecondsPerDay));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNonAdjacentDelta);
  }
  // A delta with data older than its newest day is not a one-day delta.
  const std::vector<EngagementEvent> old = {MakeEvent(as_of - 100, 1, "a", 1, ActionType::kSave)};
  const CountStore wide = AccumulateCounts(old, {}, k7d, {ActionType::kSave}, as_of + kSecondsPerDay);
  EXPECT_THROW(MergeCounts(base, wide), Error);
}

TEST(MergeCountsTest, ThirtyDailyMergesEqualBatchRecount) {
  const RandomLog log = MakeRandomLog(21, 20000, 40);
  const ActionSet actions = DefaultLabelActions();
  std::int64_t as_of = kDay0 + 10 * kSecondsPerDay;
  std::vector<EngagementEvent> before;
  std::vector<SearchRequest> before_r;
  for (const auto& e : log.events) if (e.timestamp < as_of) before.push_back(e);
  for (const auto& r : log.requests) if (r.timestamp < as_of) before_r.push_back(r);
  CountStore store = AccumulateCounts(before, before_r, k7d, actions, as_of);
  for (int step = 0; step < 30; ++step) {
    store = MergeCounts(std::move(store), AccumulateDay(log.events, log.requests, k7d, actions, as_of));
    as_of += kSecondsPerDay;
  }
  std::vector<EngagementEvent> upto;
  std::vector<SearchRequest> upto_r;
  for (const auto& e : log.events) if (e.timestamp < as_of) upto.push_back(e);
  for (const auto& r : log.requests) if (r.timestamp < as_of) upto_r.push_back(r);
  EXPECT_EQ(store, AccumulateCounts(upto, upto_r, k7d, actions, as_of));
}

TEST(ComputeIqpTest, ExactRatioWithoutSmoothing) {
  std::vector<EngagementEvent> events;
  std::vector<SearchRequest> requests;
  for (int i = 0; i < 5; ++i) events.push_back(MakeEvent(kDay0 + 10 + i, 1, "q", 7, ActionType::kSave));
  for (int i = 0; i < 10; ++i) requests.push_back(MakeRequest(kDay0 + 10 + i, 1, "q"));
  const CountStore cs = AccumulateCounts(events, requests, k7d, {ActionType::kSave}, kDay0 + kSecondsPerDay);
  const auto scores = ComputeIqp(cs, SmoothingConfig{0.0, 0.0, 0});
  ASSERT_EQ(scores.size(), 1u);
  EXPECT_DOUBLE_EQ(scores[0].score, 0.5);
}

TEST(ComputeIqpTest, AdditiveSmoothing) {
  std::vector<EngagementEvent> events;
  std::vector<SearchRequest> requests;
  for (int i = 0; i < 3; ++i) events.push_back(MakeEvent(kDay0 + 10 + i, 1, "q", 7, ActionType::kSave));
  for (int i = 0; i < 10; ++i) requests.push_back(MakeRequest(kDay0 + 10 + i, 1, "q"));
  const CountStore cs = AccumulateCounts(events, requests, k7d, {ActionType::kSave}, kDay0 + kSecondsPerDay);
  const auto scores = ComputeIqp(cs, SmoothingConfig{});
  ASSERT_EQ(scores.size(), 1u);
  EXPECT_NEAR(scores[0].score, 4.0 / 30.0, 1e-15);
}

TEST(ComputeIqpTest, ZeroCountsAndRareQueriesEmitNothing) {
  std::vector<SearchRequest> requests;
  for (int i = 0; i < 10; ++i) requests.push_back(MakeRequest(kDay0 + 10 + i, 1, "q"));
  std::vector<EngagementEvent> events = {MakeEvent(kDay0 + 3, 1, "rare", 7, ActionType::kSave)};
  requests.push_back(MakeRequest(kDay0 + 3, 1, "rare"));
  const CountStore cs = AccumulateCounts(events, requests, k7d, {ActionType::kSave}, kDay0 + kSecondsPerDay);
  EXPECT_TRUE(ComputeIqp(cs, SmoothingConfig{}).empty());
  EXPECT_EQ(ComputeIqp(cs, SmoothingConfig{1.0, 20.0, 1}).size(), 1u);
}

TEST(ComputeIqpTest, MatchesBruteForceOracleOnRandomLog) {
  const RandomLog log = MakeRandomLog(17, 4000, 7);
  const std::int64_t as_of = kDay0 + 7 * kSecondsPerDay;
  const SmoothingConfig smoothing{};
  const auto brute = BruteForceCount(log, 7, DefaultLabelActions(), as_of);
  const auto scores = ComputeIqp(AccumulateCounts(log.events, log.requests, k7d, DefaultLabelActions(), as_of), smoothing);
  std::size_t expected = 0;
  for (const auto& [key, c] : brute.pairs) {
    const std::uint64_t cq = brute.queries.count(key.second) ? brute.queries.at(key.second) : 0;
    if (cq < smoothing.min_query_count) continue;
    ++expected;
    const double want = (static_cast<double>(c) + 1.0) / (static_cast<double>(cq) + 20.0);
    auto it = std::find_if(scores.begin(), scores.end(), [&](const IqpEntry& e) {
      return e.item.value == key.first && e.query_hash == key.second;
    });
    ASSERT_NE(it, scores.end());
    ASSERT_LE(std::abs(it->score - want), 1e-12 * want);
  }
  EXPECT_EQ(scores.size(), expected);
}

TEST(ComputeIqpTest, MonotoneInPairAndQueryCounts) {
  Rng rng(2);
  const SmoothingConfig smoothing{};
  auto score = [&](std::uint64_t c, std::uint64_t cq) {
    return (static_cast<double>(c) + smoothing.alpha) / (static_cast<double>(cq) + smoothing.beta);
  };
  for (int i = 0; i < 1000; ++i) {
    const std::uint64_t cq = 5 + rng.Below(1000);
    const std::uint64_t c = 1 + rng.Below(cq);
    // Build the two stores and compare through ComputeIqp itself.
    auto one = [&](std::uint64_t pc, std::uint64_t qc) {
      CountStore cs(k7d, kDay0 + 7 * kSecondsPerDay);
      cs.AddPair(kDay0 / kSecondsPerDay, PairKey{1, 2}, pc);
      cs.AddQuery(kDay0 / kSecondsPerDay, 2, qc);
      return ComputeIqp(cs, smoothing).at(0).score;
    };
    const double base = one(c, cq);
    ASSERT_DOUBLE_EQ(base, score(c, cq));
    ASSERT_GE(one(c + 1, cq), base);
    ASSERT_LE(one(c, cq + 1), base);
    ASSERT_GT(base, 0.0);
    ASSERT_LE(base, 1.0);
  }
}

TEST(TopKRetainTest, KeepsTheBestK) {
  std::vector<IqpEntry> scores = {{ItemId{1}, 10, 5, 0.5}, {ItemId{1}, 11, 2, 0.2}, {ItemId{1}, 12, 1, 0.1}};
  const auto lists = TopKRetain(scores, 2);
  ASSERT_EQ(lists.at(ItemId{1}).size(), 2u);
  EXPECT_DOUBLE_EQ(lists.at(ItemId{1})[0].score, 0.5);
  EXPECT_DOUBLE_EQ(lists.at(ItemId{1})[1].score, 0.2);
}

TEST(TopKRetainTest, KLargerThanListKeepsEverything) {
  std::vector<IqpEntry> scores = {{ItemId{1}, 10, 5, 0.5}};
  EXPECT_EQ(TopKRetain(scores, 100).at(ItemId{1}).size(), 1u);
  EXPECT_THROW(TopKRetain(scores, 0), Error);
}

TEST(TopKRetainTest, TiesBreakOnPairCountThenHash) {
  std::vector<IqpEntry> scores = {
      {ItemId{1}, 30, 1, 0.25}, {ItemId{1}, 20, 4, 0.25}, {ItemId{1}, 10, 1, 0.25}};
  const auto lists = TopKRetain(scores, 3);
  const auto& list = lists.at(ItemId{1});
  EXPECT_EQ(list[0].query_hash, 20u);
  EXPECT_EQ(list[1].query_hash, 10u);
  EXPECT_EQ(list[2].query_hash, 30u);
}

TEST(TopKRetainTest, MatchesSortThenTruncateOracle) {
  Rng rng(8);
  std::vector<IqpEntry> scores;
  for (std::uint64_t item = 1; item <= 50; ++item) {
    for (std::uint64_t q = 1, n = rng.Below(40); q <= n; ++q) {
      // Coarse scores to force ties.
      scores.push_back({ItemId{item}, rng.NextU64(), 1 + rng.Below(3), static_cast<double>(rng.Below(6)) / 8.0});
    }
  }
  const auto lists = TopKRetain(scores, 10);
  for (std::uint64_t item = 1; item <= 50; ++item) {
    std::vector<IqpEntry> mine;
    for (const auto& e : scores) if (e.item.value == item) mine.push_back(e);
    std::sort(mine.begin(), mine.end(), [](const IqpEntry& a, const IqpEntry& b) {
      if (a.score != b.score) return a.score > b.score;
      if (a.pair_count != b.pair_count) return a.pair_count > b.pair_count;
      return a.query_hash < b.query_hash;
    });
    if (mine.size() > 10) mine.resize(10);
    if (mine.empty()) {
      EXPECT_EQ(lists.count(ItemId{item}), 0u);
      continue;
    }
    const auto& got = lists.at(ItemId{item});
    ASSERT_EQ(got.size(), mine.size());
    for (std::size_t i = 0; i < mine.size(); ++i) ASSERT_EQ(got[i].query_hash, mine[i].query_hash);
  }
}

IqpStore SevenSlotStore() {
  return IqpStore(100, DefaultSlotLayout(), kDay0);
}

TEST(LookupFeaturesTest, ReadsTheSlotHoldingTheQuery) {
  IqpStore store = SevenSlotStore();
  const auto q = NormalizeQuery("red dress");
  store.SetList(ItemId{9001}, 0, 0, {RankedQuery{q.key_hash, q.normalized_text, 0.4, 3}});
  store.Seal();
  const auto f = store.LookupFeatures(ItemId{9001}, q.key_hash);
  EXPECT_EQ(f, (std::vector<float>{0.4f, 0, 0, 0, 0, 0, 0}));
}

TEST(LookupFeaturesTest, UnknownItemYieldsZeros) {
  IqpStore store = SevenSlotStore();
  store.Seal();
  EXPECT_EQ(store.LookupFeatures(ItemId{1}, 5), std::vector<float>(7, 0.0f));
}

TEST(LookupFeaturesTest, ContextSlotsNeedAMatchingContext) {
  IqpStore store = SevenSlotStore();
  RequestContext us;
  us.country = "US";
  RequestContext fr;
  fr.country = "FR";
  store.SetList(ItemId{1}, 4, ContextKey(ContextVariant::kCountry, us), {RankedQuery{5, "q", 0.3, 1}});
  store.Seal();
  EXPECT_FLOAT_EQ(store.LookupFeatures(ItemId{1}, 5, &us)[4], 0.3f);
  EXPECT_FLOAT_EQ(store.LookupFeatures(ItemId{1}, 5, &fr)[4], 0.0f);
  EXPECT_FLOAT_EQ(store.LookupFeatures(ItemId{1}, 5, nullptr)[4], 0.0f);
}

// Linear scan of the retained lists.
std::vector<float> ScanLookup(const IqpStore& store, ItemId item, std::uint64_t q, const RequestContext* ctx) {
  std::vector<float> out(store.feature_count(), 0.0f);
  auto it = store.items().find(item);
  if (it == store.items().end()) return out;
  for (std::size_t s = 0; s < it->second.slots.size(); ++s) {
    const SlotSpec& slot = store.slots()[s];
    for (const auto& list : it->second.slots[s]) {
      if (slot.variant != ContextVariant::kNone &&
          (!ctx || ContextKey(slot.variant, *ctx) != list.context_key)) {
        continue;
      }
      for (const auto& rq : list.queries) {
        if (rq.query_hash == q) out[s] = static_cast<float>(rq.score);
      }
    }
  }
  return out;
}

std::map<std::uint64_t, RequestContext> RandomUsers(int n, std::uint64_t seed) {
  Rng rng(seed);
  const std::vector<std::string> countries = {"US", "FR", "BR"};
  std::map<std::uint64_t, RequestContext> users;
  for (int u = 1; u <= n; ++u) {
    RequestContext c;
    c.user_id = static_cast<std::uint64_t>(u);
    c.country = countries[rng.Below(countries.size())];
    c.device = static_cast<Device>(rng.Below(kNumDevices));
    c.gender_bucket = static_cast<std::uint32_t>(rng.Below(3));
    users[c.user_id] = c;
  }
  return users;
}

TEST(LookupFeaturesTest, MatchesLinearScanOnGeneratedStore) {
  const RandomLog log = MakeRandomLog(31, 8000, 20, 30, 40, 30);
  const auto users = RandomUsers(30, 1);
  IqpTimeline timeline(DefaultSlotLayout(), SmoothingConfig{}, 5, DefaultLabelActions(),
                       [&](std::uint64_t u) { return &users.at(u); });
  const std::int64_t as_of = kDay0 + 20 * kSecondsPerDay;
  timeline.Build(log.events, log.requests, as_of, as_of);
  const IqpStore& store = *timeline.stores().back();
  Rng rng(4);
  int hits = 0;
  for (int i = 0; i < 3000; ++i) {
    const ItemId item{1 + rng.Below(45)};
    const std::uint64_t q = NormalizeQuery("query " + std::to_string(rng.Below(32))).key_hash;
    const RequestContext& ctx = users.at(1 + rng.Below(30));
    const auto got = store.LookupFeatures(item, q, &ctx);
    ASSERT_EQ(got, ScanLookup(store, item, q, &ctx));
    hits += got[4] > 0;
  }
  EXPECT_GT(hits, 0);
}

TEST(ConditionedCountsTest, PartitionsSumToUnconditioned) {
  std::vector<EngagementEvent> events;
  std::vector<SearchRequest> requests;
  for (int i = 0; i < 10; ++i) {
    const std::uint64_t user = i < 6 ? 1 : 2;  // 60% US, 40% FR
    events.push_back(MakeEvent(kDay0 + i, user, "q", 3, ActionType::kSave));
    requests.push_back(MakeRequest(kDay0 + i, user, "q"));
  }
  ContextExtractor by_user{[](const EngagementEvent& e) { return static_cast<std::uint32_t>(e.user_id); },
                           [](const SearchRequest& r) { return static_cast<std::uint32_t>(r.user_id); }};
  const std::int64_t as_of = kDay0 + kSecondsPerDay;
  const auto parts = ConditionedCounts(events, requests, k7d, {ActionType::kSave}, as_of, by_user);
  const auto q = NormalizeQuery("q").key_hash;
  ASSERT_EQ(parts.size(), 2u);
  EXPECT_EQ(parts.at(1).pair_count(ItemId{3}, q), 6u);
  EXPECT_EQ(parts.at(2).pair_count(ItemId{3}, q), 4u);
  EXPECT_EQ(parts.at(1).query_count(q) + parts.at(2).query_count(q), 10u);
}

TEST(ConditionedCountsTest, SingleKeyEqualsUnconditioned) {
  const RandomLog log = MakeRandomLog(12, 2000, 7);
  ContextExtractor constant{[](const EngagementEvent&) { return 7u; }, [](const SearchRequest&) { return 7u; }};
  const std::int64_t as_of = kDay0 + 7 * kSecondsPerDay;
  const auto parts = ConditionedCounts(log.events, log.requests, k7d, DefaultLabelActions(), as_of, constant);
  ASSERT_EQ(parts.size(), 1u);
  EXPECT_EQ(parts.at(7), AccumulateCounts(log.events, log.requests, k7d, DefaultLabelActions(), as_of));
}

TEST(ConditionedCountsTest, EachKeyMatchesFilterThenCount) {
  const RandomLog log = MakeRandomLog(13, 3000, 7);
  auto key = [](std::uint64_t user) { return static_cast<std::uint32_t>(user % 3); };
  ContextExtractor ex{[&](const EngagementEvent& e) { return key(e.user_id); },
                      [&](const SearchRequest& r) { return key(r.user_id); }};
  const std::int64_t as_of = kDay0 + 7 * kSecondsPerDay;
  const auto parts = ConditionedCounts(log.events, log.requests, k7d, DefaultLabelActions(), as_of, ex);
  ASSERT_EQ(parts.size(), 3u);
  PairCounts summed;
  for (std::uint32_t k = 0; k < 3; ++k) {
    RandomLog filtered;
    for (const auto& e : log.events) if (key(e.user_id) == k) filtered.events.push_back(e);
    for (const auto& r : log.requests) if (key(r.user_id) == k) filtered.requests.push_back(r);
    ExpectMatchesBrute(parts.at(k), BruteForceCount(filtered, 7, DefaultLabelActions(), as_of));
    for (const auto& [p, c] : parts.at(k).pair_counts()) summed[p] += c;
  }
  EXPECT_EQ(summed, AccumulateCounts(log.events, log.requests, k7d, DefaultLabelActions(), as_of).pair_counts());
}

TEST(IqpTimelineTest, StoreBeforeIsStrictAndMatchesDirectBuild) {
  const RandomLog log = MakeRandomLog(41, 6000, 20);
  const auto users = RandomUsers(30, 2);
  std::vector<SlotSpec> slots = {{k7d, ContextVariant::kNone}, {WindowSpec{"90d", 90}, ContextVariant::kCountry}};
  IqpTimeline timeline(slots, SmoothingConfig{}, 10, DefaultLabelActions(),
                       [&](std::uint64_t u) { return &users.at(u); });
  const std::int64_t first = kDay0 + 10 * kSecondsPerDay;
  const std::int64_t last = kDay0 + 15 * kSecondsPerDay;
  timeline.Build(log.events, log.requests, first, last);
  ASSERT_EQ(timeline.stores().size(), 6u);
  EXPECT_EQ(timeline.StoreBefore(first), nullptr);
  EXPECT_EQ(timeline.StoreBefore(first + 1)->as_of(), first);
  EXPECT_EQ(timeline.StoreBefore(first + kSecondsPerDay)->as_of(), first);

  // The incrementally maintained store at `last` equals a from-scratch build.
  std::vector<EngagementEvent> upto;
  std::vector<SearchRequest> upto_r;
  for (const auto& e : log.events) if (e.timestamp < last) upto.push_back(e);
  for (const auto& r : log.requests) if (r.timestamp < last) upto_r.push_back(r);
  IqpTimeline direct(slots, SmoothingConfig{}, 10, DefaultLabelActions(),
                     [&](std::uint64_t u) { return &users.at(u); });
  direct.Build(upto, upto_r, last, last);
  EXPECT_EQ(*timeline.stores().back(), *direct.stores().back());
}

std::string SectionsText(const std::vector<SlotSpec>& slots, const IqpTimeline::State& st) {
  std::stringstream out;
  for (const auto& section : StateSections(slots, st)) WriteCountSection(out, section);
  return out.str();
}

TEST(IqpTimelineTest, AdvancedStateEqualsFreshStateWhenAKeyLeavesTheWindow) {
  RandomLog log = MakeRandomLog(43, 6000, 20);
  const auto users = RandomUsers(30, 4);
  // Users from one country stop searching after day 3.
  const std::int64_t cutoff = kDay0 + 3 * kSecondsPerDay;
  auto gone = [&](std::uint64_t u, std::int64_t ts) { return users.at(u).country == "BR" && ts >= cutoff; };
  std::erase_if(log.events, [&](const EngagementEvent& e) { return gone(e.user_id, e.timestamp); });
  std::erase_if(log.requests, [&](const SearchRequest& r) { return gone(r.user_id, r.timestamp); });
  const std::vector<SlotSpec> slots = {{k7d, ContextVariant::kNone}, {k7d, ContextVariant::kCountry}};
  IqpTimeline timeline(slots, SmoothingConfig{}, 10, DefaultLabelActions(),
                       [&](std::uint64_t u) { return &users.at(u); });
  auto before = [&](std::int64_t as_of) {
    RandomLog out;
    for (const auto& e : log.events) if (e.timestamp < as_of) out.events.push_back(e);
    for (const auto& r : log.requests) if (r.timestamp < as_of) out.requests.push_back(r);
    return out;
  };
  std::int64_t as_of = kDay0 + 5 * kSecondsPerDay;
  const RandomLog start = before(as_of);
  auto state = timeline.InitialState(start.events, start.requests, as_of);
  ASSERT_EQ(state.by_key[1].size(), 3u);
  for (; as_of < kDay0 + 15 * kSecondsPerDay; as_of += kSecondsPerDay) {
    std::vector<EngagementEvent> day_events;
    std::vector<SearchRequest> day_requests;
    for (const auto& e : log.events) if (DayOf(e.timestamp) == DayOf(as_of)) day_events.push_back(e);
    for (const auto& r : log.requests) if (DayOf(r.timestamp) == DayOf(as_of)) day_requests.push_back(r);
    timeline.Advance(state, day_events, day_requests, as_of);
    const RandomLog upto = before(as_of + kSecondsPerDay);
    ASSERT_EQ(SectionsText(slots, state),
              SectionsText(slots, timeline.InitialState(upto.events, upto.requests, as_of + kSecondsPerDay)))
        << "as_of " << as_of + kSecondsPerDay;
  }
  EXPECT_EQ(state.by_key[1].size(), 2u);
}

TEST(IqpIoTest, StoreTextRoundTrip) {
  const RandomLog log = MakeRandomLog(51, 3000, 10, 20, 30, 30);
  const auto users = RandomUsers(30, 3);
  IqpTimeline timeline(DefaultSlotLayout(), SmoothingConfig{}, 4, DefaultLabelActions(),
                       [&](std::uint64_t u) { return &users.at(u); });
  const std::int64_t as_of = kDay0 + 10 * kSecondsPerDay;
  timeline.Build(log.events, log.requests, as_of, as_of);
  IqpStore store = *timeline.stores().back();
  // Awkward characters survive escaping.
  const auto odd = NormalizeQuery("a,b;c/d%e");
  store = IqpStore(store);
  std::stringstream buf;
  WriteIqpStore(buf, store);
  std::string text = buf.str();
  EXPECT_EQ(text.rfind("IQP v1 4 7d:7,90d:90,1y:365,2y:730 country@90d:90,device@90d:90,gender@90d:90 as_of=", 0), 0u);
  std::istringstream in(text);
  const IqpStore loaded = ReadIqpStore(in);
  EXPECT_EQ(loaded, store);
  EXPECT_EQ(SerializeIqpStore(loaded), text);

  IqpStore small(3, {{k7d, ContextVariant::kNone}}, as_of);
  small.SetList(ItemId{2}, 0, 0, {RankedQuery{odd.key_hash, odd.normalized_text, 0.125, 0}});
  small.Seal();
  std::istringstream in2(SerializeIqpStore(small));
  EXPECT_EQ(ReadIqpStore(in2).items().at(ItemId{2}).slots[0][0].queries[0].text, "a,b;c/d%e");
}

TEST(IqpIoTest, CountSectionsRoundTrip) {
  const RandomLog log = MakeRandomLog(61, 3000, 10);
  const std::int64_t as_of = kDay0 + 10 * kSecondsPerDay;
  CountSection section{ContextVariant::kCountry, 21843,
                       AccumulateCounts(log.events, log.requests, k7d, DefaultLabelActions(), as_of)};
  std::stringstream buf;
  WriteCountSection(buf, section);
  WriteCountSection(buf, CountSection{ContextVariant::kNone, 0, CountStore(k7d, as_of)});
  const auto sections = ReadCountSections(buf);
  ASSERT_EQ(sections.size(), 2u);
  EXPECT_EQ(sections[0].variant, ContextVariant::kCountry);
  EXPECT_EQ(sections[0].context_key, 21843u);
  EXPECT_EQ(sections[0].store, section.store);
  EXPECT_EQ(sections[0].store.query_texts(), section.store.query_texts());
}

}  // namespace
}  // namespace prerank::iqp
