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
#include <limits>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <tuple>
#include <unordered_map>
#include <vector>

#include "prerank/core/error.hpp"
#include "prerank/core/label.hpp"
#include "prerank/core/random.hpp"
#include "prerank/core/types.hpp"
#include "prerank/iqp/timeline.hpp"
#include "prerank/model/features.hpp"
#include "prerank/model/item_catalog.hpp"

namespace prerank::train {

// One impressed (query, item) pair with everything the model consumes.
struct TrainExample {
  // Shared by every candidate of the same request.
  std::shared_ptr<const model::QueryFeatures> query;
  // Points into the item catalog, which must outlive the example.
  const model::ItemFeatures* item = nullptr;
  std::vector<float> iqp;
  UnifiedLabel label;
  ActionSet actions;
  std::int64_t timestamp = 0;
  std::int64_t iqp_as_of = 0;
  std::uint64_t request_index = 0;
};

struct Impression {
  std::int64_t timestamp = 0;
  std::uint64_t user_id = 0;
  QueryKey query;
  ItemId item;
  std::uint64_t session_id = 0;
  ActionSet actions;
};

inline bool ImpressionLess(const Impression& a, const Impression& b) {
  return std::tie(a.timestamp, a.user_id, a.query.normalized_text, a.item.value) <
         std::tie(b.timestamp, b.user_id, b.query.normalized_text, b.item.value);
}

// Joins impression events with the engagement events on the same
// (timestamp, user, query, item). An engagement without a logged impression
// still counts as one. Sorted by timestamp, user, query text, item.
inline std::vector<Impression> CollectImpressions(std::span<const EngagementEvent> events) {
  using Key = std::tuple<std::int64_t, std::uint64_t, std::string, std::uint64_t>;
  std::map<Key, Impression> by_key;
  for (const auto& e : events) {
    Key key{e.timestamp, e.user_id, e.query.normalized_text, e.item.value};
    auto [it, inserted] = by_key.try_emplace(std::move(key));
    if (inserted) {
      it->second = Impression{e.timestamp, e.user_id, e.query, e.item, e.session_id, {}};
    }
    if (e.action != ActionType::kImpression) it->second.actions.Insert(e.action);
  }
  std::vector<Impression> out;
  out.reserve(by_key.size());
  for (auto& [k, imp] : by_key) out.push_back(std::move(imp));
  return out;
}

// Per-user engagement history used to build sequence features.
class SequenceIndex {
 public:
  SequenceIndex(std::span<const EngagementEvent> events, ActionSet actions, const model::ItemCatalog& catalog)
      : catalog_(catalog) {
    for (const auto& e : events) {
      if (actions.Contains(e.action)) by_user_[e.user_id].push_back({e.timestamp, e.item, e.action});
    }
    for (auto& [user, list] : by_user_) {
      std::stable_sort(list.begin(), list.end(),
                       [](const Entry& a, const Entry& b) { return a.timestamp < b.timestamp; });
    }
  }

  // Engagements strictly before `timestamp`, most recent first. Items without
  // catalog features are skipped.
  std::vector<model::SequenceEntry> Before(std::uint64_t user, std::int64_t timestamp, std::size_t max_len) const {
    std::vector<model::SequenceEntry> out;
    auto it = by_user_.find(user);
    if (it == by_user_.end()) return out;
    const auto& list = it->second;
    auto end = std::lower_bound(list.begin(), list.end(), timestamp,
                                [](const Entry& e, std::int64_t ts) { return e.timestamp < ts; });
    while (end != list.begin() && out.size() < max_len) {
      --end;
      const model::ItemRecord* rec = catalog_.Find(end->item);
      if (rec == nullptr) continue;
      out.push_back({rec->features.content, end->action, timestamp - end->timestamp});
    }
    return out;
  }

 private:
  struct Entry {
    std::int64_t timestamp;
    ItemId item;
    ActionType action;
  };
  const model::ItemCatalog& catalog_;
  std::unordered_map<std::uint64_t, std::vector<Entry>> by_user_;
};

struct DatasetConfig {
  // Impressions before start_time only feed history; train covers
  // [start_time, split_time) and test covers [split_time, end_time).
  std::int64_t start_time = std::numeric_limits<std::int64_t>::min();
  std::int64_t split_time = 0;
  std::int64_t end_time = std::numeric_limits<std::int64_t>::max();
  double downsample_rate = 1.0;
  std::uint64_t seed = 1;
  ActionSet label_actions = DefaultLabelActions();
  ActionWeights weights = ActionWeights::Defaults();
  std::size_t seq_max_len = 100;
  bool use_context = true;
};

struct Dataset {
  std::vector<TrainExample> train;
  std::vector<TrainExample> test;
};

struct DataSources {
  std::span<const EngagementEvent> events;
  const std::unordered_map<std::uint64_t, RequestContext>* users = nullptr;
  const model::ItemCatalog* catalog = nullptr;
  const iqp::IqpTimeline* timeline = nullptr;
};

inline std::unordered_map<std::uint64_t, RequestContext> IndexUsers(std::span<const RequestContext> users) {
  std::unordered_map<std::uint64_t, RequestContext> out;
  for (const auto& u : users) out[u.user_id] = u;
  return out;
}

// True when a train negative is kept by downsampling; consumes one draw per
// train negative in impression order.
inline bool KeepNegative(Rng& rng, double rate) { return rng.Uniform() < rate; }

inline Dataset BuildDataset(const DataSources& src, const DatasetConfig& config) {
  if (src.catalog == nullptr || src.timeline == nullptr) {
    throw Error(ErrorCode::kInvalidArgument, "dataset needs an item catalog and an IQP timeline");
  }
  if (!(config.downsample_rate > 0.0 && config.downsample_rate <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "downsample_rate must be in (0, 1]");
  }
  if (config.split_time < config.start_time || config.split_time > config.end_time) {
    throw Error(ErrorCode::kInvalidArgument, "split_time outside the dataset range");
  }
  const std::vector<Impression> impressions = CollectImpressions(src.events);
  const SequenceIndex sequences(src.events, config.label_actions, *src.catalog);
  Rng rng(config.seed);
  Dataset out;

  std::shared_ptr<model::QueryFeatures> current;
  std::shared_ptr<const iqp::IqpStore> store;
  std::uint64_t request_index = 0;
  const Impression* prev = nullptr;
  for (const Impression& imp : impressions) {
    if (imp.timestamp < config.start_time || imp.timestamp >= config.end_time) continue;
    const bool is_train = imp.timestamp < config.split_time;
    const UnifiedLabel label = ComputeUnifiedLabel(imp.actions, config.label_actions, config.weights);
    if (is_train && label.value == 0 && !KeepNegative(rng, config.downsample_rate)) continue;
    const model::ItemRecord* rec = src.catalog->Find(imp.item);
    if (rec == nullptr) {
      throw Error(ErrorCode::kMissingFeatures, "no features for impressed item " + std::to_string(imp.item.value));
    }
    const bool same_request = prev != nullptr && prev->timestamp == imp.timestamp &&
                              prev->user_id == imp.user_id && prev->query == imp.query;
    if (!same_request) {
      current = std::make_shared<model::QueryFeatures>();
      current->query = imp.query;
      current->context.user_id = imp.user_id;
      if (src.users != nullptr) {
        auto it = src.users->find(imp.user_id);
        if (it != src.users->end()) current->context = it->second;
      }
      current->sequence = sequences.Before(imp.user_id, imp.timestamp, config.seq_max_len);
      store = src.timeline->StoreBefore(imp.timestamp);
      if (store == nullptr) {
        throw Error(ErrorCode::kInvalidArgument,
                    "no IQP store sealed before timestamp " + std::to_string(imp.timestamp));
      }
      ++request_index;
    }
    prev = &imp;
    TrainExample ex;
    ex.query = current;
    ex.item = &rec->features;
    ex.iqp = store->LookupFeatures(imp.item, imp.query.key_hash, config.use_context ? &current->context : nullptr);
    ex.label = label;
    ex.actions = imp.actions;
    ex.timestamp = imp.timestamp;
    ex.iqp_as_of = store->as_of();
    ex.request_index = request_index;
    (is_train ? out.train : out.test).push_back(std::move(ex));
  }
  if (out.train.empty()) throw Error(ErrorCode::kEmptySplit, "no training examples before split_time");
  return out;
}

struct AuditReport {
  std::size_t train_at_or_after_split = 0;
  std::size_t test_before_split = 0;
  std::size_t iqp_not_before_example = 0;

  bool clean() const {
    return train_at_or_after_split == 0 && test_before_split == 0 && iqp_not_before_example == 0;
  }
};

inline AuditReport AuditDataset(const Dataset& d, std::int64_t split_time) {
  AuditReport r;
  for (const auto& ex : d.train) {
    if (ex.timestamp >= split_time) ++r.train_at_or_after_split;
    if (ex.iqp_as_of >= ex.timestamp) ++r.iqp_not_before_example;
  }
  for (const auto& ex : d.test) {
    if (ex.timestamp < split_time) ++r.test_before_split;
    if (ex.iqp_as_of >= ex.timestamp) ++r.iqp_not_before_example;
  }
  return r;
}

}  // namespace prerank::train
