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

#include <functional>
#include <map>
#include <memory>
#include <span>
#include <vector>

#include "prerank/iqp/count_store.hpp"
#include "prerank/iqp/iqp_io.hpp"
#include "prerank/iqp/iqp_store.hpp"

namespace prerank::iqp {

// Sealed IQP stores for a run of consecutive day boundaries, maintained by
// one batch accumulation followed by daily MergeCounts steps.
class IqpTimeline {
 public:
  using UserContextFn = std::function<const RequestContext*(std::uint64_t user_id)>;

  IqpTimeline(std::vector<SlotSpec> slots, SmoothingConfig smoothing, std::size_t k,
              ActionSet engagement_actions, UserContextFn user_context)
      : slots_(std::move(slots)),
        smoothing_(smoothing),
        k_(k),
        actions_(engagement_actions),
        user_context_(std::move(user_context)) {}

  // Seals one store at every day boundary in [first_as_of, last_as_of].
  void Build(std::span<const EngagementEvent> events, std::span<const SearchRequest> requests,
             std::int64_t first_as_of, std::int64_t last_as_of) {
    stores_.clear();
    std::map<std::int64_t, std::vector<EngagementEvent>> events_by_day;
    std::map<std::int64_t, std::vector<SearchRequest>> requests_by_day;
    std::vector<EngagementEvent> past_events;
    std::vector<SearchRequest> past_requests;
    for (const auto& e : events) {
      if (e.timestamp < first_as_of) {
        if (actions_.Contains(e.action)) past_events.push_back(e);
      } else if (e.timestamp < last_as_of && actions_.Contains(e.action)) {
        events_by_day[DayOf(e.timestamp)].push_back(e);
      }
    }
    for (const auto& r : requests) {
      if (r.timestamp < first_as_of) {
        past_requests.push_back(r);
      } else if (r.timestamp < last_as_of) {
        requests_by_day[DayOf(r.timestamp)].push_back(r);
      }
    }

    State state = InitialState(past_events, past_requests, first_as_of);
    stores_.push_back(std::make_shared<const IqpStore>(Seal(state)));
    static const std::vector<EngagementEvent> kNoEvents;
    static const std::vector<SearchRequest> kNoRequests;
    for (std::int64_t as_of = first_as_of; as_of < last_as_of; as_of += kSecondsPerDay) {
      const std::int64_t day = as_of / kSecondsPerDay;
      auto ev = events_by_day.find(day);
      auto rq = requests_by_day.find(day);
      Advance(state, ev == events_by_day.end() ? kNoEvents : ev->second,
              rq == requests_by_day.end() ? kNoRequests : rq->second, as_of);
      stores_.push_back(std::make_shared<const IqpStore>(Seal(state)));
    }
  }

  const std::vector<std::shared_ptr<const IqpStore>>& stores() const { return stores_; }

  // Latest store whose as_of is strictly before `timestamp`, or null.
  std::shared_ptr<const IqpStore> StoreBefore(std::int64_t timestamp) const {
    std::shared_ptr<const IqpStore> best;
    for (const auto& s : stores_) {
      if (s->as_of() < timestamp) best = s;
    }
    return best;
  }

  const std::vector<SlotSpec>& slots() const { return slots_; }

 // Raw counts behind one sealed store. Exposed so the `iqp` command can
  // persist them between a full build and daily updates.
  struct State {
    std::vector<CountStore> global;                             // per slot (global slots)
    std::vector<std::map<std::uint32_t, CountStore>> by_key;    // per slot (context slots)
    std::int64_t as_of = 0;
  };

  ContextExtractor ExtractorFor(ContextVariant variant) const {
    auto key_of_user = [this, variant](std::uint64_t user) -> std::uint32_t {
      const RequestContext* ctx = user_context_ ? user_context_(user) : nullptr;
      return ctx ? ContextKey(variant, *ctx) : 0;
    };
    return {[key_of_user](const EngagementEvent& e) { return key_of_user(e.user_id); },
            [key_of_user](const SearchRequest& r) { return key_of_user(r.user_id); }};
  }

  State InitialState(std::span<const EngagementEvent> events,
                     std::span<const SearchRequest> requests, std::int64_t as_of) const {
    State st;
    st.global.resize(slots_.size());
    st.by_key.resize(slots_.size());
    st.as_of = as_of;
    for (std::size_t s = 0; s < slots_.size(); ++s) {
      if (slots_[s].variant == ContextVariant::kNone) {
        st.global[s] = AccumulateCounts(events, requests, slots_[s].window, actions_, as_of);
      } else {
        st.by_key[s] = ConditionedCounts(events, requests, slots_[s].window, actions_, as_of,
                                         ExtractorFor(slots_[s].variant));
      }
    }
    return st;
  }

  void Advance(State& st, std::span<const EngagementEvent> events,
               std::span<const SearchRequest> requests, std::int64_t day_start) const {
    st.as_of = day_start + kSecondsPerDay;
    for (std::size_t s = 0; s < slots_.size(); ++s) {
      const WindowSpec& window = slots_[s].window;
      if (slots_[s].variant == ContextVariant::kNone) {
        st.global[s] = MergeCounts(std::move(st.global[s]),
                                   AccumulateDay(events, requests, window, actions_, day_start));
        continue;
      }
      const ContextExtractor ex = ExtractorFor(slots_[s].variant);
      std::map<std::uint32_t, std::pair<std::vector<EngagementEvent>, std::vector<SearchRequest>>> parts;
      for (const auto& e : events) parts[ex.of_event(e)].first.push_back(e);
      for (const auto& r : requests) parts[ex.of_request(r)].second.push_back(r);
      for (const auto& [key, _] : parts) {
        st.by_key[s].try_emplace(key, CountStore(window, day_start));
      }
      for (auto& [key, store] : st.by_key[s]) {
        auto p = parts.find(key);
        CountStore delta = p == parts.end()
                               ? CountStore(window, day_start + kSecondsPerDay)
                               : AccumulateDay(p->second.first, p->second.second, window,
                                               actions_, day_start);
        store = MergeCounts(std::move(store), delta);
      }
      // A batch build has no entry for a key with nothing left in the window.
      std::erase_if(st.by_key[s], [](const auto& entry) {
        return entry.second.pair_counts().empty() && entry.second.query_counts().empty();
      });
    }
  }

  IqpStore Seal(const State& st) const {
    SlotCounts counts;
    counts.global.resize(slots_.size(), nullptr);
    counts.conditioned.resize(slots_.size(), nullptr);
    for (std::size_t s = 0; s < slots_.size(); ++s) {
      if (slots_[s].variant == ContextVariant::kNone) {
        counts.global[s] = &st.global[s];
      } else {
        counts.conditioned[s] = &st.by_key[s];
      }
    }
    return BuildIqpStore(slots_, counts, smoothing_, k_, st.as_of);
  }

 private:
  std::vector<SlotSpec> slots_;
  SmoothingConfig smoothing_;
  std::size_t k_;
  ActionSet actions_;
  UserContextFn user_context_;
  std::vector<std::shared_ptr<const IqpStore>> stores_;
};

inline std::vector<CountSection> StateSections(const std::vector<SlotSpec>& slots, const IqpTimeline::State& st) {
  std::vector<CountSection> out;
  for (std::size_t s = 0; s < slots.size(); ++s) {
    if (slots[s].variant == ContextVariant::kNone) {
      out.push_back({ContextVariant::kNone, 0, st.global[s]});
    } else {
      for (const auto& [key, store] : st.by_key[s]) out.push_back({slots[s].variant, key, store});
    }
  }
  return out;
}

// Inverse of StateSections. Every global slot must be present and all
// sections must share one as_of.
inline IqpTimeline::State StateFromSections(const std::vector<SlotSpec>& slots, std::vector<CountSection> sections) {
  IqpTimeline::State st;
  st.global.resize(slots.size());
  st.by_key.resize(slots.size());
  std::vector<bool> seen(slots.size(), false);
  bool first = true;
  for (auto& sec : sections) {
    if (first) {
      st.as_of = sec.store.as_of();
      first = false;
    } else if (sec.store.as_of() != st.as_of) {
      throw Error(ErrorCode::kFormatError, "count sections disagree on as_of");
    }
    std::size_t s = 0;
    while (s < slots.size() && !(slots[s].window == sec.store.window() && slots[s].variant == sec.variant)) ++s;
    if (s == slots.size()) {
      throw Error(ErrorCode::kWindowMismatch, "count section matches no slot: " + sec.store.window().name);
    }
    seen[s] = true;
    if (sec.variant == ContextVariant::kNone) {
      st.global[s] = std::move(sec.store);
    } else {
      st.by_key[s].insert_or_assign(sec.context_key, std::move(sec.store));
    }
  }
  for (std::size_t s = 0; s < slots.size(); ++s) {
    if (!seen[s] && slots[s].variant == ContextVariant::kNone) {
      throw Error(ErrorCode::kWindowMismatch, "missing counts for slot " + slots[s].Name());
    }
  }
  return st;
}

}  // namespace prerank::iqp
