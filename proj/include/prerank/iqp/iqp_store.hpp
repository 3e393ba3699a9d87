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
#include <unordered_map>
#include <vector>

#include "prerank/core/error.hpp"
#include "prerank/core/types.hpp"
#include "prerank/iqp/count_store.hpp"

namespace prerank::iqp {

struct SmoothingConfig {
  double alpha = 1.0;
  double beta = 20.0;
  std::uint64_t min_query_count = 5;
};

struct IqpEntry {
  ItemId item;
  std::uint64_t query_hash = 0;
  std::uint64_t pair_count = 0;
  double score = 0.0;
};

// score(p,q) = (C(p,q) + alpha) / (C(q) + beta), emitted only for pairs with
// C(p,q) > 0 and C(q) >= min_query_count. Sorted by (item, query_hash).
inline std::vector<IqpEntry> ComputeIqp(const CountStore& counts, const SmoothingConfig& smoothing) {
  std::vector<IqpEntry> out;
  out.reserve(counts.pair_counts().size());
  for (const auto& [key, c] : counts.pair_counts()) {
    if (c == 0) continue;
    const std::uint64_t cq = counts.query_count(key.query_hash);
    if (cq < smoothing.min_query_count) continue;
    const double denom = static_cast<double>(cq) + smoothing.beta;
    if (denom <= 0.0) continue;
    out.push_back({ItemId{key.item}, key.query_hash, c,
                   (static_cast<double>(c) + smoothing.alpha) / denom});
  }
  std::sort(out.begin(), out.end(), [](const IqpEntry& a, const IqpEntry& b) {
    return std::tie(a.item, a.query_hash) < std::tie(b.item, b.query_hash);
  });
  return out;
}

struct RankedQuery {
  std::uint64_t query_hash = 0;
  std::string text;
  double score = 0.0;
  std::uint64_t pair_count = 0;  // tie-break input only; not persisted

  friend bool operator==(const RankedQuery& a, const RankedQuery& b) {
    return a.query_hash == b.query_hash && a.text == b.text && a.score == b.score;
  }
};

// Descending score, then higher C(p,q), then smaller query hash.
inline bool RanksBefore(const RankedQuery& a, const RankedQuery& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.pair_count != b.pair_count) return a.pair_count > b.pair_count;
  return a.query_hash < b.query_hash;
}

using TopKLists = std::map<ItemId, std::vector<RankedQuery>>;

// Keeps the K best queries per item. `texts` supplies query strings for the
// store file and may be null.
inline TopKLists TopKRetain(std::span<const IqpEntry> scores, std::size_t k,
                            const std::unordered_map<std::uint64_t, std::string>* texts = nullptr) {
  if (k == 0) throw Error(ErrorCode::kInvalidArgument, "K must be at least 1");
  TopKLists lists;
  for (const IqpEntry& e : scores) {
    RankedQuery rq{e.query_hash, {}, e.score, e.pair_count};
    if (texts) {
      auto it = texts->find(e.query_hash);
      if (it != texts->end()) rq.text = it->second;
    }
    lists[e.item].push_back(std::move(rq));
  }
  for (auto& [item, list] : lists) {
    if (list.size() > k) {
      std::partial_sort(list.begin(), list.begin() + static_cast<std::ptrdiff_t>(k), list.end(),
                        RanksBefore);
      list.resize(k);
    } else {
      std::sort(list.begin(), list.end(), RanksBefore);
    }
  }
  return lists;
}

enum class ContextVariant : std::uint8_t { kNone = 0, kCountry, kDevice, kGender };

inline std::string_view ContextVariantName(ContextVariant v) {
  switch (v) {
    case ContextVariant::kNone: return "none";
    case ContextVariant::kCountry: return "country";
    case ContextVariant::kDevice: return "device";
    case ContextVariant::kGender: return "gender";
  }
  return "none";
}

inline std::optional<ContextVariant> ParseContextVariant(std::string_view name) {
  for (auto v : {ContextVariant::kNone, ContextVariant::kCountry, ContextVariant::kDevice,
                 ContextVariant::kGender}) {
    if (ContextVariantName(v) == name) return v;
  }
  return std::nullopt;
}

// Discrete key of a request context under `variant`. Countries pack their two
// ASCII letters so the key needs no vocabulary.
inline std::uint32_t ContextKey(ContextVariant variant, const RequestContext& ctx) {
  switch (variant) {
    case ContextVariant::kNone: return 0;
    case ContextVariant::kCountry: {
      std::uint32_t key = 0;
      for (std::size_t i = 0; i < 2 && i < ctx.country.size(); ++i) {
        key = (key << 8) | static_cast<unsigned char>(ctx.country[i]);
      }
      return key;
    }
    case ContextVariant::kDevice: return static_cast<std::uint32_t>(ctx.device);
    case ContextVariant::kGender: return ctx.gender_bucket;
  }
  return 0;
}

// One feature slot: a window, optionally conditioned on a context variant.
struct SlotSpec {
  WindowSpec window;
  ContextVariant variant = ContextVariant::kNone;

  std::string Name() const {
    return variant == ContextVariant::kNone
               ? window.name
               : std::string(ContextVariantName(variant)) + "@" + window.name;
  }
  friend bool operator==(const SlotSpec&, const SlotSpec&) = default;
};

// Four global windows followed by three 90d variants.
inline std::vector<SlotSpec> DefaultSlotLayout() {
  std::vector<SlotSpec> slots;
  for (const auto& w : DefaultWindows()) slots.push_back({w, ContextVariant::kNone});
  const WindowSpec w90{"90d", 90};
  slots.push_back({w90, ContextVariant::kCountry});
  slots.push_back({w90, ContextVariant::kDevice});
  slots.push_back({w90, ContextVariant::kGender});
  return slots;
}

// Per-item top-K signal lists for every slot, plus an exact-match index used
// by LookupFeatures. Immutable once sealed.
class IqpStore {
 public:
  struct ContextList {
    std::uint32_t context_key = 0;
    std::vector<RankedQuery> queries;

    friend bool operator==(const ContextList&, const ContextList&) = default;
  };
  // slots[s] holds one list for global slots and one per context key otherwise.
  struct ItemSignal {
    std::vector<std::vector<ContextList>> slots;

    friend bool operator==(const ItemSignal&, const ItemSignal&) = default;
  };

  IqpStore() = default;
  IqpStore(std::size_t k, std::vector<SlotSpec> slots, std::int64_t as_of)
      : k_(k), slots_(std::move(slots)), as_of_(as_of) {}

  std::size_t k() const { return k_; }
  const std::vector<SlotSpec>& slots() const { return slots_; }
  std::size_t feature_count() const { return slots_.size(); }
  std::int64_t as_of() const { return as_of_; }
  const std::map<ItemId, ItemSignal>& items() const { return items_; }
  bool sealed() const { return sealed_; }

  void SetList(ItemId item, std::size_t slot, std::uint32_t context_key,
               std::vector<RankedQuery> queries) {
    if (sealed_) throw Error(ErrorCode::kInvalidArgument, "store is sealed");
    auto& signal = items_[item];
    signal.slots.resize(slots_.size());
    auto& lists = signal.slots[slot];
    auto it = std::lower_bound(lists.begin(), lists.end(), context_key,
                               [](const ContextList& l, std::uint32_t k) { return l.context_key < k; });
    if (it != lists.end() && it->context_key == context_key) {
      it->queries = std::move(queries);
    } else {
      lists.insert(it, ContextList{context_key, std::move(queries)});
    }
  }

  void Seal() {
    index_.clear();
    for (const auto& [item, signal] : items_) {
      for (std::size_t s = 0; s < signal.slots.size(); ++s) {
        for (const auto& list : signal.slots[s]) {
          for (const auto& q : list.queries) {
            index_[PairKey{item.value, q.query_hash}].push_back(
                {static_cast<std::uint32_t>(s), list.context_key, static_cast<float>(q.score)});
          }
        }
      }
    }
    sealed_ = true;
  }

  // One float per slot in layout order; 0 where the query is absent from the
  // item's list. Context slots read 0 when no context is given.
  std::vector<float> LookupFeatures(ItemId item, std::uint64_t query_hash,
                                    const RequestContext* context = nullptr) const {
    std::vector<float> out(slots_.size(), 0.0f);
    LookupInto(item, query_hash, context, out);
    return out;
  }

  void LookupInto(ItemId item, std::uint64_t query_hash, const RequestContext* context,
                  std::span<float> out) const {
    if (!sealed_) throw Error(ErrorCode::kInvalidArgument, "store must be sealed before lookup");
    std::fill(out.begin(), out.end(), 0.0f);
    auto it = index_.find(PairKey{item.value, query_hash});
    if (it == index_.end()) return;
    for (const Hit& h : it->second) {
      const SlotSpec& slot = slots_[h.slot];
      if (slot.variant == ContextVariant::kNone) {
        out[h.slot] = h.score;
      } else if (context && ContextKey(slot.variant, *context) == h.context_key) {
        out[h.slot] = h.score;
      }
    }
  }

  // Contents only; the lookup index is derived.
  friend bool operator==(const IqpStore& a, const IqpStore& b) {
    return a.k_ == b.k_ && a.slots_ == b.slots_ && a.as_of_ == b.as_of_ && a.items_ == b.items_;
  }

 private:
  struct Hit {
    std::uint32_t slot;
    std::uint32_t context_key;
    float score;
  };

  std::size_t k_ = 100;
  std::vector<SlotSpec> slots_;
  std::int64_t as_of_ = 0;
  std::map<ItemId, ItemSignal> items_;
  std::unordered_map<PairKey, std::vector<Hit>, PairKeyHash> index_;
  bool sealed_ = false;
};

// Count stores feeding one IqpStore: `global[s]` for each global slot,
// `conditioned[s]` for each context slot (keyed by context key).
struct SlotCounts {
  std::vector<const CountStore*> global;
  std::vector<const std::map<std::uint32_t, CountStore>*> conditioned;
};

inline IqpStore BuildIqpStore(const std::vector<SlotSpec>& slots, const SlotCounts& counts,
                              const SmoothingConfig& smoothing, std::size_t k, std::int64_t as_of) {
  if (counts.global.size() != slots.size() || counts.conditioned.size() != slots.size()) {
    throw Error(ErrorCode::kLayoutMismatch, "slot count mismatch while building IQP store");
  }
  IqpStore store(k, slots, as_of);
  for (std::size_t s = 0; s < slots.size(); ++s) {
    if (slots[s].variant == ContextVariant::kNone) {
      const CountStore* cs = counts.global[s];
      if (!cs) throw Error(ErrorCode::kLayoutMismatch, "missing counts for slot " + slots[s].Name());
      auto lists = TopKRetain(ComputeIqp(*cs, smoothing), k, &cs->query_texts());
      for (auto& [item, list] : lists) store.SetList(item, s, 0, std::move(list));
    } else {
      const auto* by_key = counts.conditioned[s];
      if (!by_key) throw Error(ErrorCode::kLayoutMismatch, "missing counts for slot " + slots[s].Name());
      for (const auto& [key, cs] : *by_key) {
        auto lists = TopKRetain(ComputeIqp(cs, smoothing), k, &cs.query_texts());
        for (auto& [item, list] : lists) store.SetList(item, s, key, std::move(list));
      }
    }
  }
  store.Seal();
  return store;
}

}  // namespace prerank::iqp
