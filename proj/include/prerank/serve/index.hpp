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
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "prerank/core/binary_io.hpp"
#include "prerank/core/error.hpp"
#include "prerank/core/types.hpp"
#include "prerank/iqp/iqp_io.hpp"
#include "prerank/iqp/iqp_store.hpp"
#include "prerank/model/checkpoint.hpp"
#include "prerank/model/item_catalog.hpp"

namespace prerank::serve {

// One IQP value for an item: the query it belongs to, its slot and, for
// conditioned slots, the context key.
struct IqpRecord {
  std::uint64_t query_hash = 0;
  std::uint32_t slot = 0;
  std::uint32_t context_key = 0;
  float score = 0.0f;

  friend bool operator==(const IqpRecord&, const IqpRecord&) = default;
};

inline bool IqpRecordLess(const IqpRecord& a, const IqpRecord& b) {
  if (a.query_hash != b.query_hash) return a.query_hash < b.query_hash;
  if (a.slot != b.slot) return a.slot < b.slot;
  return a.context_key < b.context_key;
}

struct ForwardIndexEntry {
  ItemId item;
  EmbeddingVec embedding;
  // Sorted by query hash, slot, context key.
  std::vector<IqpRecord> iqp;

  friend bool operator==(const ForwardIndexEntry&, const ForwardIndexEntry&) = default;
};

inline std::vector<IqpRecord> IqpSlice(const iqp::IqpStore& store, ItemId item) {
  std::vector<IqpRecord> out;
  auto it = store.items().find(item);
  if (it == store.items().end()) return out;
  const auto& slots = it->second.slots;
  for (std::size_t s = 0; s < slots.size(); ++s) {
    for (const auto& list : slots[s]) {
      for (const auto& q : list.queries) {
        out.push_back({q.query_hash, static_cast<std::uint32_t>(s), list.context_key, static_cast<float>(q.score)});
      }
    }
  }
  std::sort(out.begin(), out.end(), IqpRecordLess);
  return out;
}

struct BatchInferenceOptions {
  std::size_t threads = 1;
  // Skip items without features instead of failing.
  bool skip_missing = false;
};

struct BatchInferenceResult {
  std::vector<ForwardIndexEntry> entries;
  std::size_t missing = 0;
};

// Embeds every listed item. Items are split into contiguous partitions, one
// per thread; the output is in input order regardless of thread count.
inline BatchInferenceResult BatchInference(std::span<const ItemId> items, const model::ItemCatalog& catalog,
                                           const model::Model& model, const iqp::IqpStore& store,
                                           const BatchInferenceOptions& options = {}) {
  std::vector<const model::ItemRecord*> records(items.size());
  BatchInferenceResult out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    records[i] = catalog.Find(items[i]);
    if (records[i] == nullptr) {
      if (!options.skip_missing) {
        throw Error(ErrorCode::kMissingFeatures, "no features for item " + std::to_string(items[i].value));
      }
      ++out.missing;
    }
  }
  std::vector<ForwardIndexEntry> slots(items.size());
  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      if (records[i] == nullptr) continue;
      slots[i].item = items[i];
      slots[i].embedding = EmbeddingVec(model.EmbedItem(records[i]->features));
      slots[i].iqp = IqpSlice(store, items[i]);
    }
  };
  const std::size_t threads = std::max<std::size_t>(1, std::min(options.threads, items.size()));
  if (threads <= 1) {
    work(0, items.size());
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (items.size() + threads - 1) / threads;
    for (std::size_t t = 0; t < threads; ++t) {
      const std::size_t begin = t * chunk, end = std::min(items.size(), begin + chunk);
      if (begin < end) pool.emplace_back(work, begin, end);
    }
    for (auto& th : pool) th.join();
  }
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (records[i] != nullptr) out.entries.push_back(std::move(slots[i]));
  }
  return out;
}

inline std::vector<ItemId> CatalogItems(const model::ItemCatalog& catalog) {
  std::vector<ItemId> ids;
  ids.reserve(catalog.size());
  for (const auto& [id, r] : catalog.items()) ids.push_back(ItemId{id});
  return ids;
}

struct SnapshotHeader {
  std::uint64_t model_digest = 0;
  std::uint64_t iqp_digest = 0;
  std::int64_t build_time = 0;
  std::uint64_t entry_count = 0;
  std::uint32_t embed_dim = 0;
  // Slot names in feature order, e.g. "7d,90d,...,country@90d".
  std::string slot_layout;

  friend bool operator==(const SnapshotHeader&, const SnapshotHeader&) = default;
};

inline std::string SlotLayoutString(const std::vector<iqp::SlotSpec>& slots) {
  std::string out;
  for (const auto& s : slots) {
    if (!out.empty()) out += ',';
    out += s.Name() + ":" + std::to_string(s.window.length_days);
  }
  return out;
}

// Sealed, immutable item-keyed store of embeddings and IQP records. Entries
// are held column-wise and sorted by item id.
class IndexSnapshot {
 public:
  static constexpr std::size_t kAbsent = std::numeric_limits<std::size_t>::max();

  IndexSnapshot() = default;

  const SnapshotHeader& header() const { return header_; }
  std::size_t size() const { return ids_.size(); }
  std::size_t embed_dim() const { return header_.embed_dim; }
  std::span<const std::uint64_t> ids() const { return ids_; }
  const std::vector<iqp::SlotSpec>& slots() const { return slots_; }

  // Position of `item` in the entry table, or kAbsent.
  std::size_t Find(ItemId item) const {
    auto it = std::lower_bound(ids_.begin(), ids_.end(), item.value);
    if (it == ids_.end() || *it != item.value) return kAbsent;
    return static_cast<std::size_t>(it - ids_.begin());
  }

  std::span<const float> Embedding(std::size_t pos) const {
    return {embeddings_.data() + pos * header_.embed_dim, header_.embed_dim};
  }

  std::span<const IqpRecord> Iqp(std::size_t pos) const {
    return {records_.data() + offsets_[pos], offsets_[pos + 1] - offsets_[pos]};
  }

  ForwardIndexEntry Entry(std::size_t pos) const {
    auto e = Embedding(pos);
    auto r = Iqp(pos);
    return {ItemId{ids_[pos]}, EmbeddingVec(std::vector<float>(e.begin(), e.end())),
            std::vector<IqpRecord>(r.begin(), r.end())};
  }

  // Writes IQP values for `pos` into `out` (one per slot). `context_keys`
  // holds the request's key for every conditioned slot.
  void FetchIqp(std::size_t pos, std::uint64_t query_hash, std::span<const std::uint32_t> context_keys,
                std::span<float> out) const {
    std::fill(out.begin(), out.end(), 0.0f);
    auto recs = Iqp(pos);
    auto it = std::lower_bound(recs.begin(), recs.end(), query_hash,
                               [](const IqpRecord& r, std::uint64_t h) { return r.query_hash < h; });
    for (; it != recs.end() && it->query_hash == query_hash; ++it) {
      if (slot_global_[it->slot] || context_keys[it->slot] == it->context_key) out[it->slot] = it->score;
    }
  }

  std::vector<std::uint32_t> ContextKeys(const RequestContext& ctx) const {
    std::vector<std::uint32_t> keys(slots_.size(), 0);
    for (std::size_t s = 0; s < slots_.size(); ++s) {
      if (!slot_global_[s]) keys[s] = iqp::ContextKey(slots_[s].variant, ctx);
    }
    return keys;
  }

  friend IndexSnapshot BuildIndex(std::vector<ForwardIndexEntry> entries, SnapshotHeader header,
                                  std::vector<iqp::SlotSpec> slots);
  friend std::string SerializeSnapshot(const IndexSnapshot& s);
  friend IndexSnapshot DeserializeSnapshot(std::string_view bytes);

 private:
  void SetSlots(std::vector<iqp::SlotSpec> slots) {
    slots_ = std::move(slots);
    slot_global_.clear();
    for (const auto& s : slots_) slot_global_.push_back(s.variant == iqp::ContextVariant::kNone);
    header_.slot_layout = SlotLayoutString(slots_);
  }

  SnapshotHeader header_;
  std::vector<iqp::SlotSpec> slots_;
  std::vector<bool> slot_global_;
  std::vector<std::uint64_t> ids_;
  std::vector<float> embeddings_;
  std::vector<std::size_t> offsets_{0};
  std::vector<IqpRecord> records_;
};

// Seals entries into a snapshot. `header` supplies digests and build time;
// counts and layout are filled in here.
inline IndexSnapshot BuildIndex(std::vector<ForwardIndexEntry> entries, SnapshotHeader header,
                                std::vector<iqp::SlotSpec> slots) {
  std::sort(entries.begin(), entries.end(),
            [](const ForwardIndexEntry& a, const ForwardIndexEntry& b) { return a.item < b.item; });
  for (std::size_t i = 1; i < entries.size(); ++i) {
    if (entries[i].item == entries[i - 1].item) {
      throw Error(ErrorCode::kDuplicateItem, "duplicate item " + std::to_string(entries[i].item.value));
    }
  }
  IndexSnapshot s;
  s.header_ = std::move(header);
  s.SetSlots(std::move(slots));
  s.header_.entry_count = entries.size();
  if (!entries.empty()) s.header_.embed_dim = static_cast<std::uint32_t>(entries.front().embedding.dim());
  for (auto& e : entries) {
    if (e.embedding.dim() != s.header_.embed_dim) {
      throw Error(ErrorCode::kDimensionMismatch, "entry embeddings differ in width");
    }
    s.ids_.push_back(e.item.value);
    auto v = e.embedding.values();
    s.embeddings_.insert(s.embeddings_.end(), v.begin(), v.end());
    std::sort(e.iqp.begin(), e.iqp.end(), IqpRecordLess);
    for (const auto& r : e.iqp) {
      if (r.slot >= s.slots_.size()) throw Error(ErrorCode::kLayoutMismatch, "IQP record slot out of range");
    }
    s.records_.insert(s.records_.end(), e.iqp.begin(), e.iqp.end());
    s.offsets_.push_back(s.records_.size());
  }
  return s;
}

inline constexpr std::string_view kSnapshotMagic = "IRIDX1";

// Layout: magic, model digest, IQP digest, build time, entry count,
// embedding width, slot layout, record count; then per entry the item id,
// embedding floats and record count; then all records.
inline std::string SerializeSnapshot(const IndexSnapshot& s) {
  ByteWriter w;
  w.Raw(kSnapshotMagic);
  w.U64(s.header_.model_digest);
  w.U64(s.header_.iqp_digest);
  w.U64(static_cast<std::uint64_t>(s.header_.build_time));
  w.U64(s.header_.entry_count);
  w.U32(s.header_.embed_dim);
  w.Str(s.header_.slot_layout);
  w.U64(s.records_.size());
  for (std::size_t i = 0; i < s.ids_.size(); ++i) {
    w.U64(s.ids_[i]);
    for (float v : s.Embedding(i)) w.F32(v);
    w.U32(static_cast<std::uint32_t>(s.offsets_[i + 1] - s.offsets_[i]));
  }
  for (const auto& r : s.records_) {
    w.U64(r.query_hash);
    w.U32(r.slot);
    w.U32(r.context_key);
    w.F32(r.score);
  }
  return w.Take();
}

inline std::vector<iqp::SlotSpec> ParseSlotLayout(std::string_view layout) {
  std::vector<iqp::SlotSpec> slots;
  std::size_t start = 0;
  while (start < layout.size()) {
    std::size_t comma = layout.find(',', start);
    if (comma == std::string_view::npos) comma = layout.size();
    const auto part = layout.substr(start, comma - start);
    const auto colon = part.rfind(':');
    if (colon == std::string_view::npos) throw Error(ErrorCode::kFormatError, "bad slot layout");
    const auto name = part.substr(0, colon);
    const auto days = ParseInteger<std::int64_t>(part.substr(colon + 1), "window length", 0);
    iqp::SlotSpec spec;
    const auto at = name.find('@');
    if (at == std::string_view::npos) {
      spec.window = {std::string(name), static_cast<int>(days)};
    } else {
      const auto variant = iqp::ParseContextVariant(name.substr(0, at));
      if (!variant) throw Error(ErrorCode::kFormatError, "unknown context variant in slot layout");
      spec.variant = *variant;
      spec.window = {std::string(name.substr(at + 1)), static_cast<int>(days)};
    }
    slots.push_back(spec);
    start = comma + 1;
  }
  return slots;
}

inline IndexSnapshot DeserializeSnapshot(std::string_view bytes) {
  ByteReader r(bytes);
  if (r.Raw(kSnapshotMagic.size()) != kSnapshotMagic) throw Error(ErrorCode::kFormatError, "not an index snapshot");
  IndexSnapshot s;
  s.header_.model_digest = r.U64();
  s.header_.iqp_digest = r.U64();
  s.header_.build_time = static_cast<std::int64_t>(r.U64());
  s.header_.entry_count = r.U64();
  s.header_.embed_dim = r.U32();
  s.SetSlots(ParseSlotLayout(r.Str()));
  const std::uint64_t total_records = r.U64();
  const std::size_t n = s.header_.entry_count, d = s.header_.embed_dim;
  s.ids_.reserve(n);
  s.embeddings_.reserve(n * d);
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint64_t id = r.U64();
    if (!s.ids_.empty() && id <= s.ids_.back()) throw Error(ErrorCode::kFormatError, "snapshot ids not ascending");
    s.ids_.push_back(id);
    for (std::size_t k = 0; k < d; ++k) s.embeddings_.push_back(r.F32());
    s.offsets_.push_back(s.offsets_.back() + r.U32());
  }
  if (s.offsets_.back() != total_records) throw Error(ErrorCode::kFormatError, "snapshot record count mismatch");
  s.records_.resize(total_records);
  for (auto& rec : s.records_) {
    rec.query_hash = r.U64();
    rec.slot = r.U32();
    rec.context_key = r.U32();
    rec.score = r.F32();
    if (rec.slot >= s.slots_.size()) throw Error(ErrorCode::kFormatError, "record slot out of range");
  }
  if (!r.done()) throw Error(ErrorCode::kFormatError, "trailing bytes after snapshot");
  return s;
}

inline void SaveSnapshot(const IndexSnapshot& s, const std::string& path) { WriteFileBytes(path, SerializeSnapshot(s)); }
inline IndexSnapshot LoadSnapshot(const std::string& path) { return DeserializeSnapshot(ReadFileBytes(path)); }

// Full offline build: embed every catalog item and seal the result.
inline IndexSnapshot BuildIndexFromCatalog(const model::ItemCatalog& catalog, const model::Model& model,
                                           const iqp::IqpStore& store, std::int64_t build_time,
                                           std::size_t threads = 1) {
  const auto ids = CatalogItems(catalog);
  auto result = BatchInference(ids, catalog, model, store, {threads, false});
  SnapshotHeader header;
  header.model_digest = model::CheckpointDigest(model);
  header.iqp_digest = iqp::IqpStoreDigest(store);
  header.build_time = build_time;
  header.embed_dim = static_cast<std::uint32_t>(model.config().embed_dim);
  return BuildIndex(std::move(result.entries), header, store.slots());
}

}  // namespace prerank::serve
