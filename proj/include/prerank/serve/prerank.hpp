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
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "prerank/core/error.hpp"
#include "prerank/model/checkpoint.hpp"
#include "prerank/model/features.hpp"
#include "prerank/model/score.hpp"
#include "prerank/serve/index.hpp"
#include "prerank/serve/structured_query.hpp"

namespace prerank::serve {

struct PrerankRequest {
  model::QueryFeatures query;
  std::vector<ItemId> candidates;
  // Score every item in the index instead of `candidates`.
  bool all_candidates = false;
  std::size_t n_out = 1000;
};

struct RankedItem {
  ItemId item;
  double score = 0.0;

  friend bool operator==(const RankedItem&, const RankedItem&) = default;
};

// Higher score first; equal scores by ascending item id.
inline bool RanksBefore(const RankedItem& a, const RankedItem& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.item < b.item;
}

// Keeps the best `capacity` items seen so far in a heap whose top is the
// current worst.
class TopN {
 public:
  explicit TopN(std::size_t capacity) : capacity_(capacity) { heap_.reserve(capacity); }

  void Offer(const RankedItem& r) {
    if (heap_.size() < capacity_) {
      heap_.push_back(r);
      std::push_heap(heap_.begin(), heap_.end(), RanksBefore);
    } else if (RanksBefore(r, heap_.front())) {
      std::pop_heap(heap_.begin(), heap_.end(), RanksBefore);
      heap_.back() = r;
      std::push_heap(heap_.begin(), heap_.end(), RanksBefore);
    }
  }

  std::vector<RankedItem> Take() {
    std::sort_heap(heap_.begin(), heap_.end(), RanksBefore);
    return std::move(heap_);
  }

 private:
  std::size_t capacity_;
  std::vector<RankedItem> heap_;
};

// Online scorer over one immutable (model, snapshot) pair.
class Scorer {
 public:
  // Throws DigestMismatch when the snapshot was built from another
  // checkpoint. Without interactions the tree is the bare dot product.
  Scorer(std::shared_ptr<const model::Model> model, std::shared_ptr<const IndexSnapshot> snapshot,
         bool with_interactions = true)
      : model_(std::move(model)), snapshot_(std::move(snapshot)) {
    const std::uint64_t digest = model::CheckpointDigest(*model_);
    if (snapshot_->header().model_digest != digest) {
      throw Error(ErrorCode::kDigestMismatch, "index was built from model " +
                                                  HexDigest(snapshot_->header().model_digest) +
                                                  ", supplied checkpoint is " + HexDigest(digest));
    }
    if (snapshot_->size() > 0 && snapshot_->embed_dim() != model_->config().embed_dim) {
      throw Error(ErrorCode::kLayoutMismatch, "index embedding width differs from the model");
    }
    projection_ = model_->EffectiveProjection();
    tree_ = with_interactions ? CompileProjection(projection_, snapshot_->slots().size()) : QueryNode::Dot();
    fetch_iqp_ = tree_.UsesFeatures();
  }

  const QueryNode& tree() const { return tree_; }
  const model::Model& model() const { return *model_; }
  const IndexSnapshot& snapshot() const { return *snapshot_; }
  const std::shared_ptr<const IndexSnapshot>& snapshot_ptr() const { return snapshot_; }

  std::vector<float> EmbedQuery(const model::QueryFeatures& q) const { return model_->EmbedQuery(q); }

  std::vector<RankedItem> Prerank(const PrerankRequest& request) const {
    if (request.n_out == 0) throw Error(ErrorCode::kInvalidArgument, "n_out must be at least 1");
    if (!request.all_candidates && request.candidates.empty()) {
      throw Error(ErrorCode::kEmptyCandidates, "request has no candidates");
    }
    const std::vector<float> q = EmbedQuery(request.query);
    const std::vector<std::uint32_t> keys = snapshot_->ContextKeys(request.query.context);
    const std::uint64_t qhash = request.query.query.key_hash;
    std::vector<float> feats(snapshot_->slots().size(), 0.0f);
    const std::size_t total = request.all_candidates ? snapshot_->size() : request.candidates.size();
    TopN top(std::min(request.n_out, total));
    for (std::size_t c = 0; c < total; ++c) {
      const ItemId item = request.all_candidates ? ItemId{snapshot_->ids()[c]} : request.candidates[c];
      const std::size_t pos = request.all_candidates ? c : snapshot_->Find(item);
      top.Offer({item, ScoreAt(pos, q, qhash, keys, feats)});
    }
    return top.Take();
  }

  // Raw score of the entry at `pos`; -infinity when absent.
  double ScoreAt(std::size_t pos, std::span<const float> q, std::uint64_t qhash,
                 std::span<const std::uint32_t> keys, std::span<float> feats) const {
    if (pos == IndexSnapshot::kAbsent) return -std::numeric_limits<double>::infinity();
    if (fetch_iqp_) snapshot_->FetchIqp(pos, qhash, keys, feats);
    return Evaluate(tree_, CandidateInputs{q, snapshot_->Embedding(pos), feats});
  }

  // Operation count of one candidate evaluation under the counting policy.
  std::uint64_t CountOperations(std::size_t pos, std::span<const float> q, std::uint64_t qhash,
                                std::span<const std::uint32_t> keys) const {
    std::vector<float> feats(snapshot_->slots().size(), 0.0f);
    if (fetch_iqp_) snapshot_->FetchIqp(pos, qhash, keys, feats);
    CountingArith arith;
    Evaluate(tree_, CandidateInputs{q, snapshot_->Embedding(pos), feats}, arith);
    return arith.ops;
  }

  std::optional<model::ScoreBreakdown> Explain(const model::QueryFeatures& query, std::span<const float> q,
                                               ItemId item) const {
    const std::size_t pos = snapshot_->Find(item);
    if (pos == IndexSnapshot::kAbsent) return std::nullopt;
    std::vector<float> feats(snapshot_->slots().size(), 0.0f);
    snapshot_->FetchIqp(pos, query.query.key_hash, snapshot_->ContextKeys(query.context), feats);
    std::span<const float> iqp = projection_.iqp_weights.empty() ? std::span<const float>() : feats;
    return model::ScorePair(q, snapshot_->Embedding(pos), iqp, projection_, model_->config().embed_dim);
  }

 private:
  std::shared_ptr<const model::Model> model_;
  std::shared_ptr<const IndexSnapshot> snapshot_;
  model::ProjectionWeights projection_;
  QueryNode tree_;
  bool fetch_iqp_ = false;
};

}  // namespace prerank::serve
