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
#include <array>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "prerank/core/error.hpp"
#include "prerank/core/hash.hpp"
#include "prerank/core/query.hpp"
#include "prerank/core/random.hpp"
#include "prerank/core/types.hpp"
#include "prerank/model/features.hpp"
#include "prerank/model/layers.hpp"
#include "prerank/model/model_config.hpp"
#include "prerank/model/sequence.hpp"
#include "prerank/model/tensor.hpp"

namespace prerank::model {

// Projection weights with the IQP input scale folded in, so that
// raw = dot_weight * dot + sum iqp_weights[k] * iqp[k] + bias.
struct ProjectionWeights {
  double dot_weight = 0.0;
  std::vector<double> iqp_weights;
  double bias = 0.0;
};

inline std::size_t VocabIndex(const std::vector<std::string>& vocab, const std::string& value) {
  for (std::size_t i = 0; i < vocab.size(); ++i) {
    if (vocab[i] == value) return i + 1;
  }
  return 0;
}

template <typename T>
class TwoTowerModel {
 public:
  struct QueryTrace {
    std::vector<std::size_t> token_rows;
    std::array<std::size_t, 5> context_rows{};
    std::vector<std::vector<T>> entries;
    std::vector<std::size_t> actions;
    std::vector<std::size_t> buckets;
    std::vector<T> alpha;
    std::vector<T> beta;
    std::vector<T> attn_key;
    std::vector<T> token_mean;
    Tower::Trace<T> tower;
  };

  struct ItemTrace {
    std::size_t id_row = 0;
    Tower::Trace<T> tower;
  };

  explicit TwoTowerModel(const ModelConfig& config) : config_(config) {
    config_.Validate();
    Rng rng(config_.init_seed);
    Build(&rng);
  }

  // Adopts `params` after checking names and shapes against the layout that
  // `config` implies.
  TwoTowerModel(const ModelConfig& config, ParamSet<T> params) : config_(config) {
    config_.Validate();
    Build(nullptr);
    if (params.size() != params_.size()) {
      throw Error(ErrorCode::kLayoutMismatch, "parameter count does not match model layout");
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
      const auto& want = params_[i];
      const auto& got = params[i];
      if (want.name != got.name || want.rows != got.rows || want.cols != got.cols) {
        throw Error(ErrorCode::kLayoutMismatch, "parameter " + got.name + " does not match " + want.name);
      }
    }
    params_ = std::move(params);
    params_.ZeroGrad();
  }

  template <typename U>
  TwoTowerModel<U> Cast() const {
    return TwoTowerModel<U>(config_, params_.template Cast<U>());
  }

  const ModelConfig& config() const { return config_; }
  ParamSet<T>& params() { return params_; }
  const ParamSet<T>& params() const { return params_; }

  std::vector<T> EmbedQuery(const QueryFeatures& f, QueryTrace* trace = nullptr) const {
    if (!config_.use_towers) return std::vector<T>(config_.embed_dim, T(0));
    QueryTrace local;
    QueryTrace& t = trace != nullptr ? *trace : local;
    const std::size_t td = config_.token_dim, cd = config_.context_dim, ed = config_.entry_dim();
    auto& x = t.tower.input;
    x.assign(config_.query_input_dim(), T(0));

    t.token_rows.clear();
    for (std::string_view tok : QueryTokens(f.query)) {
      t.token_rows.push_back(TokenBucket(tok, config_.token_buckets));
    }
    t.token_mean.assign(td, T(0));
    EmbedTokens<T>(params_[token_table_], t.token_rows, t.token_mean);
    std::copy(t.token_mean.begin(), t.token_mean.end(), x.begin());

    t.context_rows = ContextRows(f.context);
    for (std::size_t k = 0; k < 5; ++k) {
      auto row = params_[context_tables_[k]].row(t.context_rows[k]);
      std::copy(row.begin(), row.end(), x.begin() + static_cast<std::ptrdiff_t>(td + k * cd));
    }

    if (config_.use_sequence) {
      BuildEntries(f.sequence, t);
      const std::size_t off = td + 5 * cd;
      std::span<T> xs(x);
      WeightedPool<T>(t.entries, t.buckets, params_[pool_vector_].value, params_[time_bias_].value,
                      t.alpha, xs.subspan(off, ed));
      CrossAttention<T>(t.entries, t.token_mean, params_[attn_matrix_].value, t.attn_key, t.beta,
                        xs.subspan(off + ed, ed));
    }
    query_tower_.Forward<T>(params_, t.tower);
    return t.tower.output;
  }

  std::vector<T> EmbedItem(const ItemFeatures& f, ItemTrace* trace = nullptr) const {
    if (!config_.use_towers) return std::vector<T>(config_.embed_dim, T(0));
    if (f.engagement_rates.size() != config_.engagement_rate_dim || f.content.dim() != config_.content_dim) {
      throw Error(ErrorCode::kDimensionMismatch, "item features have wrong width");
    }
    ItemTrace local;
    ItemTrace& t = trace != nullptr ? *trace : local;
    auto& x = t.tower.input;
    x.clear();
    x.reserve(config_.item_input_dim());
    t.id_row = static_cast<std::size_t>(Mix64(f.id.value) % config_.item_id_buckets);
    auto row = params_[item_id_table_].row(t.id_row);
    x.insert(x.end(), row.begin(), row.end());
    for (float v : f.engagement_rates) x.push_back(static_cast<T>(v));
    for (float v : f.content.values()) x.push_back(static_cast<T>(v));
    item_tower_.Forward<T>(params_, t.tower);
    return t.tower.output;
  }

  void BackwardQuery(const QueryTrace& t, std::span<const T> demb) {
    if (!config_.use_towers) return;
    const std::size_t td = config_.token_dim, cd = config_.context_dim, ed = config_.entry_dim();
    const std::vector<T> dx = query_tower_.Backward<T>(params_, t.tower, demb);
    std::vector<T> dtoken(dx.begin(), dx.begin() + static_cast<std::ptrdiff_t>(td));
    for (std::size_t k = 0; k < 5; ++k) {
      auto g = params_[context_tables_[k]].grad_row(t.context_rows[k]);
      for (std::size_t i = 0; i < cd; ++i) g[i] += dx[td + k * cd + i];
    }
    if (config_.use_sequence && !t.entries.empty()) {
      const std::size_t off = td + 5 * cd;
      std::span<const T> dxs(dx);
      std::vector<std::vector<T>> dentries(t.entries.size(), std::vector<T>(ed, T(0)));
      WeightedPoolBackward<T>(t.entries, t.buckets, params_[pool_vector_].value, t.alpha,
                              dxs.subspan(off, ed), dentries, params_[pool_vector_].grad,
                              params_[time_bias_].grad);
      CrossAttentionBackward<T>(t.entries, t.token_mean, params_[attn_matrix_].value, t.attn_key,
                                t.beta, dxs.subspan(off + ed, ed), dentries, dtoken,
                                params_[attn_matrix_].grad);
      const std::size_t id = config_.seq_item_dim, ad = config_.action_dim;
      for (std::size_t i = 0; i < t.entries.size(); ++i) {
        auto ga = params_[action_table_].grad_row(t.actions[i]);
        for (std::size_t j = 0; j < ad; ++j) ga[j] += dentries[i][id + j];
        auto gt = params_[time_table_].grad_row(t.buckets[i]);
        for (std::size_t j = 0; j < config_.time_dim; ++j) gt[j] += dentries[i][id + ad + j];
      }
    }
    if (!t.token_rows.empty()) {
      const T inv = T(1) / static_cast<T>(t.token_rows.size());
      for (std::size_t r : t.token_rows) {
        auto g = params_[token_table_].grad_row(r);
        for (std::size_t i = 0; i < td; ++i) g[i] += dtoken[i] * inv;
      }
    }
  }

  void BackwardItem(const ItemTrace& t, std::span<const T> demb) {
    if (!config_.use_towers) return;
    const std::vector<T> dx = item_tower_.Backward<T>(params_, t.tower, demb);
    auto g = params_[item_id_table_].grad_row(t.id_row);
    for (std::size_t i = 0; i < config_.item_id_dim; ++i) g[i] += dx[i];
  }

  // Pre-sigmoid score from the embedding dot product and the IQP features.
  T Project(T dot, std::span<const float> iqp) const {
    CheckIqpWidth(iqp);
    const auto& w = params_[proj_w_].value;
    T raw = params_[proj_b_].value[0];
    std::size_t k = 0;
    if (config_.use_towers) raw += w[k++] * dot;
    const T scale = static_cast<T>(config_.iqp_scale);
    for (float v : iqp) raw += w[k++] * scale * static_cast<T>(v);
    return raw;
  }

  // Accumulates projection gradients and returns d raw / d dot.
  T BackwardProject(T dot, std::span<const float> iqp, T draw) {
    auto& w = params_[proj_w_];
    params_[proj_b_].grad[0] += draw;
    std::size_t k = 0;
    T ddot = T(0);
    if (config_.use_towers) {
      w.grad[k] += draw * dot;
      ddot = draw * w.value[k];
      ++k;
    }
    const T scale = static_cast<T>(config_.iqp_scale);
    for (float v : iqp) w.grad[k++] += draw * scale * static_cast<T>(v);
    return ddot;
  }

  ProjectionWeights EffectiveProjection() const {
    ProjectionWeights out;
    const auto& w = params_[proj_w_].value;
    std::size_t k = 0;
    if (config_.use_towers) out.dot_weight = static_cast<double>(w[k++]);
    for (std::size_t i = 0; i < config_.projection_features(); ++i) {
      out.iqp_weights.push_back(static_cast<double>(w[k++]) * config_.iqp_scale);
    }
    out.bias = static_cast<double>(params_[proj_b_].value[0]);
    return out;
  }

  void CheckIqpWidth(std::span<const float> iqp) const {
    if (iqp.size() != config_.projection_features()) {
      throw Error(ErrorCode::kDimensionMismatch,
                  "expected " + std::to_string(config_.projection_features()) + " IQP features, got " +
                      std::to_string(iqp.size()));
    }
  }

  std::array<std::size_t, 5> ContextRows(const RequestContext& c) const {
    return {VocabIndex(config_.countries, c.country), static_cast<std::size_t>(c.device),
            VocabIndex(config_.languages, c.language),
            std::min<std::size_t>(c.age_bucket, config_.age_buckets - 1),
            std::min<std::size_t>(c.gender_bucket, config_.gender_buckets - 1)};
  }

 private:
  void Build(Rng* rng) {
    const ModelConfig& c = config_;
    auto table = [&](const std::string& name, std::size_t rows, std::size_t cols) {
      const std::size_t h = params_.Add(name, rows, cols);
      if (rng != nullptr) FillUniform<T>(params_[h].value, 1.0 / std::sqrt(static_cast<double>(cols)), *rng);
      return h;
    };
    if (c.use_towers) {
      token_table_ = table("query.token_emb", c.token_buckets, c.token_dim);
      context_tables_[0] = table("query.country_emb", c.countries.size() + 1, c.context_dim);
      context_tables_[1] = table("query.device_emb", 3, c.context_dim);
      context_tables_[2] = table("query.language_emb", c.languages.size() + 1, c.context_dim);
      context_tables_[3] = table("query.age_emb", c.age_buckets, c.context_dim);
      context_tables_[4] = table("query.gender_emb", c.gender_buckets, c.context_dim);
      if (c.use_sequence) {
        action_table_ = table("seq.action_emb", kAllActions.size(), c.action_dim);
        time_table_ = table("seq.time_emb", kNumTimeBuckets, c.time_dim);
        pool_vector_ = table("seq.pool_v", 1, c.entry_dim());
        time_bias_ = params_.Add("seq.time_bias", 1, kNumTimeBuckets);
        attn_matrix_ = table("seq.attn_w", c.token_dim, c.entry_dim());
      }
      const std::size_t blocks = c.use_masknet ? c.masknet_blocks : 0;
      query_tower_ = Tower::Create(params_, "query", c.query_input_dim(), blocks, c.mask_hidden,
                                   c.block_out, c.query_hidden, c.embed_dim, rng);
      item_id_table_ = table("item.id_emb", c.item_id_buckets, c.item_id_dim);
      item_tower_ = Tower::Create(params_, "item", c.item_input_dim(), blocks, c.mask_hidden,
                                  c.block_out, c.item_hidden, c.embed_dim, rng);
    }
    const std::size_t width = (c.use_towers ? 1 : 0) + c.projection_features();
    proj_w_ = table("proj.w", 1, width);
    proj_b_ = params_.Add("proj.b", 1, 1);
  }

  void BuildEntries(const std::vector<SequenceEntry>& seq, QueryTrace& t) const {
    const std::size_t n = std::min(seq.size(), config_.seq_max_len);
    const std::size_t id = config_.seq_item_dim;
    t.entries.assign(n, {});
    t.actions.resize(n);
    t.buckets.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const SequenceEntry& s = seq[i];
      if (s.item.dim() != id) {
        throw Error(ErrorCode::kDimensionMismatch, "sequence item embedding has wrong width");
      }
      t.actions[i] = static_cast<std::size_t>(s.action);
      t.buckets[i] = TimeBucket(s.age_seconds);
      auto& e = t.entries[i];
      e.reserve(config_.entry_dim());
      for (float v : s.item.values()) e.push_back(static_cast<T>(v));
      auto a = params_[action_table_].row(t.actions[i]);
      e.insert(e.end(), a.begin(), a.end());
      auto b = params_[time_table_].row(t.buckets[i]);
      e.insert(e.end(), b.begin(), b.end());
    }
  }

  ModelConfig config_;
  ParamSet<T> params_;
  std::size_t token_table_ = 0;
  std::array<std::size_t, 5> context_tables_{};
  std::size_t action_table_ = 0;
  std::size_t time_table_ = 0;
  std::size_t pool_vector_ = 0;
  std::size_t time_bias_ = 0;
  std::size_t attn_matrix_ = 0;
  std::size_t item_id_table_ = 0;
  std::size_t proj_w_ = 0;
  std::size_t proj_b_ = 0;
  Tower query_tower_;
  Tower item_tower_;
};

using Model = TwoTowerModel<float>;

}  // namespace prerank::model
