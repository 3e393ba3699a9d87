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

#include <cmath>
#include <span>
#include <string_view>
#include <vector>

#include "prerank/core/hash.hpp"
#include "prerank/model/tensor.hpp"

namespace prerank::model {

inline std::size_t TokenBucket(std::string_view token, std::size_t buckets) {
  return static_cast<std::size_t>(Fnv1a64(token) % buckets);
}

// Mean of the selected table rows; zero when `rows` is empty.
template <typename T>
void EmbedTokens(const Tensor<T>& table, std::span<const std::size_t> rows, std::span<T> out) {
  std::fill(out.begin(), out.end(), T(0));
  if (rows.empty()) return;
  for (std::size_t r : rows) {
    auto src = table.row(r);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += src[i];
  }
  const T inv = T(1) / static_cast<T>(rows.size());
  for (T& v : out) v *= inv;
}

// alpha = softmax(v . e_i + time_bias[bucket_i]), out = sum alpha_i e_i.
template <typename T>
void WeightedPool(const std::vector<std::vector<T>>& entries, std::span<const std::size_t> buckets,
                  std::span<const T> v, std::span<const T> time_bias, std::vector<T>& alpha,
                  std::span<T> out) {
  std::fill(out.begin(), out.end(), T(0));
  alpha.resize(entries.size());
  if (entries.empty()) return;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    alpha[i] = Dot<T>(v, entries[i]) + time_bias[buckets[i]];
  }
  Softmax<T>(alpha);
  for (std::size_t i = 0; i < entries.size(); ++i) {
    for (std::size_t j = 0; j < out.size(); ++j) out[j] += alpha[i] * entries[i][j];
  }
}

template <typename T>
void WeightedPoolBackward(const std::vector<std::vector<T>>& entries,
                          std::span<const std::size_t> buckets, std::span<const T> v,
                          std::span<const T> alpha, std::span<const T> dout,
                          std::vector<std::vector<T>>& dentries, std::span<T> dv,
                          std::span<T> dtime_bias) {
  const std::size_t n = entries.size();
  if (n == 0) return;
  std::vector<T> dalpha(n);
  T weighted = T(0);
  for (std::size_t i = 0; i < n; ++i) {
    dalpha[i] = Dot<T>(dout, entries[i]);
    weighted += alpha[i] * dalpha[i];
  }
  for (std::size_t i = 0; i < n; ++i) {
    const T ds = alpha[i] * (dalpha[i] - weighted);
    for (std::size_t j = 0; j < dout.size(); ++j) {
      dentries[i][j] += alpha[i] * dout[j] + ds * v[j];
      dv[j] += ds * entries[i][j];
    }
    dtime_bias[buckets[i]] += ds;
  }
}

// key = W^T t, beta = softmax(key . e_i / sqrt(dim)), out = sum beta_i e_i.
// W is query_dim x entry_dim.
template <typename T>
void CrossAttention(const std::vector<std::vector<T>>& entries, std::span<const T> query,
                    std::span<const T> w, std::vector<T>& key, std::vector<T>& beta,
                    std::span<T> out) {
  const std::size_t dim = out.size();
  std::fill(out.begin(), out.end(), T(0));
  key.assign(dim, T(0));
  MatTVecAdd<T>(w, query, key);
  beta.resize(entries.size());
  if (entries.empty()) return;
  const T scale = T(1) / std::sqrt(static_cast<T>(dim));
  for (std::size_t i = 0; i < entries.size(); ++i) beta[i] = Dot<T>(key, entries[i]) * scale;
  Softmax<T>(beta);
  for (std::size_t i = 0; i < entries.size(); ++i) {
    for (std::size_t j = 0; j < dim; ++j) out[j] += beta[i] * entries[i][j];
  }
}

template <typename T>
void CrossAttentionBackward(const std::vector<std::vector<T>>& entries, std::span<const T> query,
                            std::span<const T> w, std::span<const T> key, std::span<const T> beta,
                            std::span<const T> dout, std::vector<std::vector<T>>& dentries,
                            std::span<T> dquery, std::span<T> dw) {
  const std::size_t n = entries.size();
  if (n == 0) return;
  const std::size_t dim = dout.size();
  const T scale = T(1) / std::sqrt(static_cast<T>(dim));
  std::vector<T> dbeta(n);
  T weighted = T(0);
  for (std::size_t i = 0; i < n; ++i) {
    dbeta[i] = Dot<T>(dout, entries[i]);
    weighted += beta[i] * dbeta[i];
  }
  std::vector<T> dkey(dim, T(0));
  for (std::size_t i = 0; i < n; ++i) {
    const T dr = beta[i] * (dbeta[i] - weighted) * scale;
    for (std::size_t j = 0; j < dim; ++j) {
      dentries[i][j] += beta[i] * dout[j] + dr * key[j];
      dkey[j] += dr * entries[i][j];
    }
  }
  OuterAdd<T>(dw, query, dkey);
  const std::size_t qdim = query.size();
  for (std::size_t r = 0; r < qdim; ++r) {
    dquery[r] += Dot<T>(std::span<const T>(w.data() + r * dim, dim), dkey);
  }
}

}  // namespace prerank::model
