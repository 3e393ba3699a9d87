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
#include <vector>

#include "prerank/core/error.hpp"
#include "prerank/model/tensor.hpp"

namespace prerank::train {

struct LossWeights {
  double phi_e = 1.0;
  double phi_s = 0.01;

  void Validate() const {
    if (!(phi_e >= 0.0) || !(phi_s >= 0.0)) {
      throw Error(ErrorCode::kInvalidArgument, "loss weights must be non-negative");
    }
  }
};

struct EngagementLossResult {
  double loss = 0.0;
  // d loss / d p_i.
  std::vector<double> grad;
};

// Weighted mean binary cross entropy over N examples.
inline EngagementLossResult EngagementLoss(std::span<const double> p, std::span<const int> labels,
                                           std::span<const double> weights) {
  if (p.size() != labels.size() || p.size() != weights.size()) {
    throw Error(ErrorCode::kLengthMismatch, "probabilities, labels and weights differ in length");
  }
  if (p.empty()) throw Error(ErrorCode::kEmptyInput, "engagement loss needs at least one example");
  const double n = static_cast<double>(p.size());
  EngagementLossResult out;
  out.grad.resize(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (!(p[i] > 0.0 && p[i] < 1.0)) {
      throw Error(ErrorCode::kDomainError, "probability " + std::to_string(p[i]) + " outside (0,1)");
    }
    const double u = labels[i];
    out.loss -= weights[i] * (u * std::log(p[i]) + (1.0 - u) * std::log1p(-p[i]));
    out.grad[i] = weights[i] * ((1.0 - u) / (1.0 - p[i]) - u / p[i]) / n;
  }
  out.loss /= n;
  return out;
}

// Same loss evaluated from logits; the gradient is with respect to the logit.
template <typename T>
T EngagementLossFromLogits(std::span<const T> raw, std::span<const int> labels, std::span<const T> weights,
                           std::span<T> grad) {
  const T n = static_cast<T>(raw.size());
  T loss = T(0);
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const T z = raw[i];
    // -log sigmoid(z) = softplus(-z), -log(1 - sigmoid(z)) = softplus(z).
    const T term = labels[i] != 0 ? model::Softplus(-z) : model::Softplus(z);
    loss += weights[i] * term;
    grad[i] = weights[i] * (model::Sigmoid(z) - static_cast<T>(labels[i])) / n;
  }
  return loss / n;
}

template <typename T>
struct SampledSoftmaxResult {
  T loss = T(0);
  std::vector<std::vector<T>> dq;
  std::vector<std::vector<T>> di;
};

// In-batch sampled softmax with logQ correction. Row i's positive is item i;
// every item in the batch acts as a candidate for every row. Rows with a zero
// label contribute nothing.
template <typename T>
SampledSoftmaxResult<T> SampledSoftmaxLoss(const std::vector<std::vector<T>>& q,
                                           const std::vector<std::vector<T>>& items,
                                           std::span<const int> labels, std::span<const double> log_q) {
  const std::size_t b = q.size();
  if (b < 2) throw Error(ErrorCode::kBatchTooSmall, "sampled softmax needs a batch of at least 2");
  if (items.size() != b || labels.size() != b || log_q.size() != b) {
    throw Error(ErrorCode::kLengthMismatch, "sampled softmax inputs differ in length");
  }
  const std::size_t d = q.front().size();
  SampledSoftmaxResult<T> out;
  out.dq.assign(b, std::vector<T>(d, T(0)));
  out.di.assign(b, std::vector<T>(d, T(0)));
  const T inv_b = T(1) / static_cast<T>(b);
  std::vector<T> row(b);
  for (std::size_t i = 0; i < b; ++i) {
    if (labels[i] == 0) continue;
    const T u = static_cast<T>(labels[i]);
    for (std::size_t j = 0; j < b; ++j) {
      row[j] = model::Dot<T>(q[i], items[j]) - static_cast<T>(log_q[j]);
    }
    model::Softmax<T>(row);
    out.loss -= u * std::log(row[i]);
    for (std::size_t j = 0; j < b; ++j) {
      const T g = u * inv_b * (row[j] - (i == j ? T(1) : T(0)));
      if (g == T(0)) continue;
      for (std::size_t k = 0; k < d; ++k) {
        out.dq[i][k] += g * items[j][k];
        out.di[j][k] += g * q[i][k];
      }
    }
  }
  out.loss *= inv_b;
  return out;
}

inline double CompositeLoss(double engagement, double softmax, const LossWeights& w) {
  return w.phi_e * engagement + w.phi_s * softmax;
}

}  // namespace prerank::train
