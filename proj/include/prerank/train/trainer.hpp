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
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "prerank/core/config_file.hpp"
#include "prerank/core/error.hpp"
#include "prerank/core/random.hpp"
#include "prerank/model/two_tower.hpp"
#include "prerank/train/adam.hpp"
#include "prerank/train/dataset.hpp"
#include "prerank/train/frequency.hpp"
#include "prerank/train/losses.hpp"

namespace prerank::train {

struct TrainingConfig {
  std::uint64_t seed = 1;
  double lr = 1e-3;
  std::size_t batch_size = 64;
  LossWeights loss;
  double downsample_rate = 0.3;
  std::int64_t split_time = 0;
  double epochs = 1.5;
  model::ModelConfig model;

  void Validate() const {
    loss.Validate();
    model.Validate();
    if (batch_size == 0) throw Error(ErrorCode::kInvalidArgument, "batch_size must be positive");
    if (!(epochs > 0.0)) throw Error(ErrorCode::kInvalidArgument, "epochs must be positive");
    if (!(lr >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "lr must be non-negative");
  }

  KeyValueConfig ToKeyValue() const {
    KeyValueConfig kv = model.ToKeyValue();
    char buf[40];
    auto put_double = [&](const char* k, double v) {
      std::snprintf(buf, sizeof(buf), "%.17g", v);
      kv.Set(k, buf);
    };
    kv.Set("seed", std::to_string(seed));
    put_double("lr", lr);
    kv.Set("batch_size", std::to_string(batch_size));
    put_double("phi_e", loss.phi_e);
    put_double("phi_s", loss.phi_s);
    put_double("downsample_rate", downsample_rate);
    kv.Set("split_time", std::to_string(split_time));
    put_double("epochs", epochs);
    return kv;
  }

  void UpdateFrom(const KeyValueConfig& kv) {
    seed = kv.GetInt<std::uint64_t>("seed", seed);
    lr = kv.GetDouble("lr", lr);
    batch_size = kv.GetInt<std::size_t>("batch_size", batch_size);
    loss.phi_e = kv.GetDouble("phi_e", loss.phi_e);
    loss.phi_s = kv.GetDouble("phi_s", loss.phi_s);
    downsample_rate = kv.GetDouble("downsample_rate", downsample_rate);
    split_time = kv.GetInt<std::int64_t>("split_time", split_time);
    epochs = kv.GetDouble("epochs", epochs);
    model.UpdateFrom(kv);
  }
};

struct LossParts {
  double total = 0.0;
  double engagement = 0.0;
  double softmax = 0.0;
};

// Forward and backward over one batch. Accumulates parameter gradients into
// the model (callers zero them first). The softmax term only reaches the
// towers; it is skipped when the model has no towers or the batch has fewer
// than two examples.
template <typename T>
LossParts AccumulateBatchGradients(model::TwoTowerModel<T>& m, std::span<const TrainExample* const> batch,
                                   const FrequencyEstimator& freq, const LossWeights& weights) {
  using Model = model::TwoTowerModel<T>;
  const std::size_t n = batch.size();
  if (n == 0) throw Error(ErrorCode::kEmptyInput, "empty batch");
  const bool towers = m.config().use_towers;
  const bool use_iqp = m.config().use_iqp;
  std::vector<typename Model::QueryTrace> qt(towers ? n : 0);
  std::vector<typename Model::ItemTrace> it(towers ? n : 0);
  std::vector<std::vector<T>> q(n), p(n);
  std::vector<T> dots(n), raw(n), weights_e(n), draw(n);
  std::vector<int> labels(n);
  auto iqp_of = [&](std::size_t i) {
    return use_iqp ? std::span<const float>(batch[i]->iqp) : std::span<const float>();
  };
  for (std::size_t i = 0; i < n; ++i) {
    const TrainExample& ex = *batch[i];
    if (ex.query == nullptr || ex.item == nullptr) {
      throw Error(ErrorCode::kMissingFeatures, "example without query or item features");
    }
    if (towers) {
      q[i] = m.EmbedQuery(*ex.query, &qt[i]);
      p[i] = m.EmbedItem(*ex.item, &it[i]);
      dots[i] = model::Dot<T>(q[i], p[i]);
    } else {
      dots[i] = T(0);
    }
    raw[i] = m.Project(dots[i], iqp_of(i));
    labels[i] = ex.label.value;
    weights_e[i] = static_cast<T>(ex.label.weight);
  }
  LossParts parts;
  parts.engagement = static_cast<double>(EngagementLossFromLogits<T>(raw, labels, weights_e, draw));

  std::vector<std::vector<T>> dq, dp;
  if (towers) {
    dq.assign(n, std::vector<T>(q.front().size(), T(0)));
    dp.assign(n, std::vector<T>(q.front().size(), T(0)));
  }
  const T phi_e = static_cast<T>(weights.phi_e), phi_s = static_cast<T>(weights.phi_s);
  for (std::size_t i = 0; i < n; ++i) {
    const T ddot = m.BackwardProject(dots[i], iqp_of(i), phi_e * draw[i]);
    if (!towers) continue;
    for (std::size_t k = 0; k < q[i].size(); ++k) {
      dq[i][k] += ddot * p[i][k];
      dp[i][k] += ddot * q[i][k];
    }
  }
  if (towers && n >= 2) {
    std::vector<double> log_q(n);
    for (std::size_t i = 0; i < n; ++i) log_q[i] = freq.LogProbability(batch[i]->item->id);
    auto s = SampledSoftmaxLoss<T>(q, p, labels, log_q);
    parts.softmax = static_cast<double>(s.loss);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = 0; k < q[i].size(); ++k) {
        dq[i][k] += phi_s * s.dq[i][k];
        dp[i][k] += phi_s * s.di[i][k];
      }
    }
  }
  if (towers) {
    for (std::size_t i = 0; i < n; ++i) {
      m.BackwardQuery(qt[i], dq[i]);
      m.BackwardItem(it[i], dp[i]);
    }
  }
  parts.total = CompositeLoss(parts.engagement, parts.softmax, weights);
  return parts;
}

// Loss only, for finite differences.
template <typename T>
double BatchLoss(const model::TwoTowerModel<T>& m, std::span<const TrainExample* const> batch,
                 const FrequencyEstimator& freq, const LossWeights& weights) {
  model::TwoTowerModel<T> copy = m;
  return AccumulateBatchGradients(copy, batch, freq, weights).total;
}

// One optimizer step. The batch's items enter the frequency estimate before
// the loss is computed.
template <typename T>
LossParts TrainStep(model::TwoTowerModel<T>& m, std::span<const TrainExample* const> batch, Adam<T>& opt,
                    FrequencyEstimator& freq, const LossWeights& weights, std::uint64_t step = 0) {
  for (const TrainExample* ex : batch) freq.Observe(ex->item->id);
  m.params().ZeroGrad();
  const LossParts parts = AccumulateBatchGradients(m, batch, freq, weights);
  if (!std::isfinite(parts.total)) {
    char msg[160];
    std::snprintf(msg, sizeof(msg), "non-finite loss at step %llu (L_E=%g, L_S=%g, batch=%zu)",
                  static_cast<unsigned long long>(step), parts.engagement, parts.softmax, batch.size());
    throw Error(ErrorCode::kNonFiniteLoss, msg);
  }
  opt.Step(m.params());
  return parts;
}

// Deterministic batch order: fresh seeded permutations, concatenated, cut to
// round(epochs * N) examples. A trailing batch of one is dropped.
inline std::vector<std::vector<std::size_t>> PlanBatches(std::size_t n, double epochs, std::size_t batch_size,
                                                         std::uint64_t seed) {
  std::vector<std::vector<std::size_t>> batches;
  if (n == 0) return batches;
  const auto total = static_cast<std::size_t>(std::llround(epochs * static_cast<double>(n)));
  Rng rng(seed);
  std::vector<std::size_t> order;
  std::vector<std::size_t> perm(n);
  while (order.size() < total) {
    std::iota(perm.begin(), perm.end(), 0);
    rng.Shuffle(perm);
    order.insert(order.end(), perm.begin(), perm.end());
  }
  order.resize(total);
  for (std::size_t start = 0; start < total; start += batch_size) {
    const std::size_t end = std::min(total, start + batch_size);
    if (end - start < 2 && !batches.empty()) break;
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return batches;
}

// Trains a freshly initialized model. Writes "step\tL\tL_E\tL_S" lines to
// `metrics` when given.
inline model::Model Train(const std::vector<TrainExample>& examples, const TrainingConfig& config,
                          std::ostream* metrics = nullptr) {
  config.Validate();
  if (examples.empty()) throw Error(ErrorCode::kEmptySplit, "no training examples");
  model::ModelConfig mc = config.model;
  mc.init_seed = config.seed;
  model::Model m(mc);
  Adam<float> opt(m.params(), AdamConfig{config.lr, 0.9, 0.999, 1e-8});
  FrequencyEstimator freq;
  const auto batches = PlanBatches(examples.size(), config.epochs, config.batch_size, config.seed ^ 0x5eedULL);
  if (metrics != nullptr) *metrics << "step\tL\tL_E\tL_S\n";
  std::vector<const TrainExample*> batch;
  std::uint64_t step = 0;
  char line[128];
  for (const auto& idx : batches) {
    batch.clear();
    for (std::size_t i : idx) batch.push_back(&examples[i]);
    const LossParts parts = TrainStep<float>(m, batch, opt, freq, config.loss, step);
    ++step;
    if (metrics != nullptr) {
      std::snprintf(line, sizeof(line), "%llu\t%.9g\t%.9g\t%.9g\n", static_cast<unsigned long long>(step),
                    parts.total, parts.engagement, parts.softmax);
      *metrics << line;
    }
  }
  return m;
}

struct GradCheckResult {
  double max_relative_error = 0.0;
  // ||analytic - numeric|| / ||analytic|| over the whole gradient vector.
  double aggregate_relative_error = 0.0;
  std::size_t parameters = 0;
  std::string worst_parameter;
};

// Relative error |a - n| / max(|a|, |n|, floor) over every parameter, with n
// the central difference (f(x + eps) - f(x - eps)) / 2 eps.
inline GradCheckResult GradCheck(model::TwoTowerModel<double>& m, std::span<const TrainExample* const> batch,
                                 const FrequencyEstimator& freq, const LossWeights& weights, double eps,
                                 double floor = 1e-6) {
  m.params().ZeroGrad();
  AccumulateBatchGradients(m, batch, freq, weights);
  std::vector<std::vector<double>> analytic;
  for (const auto& t : m.params().tensors()) analytic.push_back(t.grad);
  GradCheckResult out;
  double diff_sq = 0.0, norm_sq = 0.0;
  auto& tensors = m.params().tensors();
  for (std::size_t ti = 0; ti < tensors.size(); ++ti) {
    for (std::size_t k = 0; k < tensors[ti].size(); ++k) {
      const double saved = tensors[ti].value[k];
      tensors[ti].value[k] = saved + eps;
      const double up = BatchLoss(m, batch, freq, weights);
      tensors[ti].value[k] = saved - eps;
      const double down = BatchLoss(m, batch, freq, weights);
      tensors[ti].value[k] = saved;
      const double numeric = (up - down) / (2.0 * eps);
      const double a = analytic[ti][k];
      diff_sq += (a - numeric) * (a - numeric);
      norm_sq += a * a;
      const double err = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), floor});
      if (err > out.max_relative_error) {
        out.max_relative_error = err;
        out.worst_parameter = tensors[ti].name + "[" + std::to_string(k) + "]";
      }
      ++out.parameters;
    }
  }
  out.aggregate_relative_error = std::sqrt(diff_sq) / std::max(std::sqrt(norm_sq), floor);
  return out;
}

}  // namespace prerank::train
