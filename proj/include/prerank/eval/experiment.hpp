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

#include <cctype>
#include <cstdio>
#include <map>
#include <memory>
#include <ostream>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include "prerank/eval/bm25.hpp"
#include "prerank/eval/metrics.hpp"
#include "prerank/eval/synthetic.hpp"
#include "prerank/iqp/timeline.hpp"
#include "prerank/model/score.hpp"
#include "prerank/serve/prerank.hpp"
#include "prerank/train/dataset.hpp"
#include "prerank/train/trainer.hpp"

namespace prerank::eval {

enum class Removal { kNone, kUserEngagementSequence, kCrossInteractionFeatures, kParallelMaskNet };

inline std::string RemovalName(Removal r) {
  switch (r) {
    case Removal::kNone: return "none";
    case Removal::kUserEngagementSequence: return "user_engagement_sequence";
    case Removal::kCrossInteractionFeatures: return "cross_interaction_features";
    case Removal::kParallelMaskNet: return "parallel_masknet";
  }
  return "none";
}

// Accepts snake_case or CamelCase spellings.
inline Removal ParseRemoval(std::string_view name) {
  std::string flat;
  for (char c : name) {
    if (c != '_' && c != '-') flat.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  for (Removal r : {Removal::kNone, Removal::kUserEngagementSequence, Removal::kCrossInteractionFeatures,
                    Removal::kParallelMaskNet}) {
    std::string n;
    for (char c : RemovalName(r)) {
      if (c != '_') n.push_back(c);
    }
    if (n == flat) return r;
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown removal: " + std::string(name));
}

// Removed inputs are dropped from the model, so their parameters do not exist
// during training.
inline model::ModelConfig ApplyRemoval(model::ModelConfig c, Removal r) {
  switch (r) {
    case Removal::kNone: break;
    case Removal::kUserEngagementSequence: c.use_sequence = false; break;
    case Removal::kCrossInteractionFeatures: c.use_iqp = false; break;
    case Removal::kParallelMaskNet: c.use_masknet = false; break;
  }
  return c;
}

// IQP ratios are mostly below 0.1, so the experiments scale them up ahead of
// the projection layer.
inline train::TrainingConfig ExperimentTrainingDefaults() {
  train::TrainingConfig t;
  t.model.iqp_scale = 10.0;
  return t;
}

struct ExperimentConfig {
  train::TrainingConfig train = ExperimentTrainingDefaults();
  iqp::SmoothingConfig smoothing;
  std::size_t iqp_k = 100;
  std::size_t hits_k = 3;
  std::size_t threads = 1;
  Bm25Params bm25;
};

// One test request: the shared query features and its impressed candidates.
struct EvalRequest {
  std::shared_ptr<const model::QueryFeatures> query;
  std::vector<const train::TrainExample*> candidates;
  Segment segment = Segment::kSingle;
};

inline Segment SegmentOf(const std::map<std::string, Segment>& segments, const QueryKey& q) {
  auto it = segments.find(q.normalized_text);
  return it == segments.end() ? Segment::kSingle : it->second;
}

inline std::vector<EvalRequest> GroupRequests(const std::vector<train::TrainExample>& examples,
                                              const std::map<std::string, Segment>& segments) {
  std::vector<EvalRequest> out;
  for (std::size_t i = 0; i < examples.size(); ++i) {
    if (i == 0 || examples[i].request_index != examples[i - 1].request_index) {
      out.push_back({examples[i].query, {}, SegmentOf(segments, examples[i].query->query)});
    }
    out.back().candidates.push_back(&examples[i]);
  }
  return out;
}

// Runs fn(i) for i in [0, n) over `threads` contiguous partitions.
template <typename Fn>
void ParallelFor(std::size_t n, std::size_t threads, Fn fn) {
  threads = std::max<std::size_t>(1, std::min(threads, n));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      for (std::size_t i = n * t / threads; i < n * (t + 1) / threads; ++i) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

using RequestScores = std::vector<std::vector<double>>;

inline RequestScores ScoreRequests(const model::Model& m, const std::vector<EvalRequest>& requests,
                                   std::size_t threads = 1) {
  RequestScores scores(requests.size());
  const bool use_iqp = m.config().use_iqp;
  ParallelFor(requests.size(), threads, [&](std::size_t r) {
    const auto q = m.EmbedQuery(*requests[r].query);
    for (const auto* ex : requests[r].candidates) {
      const auto i = m.EmbedItem(*ex->item);
      const std::span<const float> iqp = use_iqp ? std::span<const float>(ex->iqp) : std::span<const float>();
      scores[r].push_back(model::Score(m, q, i, iqp).raw);
    }
  });
  return scores;
}

inline RequestScores ScoreRequestsBm25(const model::ItemCatalog& catalog, const std::vector<EvalRequest>& requests,
                                       const Bm25Params& params) {
  CorpusStats stats;
  std::unordered_map<std::uint64_t, std::vector<std::string>> docs;
  for (const auto& [id, rec] : catalog.items()) {
    docs[id] = TextTokens(rec.text);
    stats.AddDocument(docs[id]);
  }
  RequestScores scores(requests.size());
  for (std::size_t r = 0; r < requests.size(); ++r) {
    for (const auto* ex : requests[r].candidates) {
      scores[r].push_back(Bm25Proximity(requests[r].query->query, docs.at(ex->item->id.value), stats, params));
    }
  }
  return scores;
}

// HITS@K per (metric, segment). "hits@K" uses the unified label; "hits@K:<action>"
// counts only positives that took that action. Segment "ALL" pools every request.
using MetricTable = std::map<std::pair<std::string, std::string>, HitsSummary>;

inline std::vector<ActionType> EvaluatedActions() {
  return {ActionType::kSave, ActionType::kLongClick, ActionType::kClick, ActionType::kDownload,
          ActionType::kScreenshot};
}

struct LabeledCandidates {
  std::vector<ItemId> ids;
  std::vector<int> labels;
  std::vector<ActionSet> actions;
};

inline void AddRequest(MetricTable& table, std::size_t k, Segment segment, std::span<const double> scores,
                       const LabeledCandidates& c) {
  const std::string hits = "hits@" + std::to_string(k);
  const std::string seg(SegmentName(segment));
  auto add = [&](const std::string& metric, std::optional<int> h) {
    table[{metric, "ALL"}].Add(h);
    table[{metric, seg}].Add(h);
  };
  add(hits, HitsAtK(scores, c.labels, k, c.ids));
  std::vector<int> labels(c.labels.size());
  for (ActionType a : EvaluatedActions()) {
    for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = c.actions[i].Contains(a) ? 1 : 0;
    add(hits + ":" + std::string(ActionName(a)), HitsAtK(scores, labels, k, c.ids));
  }
}

inline MetricTable EvaluateHits(const std::vector<EvalRequest>& requests, const RequestScores& scores, std::size_t k) {
  MetricTable table;
  for (std::size_t r = 0; r < requests.size(); ++r) {
    LabeledCandidates c;
    for (const auto* ex : requests[r].candidates) {
      c.ids.push_back(ex->item->id);
      c.labels.push_back(ex->label.value);
      c.actions.push_back(ex->actions);
    }
    AddRequest(table, k, requests[r].segment, scores[r], c);
  }
  return table;
}

struct ReportRow {
  std::string metric;
  std::string segment;
  std::string variant;
  double value = 0.0;
  double delta_vs_base = 0.0;
};

// Rows in (metric, segment, variant) order. The first variant is the base;
// deltas are relative, (value - base) / base, and 0 when the base is 0.
inline std::vector<ReportRow> BuildReport(const std::vector<std::pair<std::string, MetricTable>>& variants) {
  std::vector<ReportRow> rows;
  if (variants.empty()) return rows;
  static const char* kSegmentOrder[] = {"ALL", "HEAD", "TORSO", "TAIL", "SINGLE"};
  std::vector<std::string> metrics;
  for (const auto& [key, summary] : variants.front().second) {
    if (metrics.empty() || metrics.back() != key.first) metrics.push_back(key.first);
  }
  for (const auto& metric : metrics) {
    for (const char* seg : kSegmentOrder) {
      auto value_of = [&](const MetricTable& t) {
        auto it = t.find({metric, seg});
        return it == t.end() ? 0.0 : it->second.mean();
      };
      const double base = value_of(variants.front().second);
      for (const auto& [name, table] : variants) {
        const double v = value_of(table);
        rows.push_back({metric, seg, name, v, base == 0.0 ? 0.0 : (v - base) / base});
      }
    }
  }
  return rows;
}

inline void WriteReport(std::ostream& out, const std::vector<ReportRow>& rows) {
  out << "metric\tsegment\tvariant\tvalue\tdelta_vs_base\n";
  char buf[64];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "\t%.6f\t%.6f\n", r.value, r.delta_vs_base);
    out << r.metric << '\t' << r.segment << '\t' << r.variant << buf;
  }
}

inline double ReportValue(const std::vector<ReportRow>& rows, std::string_view metric, std::string_view segment,
                          std::string_view variant) {
  for (const auto& r : rows) {
    if (r.metric == metric && r.segment == segment && r.variant == variant) return r.value;
  }
  throw Error(ErrorCode::kInvalidArgument, "no report row for " + std::string(metric) + "/" +
                                               std::string(segment) + "/" + std::string(variant));
}

inline std::unique_ptr<iqp::IqpTimeline> MakeTimeline(const ExperimentConfig& config,
                                                      const std::unordered_map<std::uint64_t, RequestContext>& users) {
  return std::make_unique<iqp::IqpTimeline>(
      iqp::DefaultSlotLayout(), config.smoothing, config.iqp_k, DefaultLabelActions(),
      [&users](std::uint64_t u) -> const RequestContext* {
        auto it = users.find(u);
        return it == users.end() ? nullptr : &it->second;
      });
}

// Everything derived from the logs that every trained variant shares.
class PreparedExperiment {
 public:
  PreparedExperiment(const SyntheticLogs& logs, const ExperimentConfig& config) : logs_(logs) {
    const SyntheticConfig& sc = logs.config;
    users_ = train::IndexUsers(logs.users);
    timeline_ = MakeTimeline(config, users_);
    const std::int64_t last = std::max(sc.train_start(), sc.end_time() - kSecondsPerDay);
    timeline_->Build(logs.events, logs.requests, sc.train_start(), last);
    segments_ = SegmentQueries(QueryFrequencies(logs.requests));
    train::DatasetConfig dc;
    dc.start_time = sc.train_start();
    dc.split_time = sc.split_time();
    dc.end_time = sc.end_time();
    dc.downsample_rate = config.train.downsample_rate;
    dc.seed = config.train.seed;
    dc.seq_max_len = config.train.model.seq_max_len;
    dataset_ = train::BuildDataset(train::DataSources{logs.events, &users_, &logs.catalog, timeline_.get()}, dc);
    audit_ = train::AuditDataset(dataset_, sc.split_time());
    requests_ = GroupRequests(dataset_.test, segments_);
  }
  PreparedExperiment(const PreparedExperiment&) = delete;
  PreparedExperiment& operator=(const PreparedExperiment&) = delete;

  const SyntheticLogs& logs() const { return logs_; }
  const train::Dataset& dataset() const { return dataset_; }
  const std::vector<EvalRequest>& test_requests() const { return requests_; }
  const std::map<std::string, Segment>& segments() const { return segments_; }
  const iqp::IqpTimeline& timeline() const { return *timeline_; }
  const train::AuditReport& audit() const { return audit_; }

 private:
  const SyntheticLogs& logs_;
  std::unordered_map<std::uint64_t, RequestContext> users_;
  std::unique_ptr<iqp::IqpTimeline> timeline_;
  std::map<std::string, Segment> segments_;
  train::Dataset dataset_;
  train::AuditReport audit_;
  std::vector<EvalRequest> requests_;
};

inline model::Model TrainVariant(const PreparedExperiment& p, const ExperimentConfig& config,
                                 const model::ModelConfig& model_config, std::ostream* metrics = nullptr) {
  train::TrainingConfig tc = config.train;
  tc.model = model_config;
  return train::Train(p.dataset().train, tc, metrics);
}

inline MetricTable EvaluateModel(const PreparedExperiment& p, const model::Model& m, const ExperimentConfig& config) {
  return EvaluateHits(p.test_requests(), ScoreRequests(m, p.test_requests(), config.threads), config.hits_k);
}

// Full model against the no-IQP two-tower and the IQP-only variant, plus the
// BM25 text baseline. The full model is the base of the deltas.
inline std::vector<ReportRow> RunComparison(const PreparedExperiment& p, const ExperimentConfig& config) {
  std::vector<std::pair<std::string, MetricTable>> tables;
  for (auto [name, variant] : {std::pair{"full", model::Variant::kFull}, std::pair{"two_tower", model::Variant::kTwoTower},
                               std::pair{"iqp_only", model::Variant::kIqpOnly}}) {
    const model::Model m = TrainVariant(p, config, model::WithVariant(config.train.model, variant));
    tables.emplace_back(name, EvaluateModel(p, m, config));
  }
  tables.emplace_back("bm25", EvaluateHits(p.test_requests(),
                                           ScoreRequestsBm25(p.logs().catalog, p.test_requests(), config.bm25),
                                           config.hits_k));
  return BuildReport(tables);
}

// Trains the base and the ablated model on the same data, seed and budget.
inline std::vector<ReportRow> RunAblation(const PreparedExperiment& p, const ExperimentConfig& config, Removal removal) {
  std::vector<std::pair<std::string, MetricTable>> tables;
  const model::Model base = TrainVariant(p, config, config.train.model);
  tables.emplace_back("base", EvaluateModel(p, base, config));
  if (removal == Removal::kNone) {
    tables.emplace_back(RemovalName(removal), tables.front().second);
  } else {
    const model::Model ablated = TrainVariant(p, config, ApplyRemoval(config.train.model, removal));
    tables.emplace_back(RemovalName(removal), EvaluateModel(p, ablated, config));
  }
  return BuildReport(tables);
}

// Evaluates through the serving path: embeddings and IQP features come from
// the index snapshot, query features from the logs. Impressions are taken
// from `test_events`; `history` supplies engagement sequences.
inline MetricTable EvaluateServing(const serve::Scorer& scorer, std::span<const EngagementEvent> test_events,
                                   std::span<const EngagementEvent> history,
                                   const std::unordered_map<std::uint64_t, RequestContext>& users,
                                   const model::ItemCatalog& catalog, const std::map<std::string, Segment>& segments,
                                   std::size_t k, std::size_t seq_max_len) {
  std::vector<EngagementEvent> all(history.begin(), history.end());
  all.insert(all.end(), test_events.begin(), test_events.end());
  const train::SequenceIndex sequences(all, DefaultLabelActions(), catalog);
  const auto impressions = train::CollectImpressions(test_events);
  MetricTable table;
  std::size_t start = 0;
  std::vector<float> feats(scorer.snapshot().slots().size());
  while (start < impressions.size()) {
    std::size_t end = start + 1;
    const auto& head = impressions[start];
    while (end < impressions.size() && impressions[end].timestamp == head.timestamp &&
           impressions[end].user_id == head.user_id && impressions[end].query == head.query) {
      ++end;
    }
    model::QueryFeatures q;
    q.query = head.query;
    q.context.user_id = head.user_id;
    if (auto it = users.find(head.user_id); it != users.end()) q.context = it->second;
    q.sequence = sequences.Before(head.user_id, head.timestamp, seq_max_len);
    const auto qe = scorer.EmbedQuery(q);
    const auto keys = scorer.snapshot().ContextKeys(q.context);
    LabeledCandidates c;
    std::vector<double> scores;
    for (std::size_t i = start; i < end; ++i) {
      const auto& imp = impressions[i];
      c.ids.push_back(imp.item);
      c.labels.push_back(ComputeUnifiedLabel(imp.actions, DefaultLabelActions(), ActionWeights::Defaults()).value);
      c.actions.push_back(imp.actions);
      scores.push_back(scorer.ScoreAt(scorer.snapshot().Find(imp.item), qe, q.query.key_hash, keys, feats));
    }
    AddRequest(table, k, SegmentOf(segments, head.query), scores, c);
    start = end;
  }
  return table;
}

}  // namespace prerank::eval
