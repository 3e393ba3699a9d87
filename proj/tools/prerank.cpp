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


// prerank: command line driver for the pre-ranking pipeline.
//
//   gen-data -> iqp build/update -> train -> index build -> serve/score -> eval

#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>

#include <pthread.h>

#include <CLI11.hpp>

#include "prerank/core/config_file.hpp"
#include "prerank/core/log_io.hpp"
#include "prerank/eval/experiment.hpp"
#include "prerank/eval/metrics.hpp"
#include "prerank/eval/synthetic.hpp"
#include "prerank/iqp/iqp_io.hpp"
#include "prerank/iqp/timeline.hpp"
#include "prerank/model/checkpoint.hpp"
#include "prerank/model/score.hpp"
#include "prerank/serve/index.hpp"
#include "prerank/serve/prerank.hpp"
#include "prerank/serve/service.hpp"
#include "prerank/serve/tcp_server.hpp"

namespace prerank::cli {
namespace {

struct GlobalFlags {
  std::uint64_t seed = 1;
  bool seed_given = false;
  std::string config;
  bool verbose = false;
  std::size_t threads = 1;
};

GlobalFlags g_flags;

void Log(const std::string& msg) {
  if (g_flags.verbose) std::cerr << "[prerank] " << msg << '\n';
}

// Config file first, then flags on top.
KeyValueConfig LoadConfig() {
  KeyValueConfig kv;
  if (!g_flags.config.empty()) kv = KeyValueConfig::Load(g_flags.config);
  if (g_flags.seed_given || !kv.Has("seed")) kv.Set("seed", std::to_string(g_flags.seed));
  return kv;
}

eval::ExperimentConfig LoadExperimentConfig(const KeyValueConfig& kv) {
  eval::ExperimentConfig ec;
  ec.train.UpdateFrom(kv);
  ec.smoothing.alpha = kv.GetDouble("iqp_alpha", ec.smoothing.alpha);
  ec.smoothing.beta = kv.GetDouble("iqp_beta", ec.smoothing.beta);
  ec.smoothing.min_query_count = kv.GetInt<std::uint64_t>("iqp_min_query_count", ec.smoothing.min_query_count);
  ec.iqp_k = kv.GetInt<std::size_t>("iqp_k", ec.iqp_k);
  ec.hits_k = kv.GetInt<std::size_t>("hits_k", ec.hits_k);
  ec.threads = g_flags.threads;
  return ec;
}

std::int64_t NextMidnight(std::int64_t ts) { return (DayOf(ts) + 1) * kSecondsPerDay; }

// ---- gen-data ----

struct GenDataFlags {
  std::string out;
};

void RunGenData(const GenDataFlags& f) {
  eval::SyntheticConfig sc;
  sc.UpdateFrom(LoadConfig());
  const auto logs = eval::GenerateSyntheticLogs(sc);
  eval::WriteSyntheticLogs(logs, f.out);
  Log("wrote " + std::to_string(logs.events.size()) + " events, " + std::to_string(logs.requests.size()) +
      " requests to " + f.out);
}

// ---- iqp ----

struct IqpFlags {
  std::string events, requests, users, out, counts, counts_out, delta, delta_requests;
  std::int64_t as_of = 0;
  std::string store, query, country, device;
  std::uint64_t item = 0;
  std::uint32_t gender = 0;
};

void WriteCounts(const std::string& path, const iqp::IqpTimeline::State& st) {
  auto out = OpenOutput(path);
  for (const auto& sec : iqp::StateSections(iqp::DefaultSlotLayout(), st)) iqp::WriteCountSection(out, sec);
}

void WriteStore(const std::string& path, const iqp::IqpStore& store) {
  auto out = OpenOutput(path);
  iqp::WriteIqpStore(out, store);
}

void RunIqpBuild(const IqpFlags& f) {
  const auto ec = LoadExperimentConfig(LoadConfig());
  const auto events = ReadEventLog(f.events);
  const auto requests = ReadRequestLog(f.requests);
  const auto user_list = f.users.empty() ? std::vector<RequestContext>{} : ReadUserTable(f.users);
  const auto users = train::IndexUsers(user_list);
  std::int64_t as_of = f.as_of;
  if (as_of == 0) {
    for (const auto& e : events) as_of = std::max(as_of, NextMidnight(e.timestamp));
    for (const auto& r : requests) as_of = std::max(as_of, NextMidnight(r.timestamp));
  }
  const auto timeline = eval::MakeTimeline(ec, users);
  std::vector<EngagementEvent> past_events;
  std::vector<SearchRequest> past_requests;
  for (const auto& e : events) {
    if (e.timestamp < as_of && DefaultLabelActions().Contains(e.action)) past_events.push_back(e);
  }
  for (const auto& r : requests) {
    if (r.timestamp < as_of) past_requests.push_back(r);
  }
  const auto state = timeline->InitialState(past_events, past_requests, as_of);
  const auto store = timeline->Seal(state);
  WriteStore(f.out, store);
  if (!f.counts_out.empty()) WriteCounts(f.counts_out, state);
  Log("IQP store as_of " + std::to_string(as_of) + " digest " + HexDigest(iqp::IqpStoreDigest(store)));
}

void RunIqpUpdate(const IqpFlags& f) {
  const auto ec = LoadExperimentConfig(LoadConfig());
  auto in = OpenInput(f.counts);
  auto state = iqp::StateFromSections(iqp::DefaultSlotLayout(), iqp::ReadCountSections(in));
  const auto user_list = f.users.empty() ? std::vector<RequestContext>{} : ReadUserTable(f.users);
  const auto users = train::IndexUsers(user_list);
  const auto timeline = eval::MakeTimeline(ec, users);
  std::vector<EngagementEvent> day_events;
  for (const auto& e : ReadEventLog(f.delta)) {
    if (DefaultLabelActions().Contains(e.action)) day_events.push_back(e);
  }
  const auto day_requests = f.delta_requests.empty() ? std::vector<SearchRequest>{} : ReadRequestLog(f.delta_requests);
  timeline->Advance(state, day_events, day_requests, state.as_of);
  const auto store = timeline->Seal(state);
  WriteStore(f.out, store);
  WriteCounts(f.counts_out.empty() ? f.counts : f.counts_out, state);
  Log("IQP store advanced to as_of " + std::to_string(state.as_of));
}

void RunIqpLookup(const IqpFlags& f) {
  auto in = OpenInput(f.store);
  const auto store = iqp::ReadIqpStore(in);
  RequestContext ctx;
  if (!f.country.empty()) ctx.country = f.country;
  if (!f.device.empty()) {
    const auto d = ParseDevice(f.device);
    if (!d) throw Error(ErrorCode::kInvalidArgument, "unknown device " + f.device);
    ctx.device = *d;
  }
  ctx.gender_bucket = f.gender;
  const QueryKey q = NormalizeQuery(f.query);
  const auto feats = store.LookupFeatures(ItemId{f.item}, q.key_hash, &ctx);
  for (std::size_t s = 0; s < feats.size(); ++s) {
    std::printf("%s\t%.9g\n", store.slots()[s].Name().c_str(), static_cast<double>(feats[s]));
  }
}

// ---- train ----

struct TrainFlags {
  std::string data, out, metrics_out, test_out, variant = "full", remove = "none";
};

model::ModelConfig VariantConfig(const model::ModelConfig& base, const std::string& variant, const std::string& remove) {
  model::ModelConfig c = base;
  if (variant == "two_tower") {
    c = model::WithVariant(c, model::Variant::kTwoTower);
  } else if (variant == "iqp_only") {
    c = model::WithVariant(c, model::Variant::kIqpOnly);
  } else if (variant != "full") {
    throw Error(ErrorCode::kInvalidArgument, "unknown variant " + variant);
  }
  return eval::ApplyRemoval(c, eval::ParseRemoval(remove));
}

void RunTrain(const TrainFlags& f) {
  const KeyValueConfig kv = LoadConfig();
  auto ec = LoadExperimentConfig(kv);
  const auto logs = eval::ReadSyntheticLogs(f.data);
  ec.train.split_time = logs.config.split_time();
  const eval::PreparedExperiment p(logs, ec);
  if (!p.audit().clean()) throw Error(ErrorCode::kInvalidArgument, "dataset failed the temporal audit");
  Log("train examples " + std::to_string(p.dataset().train.size()) + ", test examples " +
      std::to_string(p.dataset().test.size()));
  std::ofstream metrics;
  if (!f.metrics_out.empty()) metrics = OpenOutput(f.metrics_out);
  const model::Model m = eval::TrainVariant(p, ec, VariantConfig(ec.train.model, f.variant, f.remove),
                                            f.metrics_out.empty() ? nullptr : &metrics);
  model::SaveCheckpoint(m, f.out);
  if (!f.test_out.empty()) {
    std::vector<EngagementEvent> test;
    for (const auto& e : logs.events) {
      if (e.timestamp >= logs.config.split_time() && e.timestamp < logs.config.end_time()) test.push_back(e);
    }
    auto out = OpenOutput(f.test_out);
    WriteEventLog(out, test);
  }
  Log("checkpoint " + f.out + " digest " + HexDigest(model::CheckpointDigest(m)));
}

// ---- index ----

struct IndexFlags {
  std::string model, items, iqp, out;
  std::int64_t build_time = -1;
};

void RunIndexBuild(const IndexFlags& f) {
  const model::Model m = model::LoadCheckpoint(f.model);
  const auto catalog = model::ReadItemCatalog(f.items);
  auto in = OpenInput(f.iqp);
  const auto store = iqp::ReadIqpStore(in);
  const std::int64_t build_time = f.build_time >= 0 ? f.build_time : store.as_of();
  const auto snap = serve::BuildIndexFromCatalog(catalog, m, store, build_time, g_flags.threads);
  serve::SaveSnapshot(snap, f.out);
  Log("index with " + std::to_string(snap.size()) + " items written to " + f.out);
}

// ---- serve / score ----

struct ServeFlags {
  std::string model, index, items;
  int port = -1;
  bool public_bind = false;
};

std::shared_ptr<const serve::Scorer> LoadScorer(const std::string& model_path, const std::string& index_path) {
  auto m = std::make_shared<const model::Model>(model::LoadCheckpoint(model_path));
  auto snap = std::make_shared<const serve::IndexSnapshot>(serve::LoadSnapshot(index_path));
  return std::make_shared<const serve::Scorer>(m, snap);
}

void RunServe(const ServeFlags& f) {
  auto scorer = LoadScorer(f.model, f.index);
  std::shared_ptr<const model::ItemCatalog> catalog;
  if (!f.items.empty()) catalog = std::make_shared<const model::ItemCatalog>(model::ReadItemCatalog(f.items));
  serve::PrerankService service(scorer, catalog);
  if (f.port < 0) {
    serve::ServeStream(service, std::cin, std::cout);
    return;
  }
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);
  serve::TcpServer server(service);
  const int port = server.Start(f.port, !f.public_bind);
  std::cout << "listening " << port << std::endl;
  int sig = 0;
  sigwait(&signals, &sig);
  server.Stop();
}

struct ScoreFlags {
  std::string model, index, items, iqp, query, country, device;
  std::uint64_t item = 0;
  std::uint32_t gender = 0;
};

void PrintBreakdown(const model::ScoreBreakdown& s) {
  std::printf("raw\t%.9g\nprobability\t%.9g\ndot\t%.9g\n", s.raw, s.probability, s.dot);
  for (std::size_t k = 0; k < s.iqp_features.size(); ++k) std::printf("iqp%zu\t%.9g\n", k, s.iqp_features[k]);
}

// Scores through the index snapshot when one is given, otherwise directly
// from the item catalog and an optional IQP store.
void RunScore(const ScoreFlags& f) {
  if (f.index.empty() && f.items.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "score needs --index or --items");
  }
  model::QueryFeatures q;
  q.query = NormalizeQuery(f.query);
  if (!f.country.empty()) q.context.country = f.country;
  if (!f.device.empty()) {
    const auto d = ParseDevice(f.device);
    if (!d) throw Error(ErrorCode::kInvalidArgument, "unknown device " + f.device);
    q.context.device = *d;
  }
  q.context.gender_bucket = f.gender;
  if (!f.index.empty()) {
    const auto scorer = LoadScorer(f.model, f.index);
    const auto s = scorer->Explain(q, scorer->EmbedQuery(q), ItemId{f.item});
    if (!s) throw Error(ErrorCode::kMissingFeatures, "item " + std::to_string(f.item) + " is not in the index");
    PrintBreakdown(*s);
    return;
  }
  const model::Model m = model::LoadCheckpoint(f.model);
  const auto catalog = model::ReadItemCatalog(f.items);
  std::vector<float> iqp_feats(m.config().projection_features(), 0.0f);
  if (!f.iqp.empty() && m.config().use_iqp) {
    auto in = OpenInput(f.iqp);
    iqp_feats = iqp::ReadIqpStore(in).LookupFeatures(ItemId{f.item}, q.query.key_hash, &q.context);
  }
  const auto qe = m.EmbedQuery(q);
  const auto ie = m.EmbedItem(catalog.At(ItemId{f.item}).features);
  PrintBreakdown(model::Score(m, qe, ie, iqp_feats));
}

// ---- eval ----

struct EvalFlags {
  std::string model, index, test, history, users, items, requests, out, variant = "model", logs;
  std::size_t k = 3;
};

void RunEvalHits(const EvalFlags& f) {
  auto scorer = LoadScorer(f.model, f.index);
  const auto catalog = model::ReadItemCatalog(f.items);
  const auto test = ReadEventLog(f.test);
  const auto history = f.history.empty() ? std::vector<EngagementEvent>{} : ReadEventLog(f.history);
  const auto user_list = f.users.empty() ? std::vector<RequestContext>{} : ReadUserTable(f.users);
  const auto users = train::IndexUsers(user_list);
  std::map<std::string, eval::Segment> segments;
  if (!f.requests.empty()) {
    const auto requests = ReadRequestLog(f.requests);
    segments = eval::SegmentQueries(eval::QueryFrequencies(requests));
  }
  // History events at or after the first test timestamp would duplicate test engagements.
  std::vector<EngagementEvent> past;
  std::int64_t first_test = std::numeric_limits<std::int64_t>::max();
  for (const auto& e : test) first_test = std::min(first_test, e.timestamp);
  for (const auto& e : history) {
    if (e.timestamp < first_test) past.push_back(e);
  }
  const auto table = eval::EvaluateServing(*scorer, test, past, users, catalog, segments, f.k,
                                           scorer->model().config().seq_max_len);
  const auto rows = eval::BuildReport({{f.variant, table}});
  if (f.out.empty()) {
    eval::WriteReport(std::cout, rows);
  } else {
    auto out = OpenOutput(f.out);
    eval::WriteReport(out, rows);
  }
}

void RunEvalSessions(const EvalFlags& f) {
  const auto sessions = eval::BuildSessions(ReadEventLog(f.logs));
  std::printf("sessions\t%zu\nsifr\t%.6f\nf1s\t%.6f\n", sessions.size(), eval::Sifr(sessions), eval::F1s(sessions));
}

// ---- ablate ----

struct AblateFlags {
  std::string data, out, remove = "none";
  bool variants = false;
};

void RunAblate(const AblateFlags& f) {
  const KeyValueConfig kv = LoadConfig();
  auto ec = LoadExperimentConfig(kv);
  eval::SyntheticLogs logs;
  if (f.data.empty()) {
    eval::SyntheticConfig sc;
    sc.UpdateFrom(kv);
    logs = eval::GenerateSyntheticLogs(sc);
  } else {
    logs = eval::ReadSyntheticLogs(f.data);
  }
  ec.train.split_time = logs.config.split_time();
  const eval::PreparedExperiment p(logs, ec);
  const auto rows = f.variants ? eval::RunComparison(p, ec) : eval::RunAblation(p, ec, eval::ParseRemoval(f.remove));
  if (f.out.empty()) {
    eval::WriteReport(std::cout, rows);
  } else {
    auto out = OpenOutput(f.out);
    eval::WriteReport(out, rows);
  }
}

// ---- flops ----

struct FlopsFlags {
  std::size_t dim = 64;
  std::size_t iqp_features = 7;
  bool no_interactions = false;
};

void RunFlops(const FlopsFlags& f) {
  std::cout << model::FlopCount(f.dim, f.iqp_features, !f.no_interactions) << '\n';
}

int Main(int argc, char** argv) {
  CLI::App app{"prerank: IQP features, two-tower training, forward index serving and evaluation"};
  app.require_subcommand(1);
  app.add_option("--seed", g_flags.seed, "seed for every random choice")
      ->each([](const std::string&) { g_flags.seed_given = true; });
  app.add_option("--config", g_flags.config, "key = value config file; flags override it");
  app.add_flag("--verbose", g_flags.verbose, "progress on stderr");
  app.add_option("--threads", g_flags.threads, "worker threads")->check(CLI::PositiveNumber);

  GenDataFlags gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "write synthetic events, requests, users and items");
  gen_cmd->add_option("--out", gen.out, "output directory")->required();

  IqpFlags iqpf;
  auto* iqp_cmd = app.add_subcommand("iqp", "build, update or query IQP stores");
  iqp_cmd->require_subcommand(1);
  auto* iqp_build = iqp_cmd->add_subcommand("build", "accumulate counts and seal a store");
  iqp_build->add_option("--events", iqpf.events)->required();
  iqp_build->add_option("--requests", iqpf.requests)->required();
  iqp_build->add_option("--users", iqpf.users);
  iqp_build->add_option("--as-of", iqpf.as_of, "UTC midnight; default: after the last record");
  iqp_build->add_option("--out", iqpf.out)->required();
  iqp_build->add_option("--counts-out", iqpf.counts_out);
  auto* iqp_update = iqp_cmd->add_subcommand("update", "merge one day into saved counts");
  iqp_update->add_option("--counts", iqpf.counts)->required();
  iqp_update->add_option("--delta", iqpf.delta, "event log of the day at as_of")->required();
  iqp_update->add_option("--delta-requests", iqpf.delta_requests);
  iqp_update->add_option("--users", iqpf.users);
  iqp_update->add_option("--out", iqpf.out)->required();
  iqp_update->add_option("--counts-out", iqpf.counts_out, "default: overwrite --counts");
  auto* iqp_lookup = iqp_cmd->add_subcommand("lookup", "print the IQP features of one pair");
  iqp_lookup->add_option("--store", iqpf.store)->required();
  iqp_lookup->add_option("--item", iqpf.item)->required();
  iqp_lookup->add_option("--query", iqpf.query)->required();
  iqp_lookup->add_option("--country", iqpf.country);
  iqp_lookup->add_option("--device", iqpf.device);
  iqp_lookup->add_option("--gender", iqpf.gender);

  TrainFlags tr;
  auto* train_cmd = app.add_subcommand("train", "train on a gen-data directory");
  train_cmd->add_option("--data", tr.data)->required();
  train_cmd->add_option("--out", tr.out, "checkpoint path")->required();
  train_cmd->add_option("--metrics-out", tr.metrics_out);
  train_cmd->add_option("--test-out", tr.test_out, "write the test split event log");
  train_cmd->add_option("--variant", tr.variant)->check(CLI::IsMember({"full", "two_tower", "iqp_only"}));
  train_cmd->add_option("--remove", tr.remove);

  IndexFlags ix;
  auto* index_cmd = app.add_subcommand("index", "forward index snapshots");
  index_cmd->require_subcommand(1);
  auto* index_build = index_cmd->add_subcommand("build", "embed the catalog and write a snapshot");
  index_build->add_option("--model", ix.model)->required();
  index_build->add_option("--items", ix.items)->required();
  index_build->add_option("--iqp", ix.iqp)->required();
  index_build->add_option("--out", ix.out)->required();
  index_build->add_option("--build-time", ix.build_time, "default: the store's as_of");

  ServeFlags sv;
  auto* serve_cmd = app.add_subcommand("serve", "answer JSON-lines requests on stdin or TCP");
  serve_cmd->add_option("--model", sv.model)->required();
  serve_cmd->add_option("--index", sv.index)->required();
  serve_cmd->add_option("--items", sv.items, "resolves sequence item ids");
  serve_cmd->add_option("--port", sv.port, "TCP port (0 picks one); stdin/stdout when absent");
  serve_cmd->add_flag("--public", sv.public_bind, "bind all interfaces instead of loopback");

  ScoreFlags sc;
  auto* score_cmd = app.add_subcommand("score", "score one query-item pair");
  score_cmd->add_option("--model", sc.model)->required();
  score_cmd->add_option("--index", sc.index, "index snapshot");
  score_cmd->add_option("--items", sc.items, "item catalog, used when --index is absent");
  score_cmd->add_option("--iqp", sc.iqp);
  score_cmd->add_option("--query", sc.query)->required();
  score_cmd->add_option("--item", sc.item)->required();
  score_cmd->add_option("--country", sc.country);
  score_cmd->add_option("--device", sc.device);
  score_cmd->add_option("--gender", sc.gender);

  EvalFlags ev;
  auto* eval_cmd = app.add_subcommand("eval", "offline metrics");
  eval_cmd->require_subcommand(1);
  auto* eval_hits = eval_cmd->add_subcommand("hits", "HITS@K through the serving path");
  eval_hits->add_option("--model", ev.model)->required();
  eval_hits->add_option("--index", ev.index)->required();
  eval_hits->add_option("--test", ev.test, "event log with the test impressions")->required();
  eval_hits->add_option("--items", ev.items)->required();
  eval_hits->add_option("--users", ev.users);
  eval_hits->add_option("--history", ev.history, "event log for engagement sequences");
  eval_hits->add_option("--requests", ev.requests, "request log for query segments");
  eval_hits->add_option("--k", ev.k)->check(CLI::PositiveNumber);
  eval_hits->add_option("--variant-name", ev.variant);
  eval_hits->add_option("--out", ev.out);
  auto* eval_sessions = eval_cmd->add_subcommand("sessions", "SIFR and F1S of an event log");
  eval_sessions->add_option("--logs", ev.logs)->required();

  AblateFlags ab;
  auto* ablate_cmd = app.add_subcommand("ablate", "remove-one ablation or variant comparison");
  ablate_cmd->add_option("--data", ab.data, "gen-data directory; generated from the config when absent");
  ablate_cmd->add_option("--remove", ab.remove, "none, user_engagement_sequence, cross_interaction_features, parallel_masknet");
  ablate_cmd->add_flag("--variants", ab.variants, "compare full, two_tower, iqp_only and bm25 instead");
  ablate_cmd->add_option("--out", ab.out);

  FlopsFlags fl;
  auto* flops_cmd = app.add_subcommand("flops", "per-candidate online arithmetic");
  flops_cmd->add_option("--dim", fl.dim)->check(CLI::PositiveNumber);
  flops_cmd->add_option("--iqp-features", fl.iqp_features);
  flops_cmd->add_flag("--no-interactions", fl.no_interactions);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    std::cout << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    std::cout << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    std::cerr << "error\tUSAGE\t" << e.what() << '\n' << app.help();
    return 64;
  }

  try {
    if (gen_cmd->parsed()) RunGenData(gen);
    if (iqp_build->parsed()) RunIqpBuild(iqpf);
    if (iqp_update->parsed()) RunIqpUpdate(iqpf);
    if (iqp_lookup->parsed()) RunIqpLookup(iqpf);
    if (train_cmd->parsed()) RunTrain(tr);
    if (index_build->parsed()) RunIndexBuild(ix);
    if (serve_cmd->parsed()) RunServe(sv);
    if (score_cmd->parsed()) RunScore(sc);
    if (eval_hits->parsed()) RunEvalHits(ev);
    if (eval_sessions->parsed()) RunEvalSessions(ev);
    if (ablate_cmd->parsed()) RunAblate(ab);
    if (flops_cmd->parsed()) RunFlops(fl);
  } catch (const Error& e) {
    std::string msg = e.detail();
    for (char& c : msg) {
      if (c == '\n' || c == '\t') c = ' ';
    }
    std::cerr << "error\t" << ErrorCodeName(e.code()) << '\t' << msg << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error\tINTERNAL\t" << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace
}  // namespace prerank::cli

int main(int argc, char** argv) { return prerank::cli::Main(argc, argv); }
