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
#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "prerank/core/config_file.hpp"
#include "prerank/core/error.hpp"
#include "prerank/core/hash.hpp"
#include "prerank/core/log_io.hpp"
#include "prerank/core/query.hpp"
#include "prerank/core/random.hpp"
#include "prerank/core/types.hpp"
#include "prerank/model/item_catalog.hpp"

namespace prerank::eval {

// Desk-scale log generator. Per impression the engagement probability is
//   base_rate[topic(item)] * (on topic ? topic_boost * pair(q, item) : 1)
//     * popularity(item) * (favourite topic ? affinity_boost : 1)
//     * (preferred style ? style_boost : 1),
// capped at max_probability. pair() and popularity() are mean-one lognormals.
struct SyntheticConfig {
  std::uint64_t seed = 1;
  std::size_t topics = 16;
  std::size_t items = 1600;
  std::size_t queries = 480;
  std::size_t users = 400;
  std::size_t words_per_topic = 24;
  std::size_t styles = 4;
  std::size_t history_days = 56;
  std::size_t train_days = 14;
  std::size_t test_days = 7;
  std::size_t requests_per_day = 400;
  std::int64_t start_time = 1699920000;  // a UTC midnight
  double base_rate = 0.04;
  // Per-topic base rates are base_rate * U(1 - spread, 1 + spread).
  double base_rate_spread = 0.3;
  double zipf_exponent = 1.05;
  double topic_boost = 4.0;
  double pair_sigma = 0.8;
  double popularity_sigma = 0.6;
  double affinity_boost = 2.0;
  std::size_t favourite_topics = 2;
  double style_boost = 1.8;
  double max_probability = 0.9;
  // Share of requests carrying a freshly composed query.
  double single_query_rate = 0.15;
  double continue_session = 0.4;
  std::size_t impressions_per_request = 12;
  std::size_t on_topic_per_request = 8;
  std::size_t content_dim = 32;
  double content_noise = 0.5;
  double hide_rate = 0.01;

  std::size_t days() const { return history_days + train_days + test_days; }
  std::int64_t train_start() const { return start_time + static_cast<std::int64_t>(history_days) * kSecondsPerDay; }
  std::int64_t split_time() const { return train_start() + static_cast<std::int64_t>(train_days) * kSecondsPerDay; }
  std::int64_t end_time() const { return split_time() + static_cast<std::int64_t>(test_days) * kSecondsPerDay; }

  void Validate() const {
    auto at_least_one = [](std::size_t v, const char* name) {
      if (v < 1) throw Error(ErrorCode::kInvalidArgument, std::string(name) + " must be at least 1");
    };
    at_least_one(topics, "topics");
    at_least_one(items, "items");
    at_least_one(queries, "queries");
    at_least_one(users, "users");
    at_least_one(words_per_topic, "words_per_topic");
    at_least_one(styles, "styles");
    at_least_one(train_days, "train_days");
    at_least_one(requests_per_day, "requests_per_day");
    at_least_one(impressions_per_request, "impressions_per_request");
    at_least_one(content_dim, "content_dim");
    if (items < impressions_per_request) {
      throw Error(ErrorCode::kInvalidArgument, "items must cover impressions_per_request");
    }
    if (on_topic_per_request > impressions_per_request) {
      throw Error(ErrorCode::kInvalidArgument, "on_topic_per_request exceeds impressions_per_request");
    }
    if (favourite_topics > topics) throw Error(ErrorCode::kInvalidArgument, "favourite_topics exceeds topics");
    if (start_time % kSecondsPerDay != 0) throw Error(ErrorCode::kInvalidArgument, "start_time must be a UTC midnight");
    const double lo = base_rate * (1.0 - base_rate_spread), hi = base_rate * (1.0 + base_rate_spread);
    if (!(lo > 0.0 && hi < 1.0)) throw Error(ErrorCode::kInvalidArgument, "base rates must lie in (0, 1)");
    if (!(max_probability > 0.0 && max_probability <= 1.0)) {
      throw Error(ErrorCode::kInvalidArgument, "max_probability must be in (0, 1]");
    }
    for (double p : {single_query_rate, continue_session, hide_rate}) {
      if (!(p >= 0.0 && p < 1.0)) throw Error(ErrorCode::kInvalidArgument, "rates must be in [0, 1)");
    }
  }

  KeyValueConfig ToKeyValue() const {
    KeyValueConfig kv;
    auto put = [&kv](const char* k, auto v) { kv.Set(k, std::to_string(v)); };
    auto put_d = [&kv](const char* k, double v) {
      char buf[40];
      std::snprintf(buf, sizeof(buf), "%.17g", v);
      kv.Set(k, buf);
    };
    put("seed", seed);
    put("topics", topics);
    put("items", items);
    put("queries", queries);
    put("users", users);
    put("words_per_topic", words_per_topic);
    put("styles", styles);
    put("history_days", history_days);
    put("train_days", train_days);
    put("test_days", test_days);
    put("requests_per_day", requests_per_day);
    put("start_time", start_time);
    put_d("base_rate", base_rate);
    put_d("base_rate_spread", base_rate_spread);
    put_d("zipf_exponent", zipf_exponent);
    put_d("topic_boost", topic_boost);
    put_d("pair_sigma", pair_sigma);
    put_d("popularity_sigma", popularity_sigma);
    put_d("affinity_boost", affinity_boost);
    put("favourite_topics", favourite_topics);
    put_d("style_boost", style_boost);
    put_d("max_probability", max_probability);
    put_d("single_query_rate", single_query_rate);
    put_d("continue_session", continue_session);
    put("impressions_per_request", impressions_per_request);
    put("on_topic_per_request", on_topic_per_request);
    put("content_dim", content_dim);
    put_d("content_noise", content_noise);
    put_d("hide_rate", hide_rate);
    return kv;
  }

  void UpdateFrom(const KeyValueConfig& kv) {
    seed = kv.GetInt<std::uint64_t>("seed", seed);
    topics = kv.GetInt<std::size_t>("topics", topics);
    items = kv.GetInt<std::size_t>("items", items);
    queries = kv.GetInt<std::size_t>("queries", queries);
    users = kv.GetInt<std::size_t>("users", users);
    words_per_topic = kv.GetInt<std::size_t>("words_per_topic", words_per_topic);
    styles = kv.GetInt<std::size_t>("styles", styles);
    history_days = kv.GetInt<std::size_t>("history_days", history_days);
    train_days = kv.GetInt<std::size_t>("train_days", train_days);
    test_days = kv.GetInt<std::size_t>("test_days", test_days);
    requests_per_day = kv.GetInt<std::size_t>("requests_per_day", requests_per_day);
    start_time = kv.GetInt<std::int64_t>("start_time", start_time);
    base_rate = kv.GetDouble("base_rate", base_rate);
    base_rate_spread = kv.GetDouble("base_rate_spread", base_rate_spread);
    zipf_exponent = kv.GetDouble("zipf_exponent", zipf_exponent);
    topic_boost = kv.GetDouble("topic_boost", topic_boost);
    pair_sigma = kv.GetDouble("pair_sigma", pair_sigma);
    popularity_sigma = kv.GetDouble("popularity_sigma", popularity_sigma);
    affinity_boost = kv.GetDouble("affinity_boost", affinity_boost);
    favourite_topics = kv.GetInt<std::size_t>("favourite_topics", favourite_topics);
    style_boost = kv.GetDouble("style_boost", style_boost);
    max_probability = kv.GetDouble("max_probability", max_probability);
    single_query_rate = kv.GetDouble("single_query_rate", single_query_rate);
    continue_session = kv.GetDouble("continue_session", continue_session);
    impressions_per_request = kv.GetInt<std::size_t>("impressions_per_request", impressions_per_request);
    on_topic_per_request = kv.GetInt<std::size_t>("on_topic_per_request", on_topic_per_request);
    content_dim = kv.GetInt<std::size_t>("content_dim", content_dim);
    content_noise = kv.GetDouble("content_noise", content_noise);
    hide_rate = kv.GetDouble("hide_rate", hide_rate);
  }
};

struct SyntheticLogs {
  SyntheticConfig config;
  std::vector<EngagementEvent> events;
  std::vector<SearchRequest> requests;
  std::vector<RequestContext> users;
  model::ItemCatalog catalog;
  // Latent assignments; only filled by the generator, not by reading files.
  std::map<ItemId, std::size_t> item_topic;
  std::unordered_map<std::uint64_t, std::size_t> query_topic;
};

constexpr std::int64_t kSessionGapSeconds = 30 * 60;

namespace detail {

inline std::string MakeWord(Rng& rng) {
  static constexpr char kConsonants[] = "bdfgklmnprstvz";
  static constexpr char kVowels[] = "aeiou";
  std::string w;
  const std::size_t syllables = 2 + rng.Below(2);
  for (std::size_t s = 0; s < syllables; ++s) {
    w.push_back(kConsonants[rng.Below(sizeof(kConsonants) - 1)]);
    w.push_back(kVowels[rng.Below(sizeof(kVowels) - 1)]);
  }
  return w;
}

// Mean-one lognormal factor exp(sigma z - sigma^2 / 2) with z ~ N(0, 1).
inline double MeanOneLognormal(double sigma, double z) { return std::exp(sigma * z - 0.5 * sigma * sigma); }

// Deterministic standard normal draw keyed by (seed, a, b).
inline double KeyedNormal(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  Rng rng(HashCombine(HashCombine(Mix64(seed), a), b));
  return rng.Normal();
}

inline std::vector<std::string> PickWords(Rng& rng, const std::vector<std::string>& vocab, std::size_t n) {
  std::vector<std::string> out;
  std::set<std::size_t> used;
  while (out.size() < n && used.size() < vocab.size()) {
    const std::size_t i = rng.Below(vocab.size());
    if (used.insert(i).second) out.push_back(vocab[i]);
  }
  return out;
}

inline std::string JoinWords(const std::vector<std::string>& words) {
  std::string out;
  for (const auto& w : words) {
    if (!out.empty()) out += ' ';
    out += w;
  }
  return out;
}

}  // namespace detail

inline SyntheticLogs GenerateSyntheticLogs(const SyntheticConfig& config) {
  config.Validate();
  Rng rng(config.seed);
  SyntheticLogs logs;
  logs.config = config;

  // Vocabulary: disjoint word lists per topic plus one word per style.
  std::set<std::string> seen;
  auto fresh_word = [&] {
    std::string w = detail::MakeWord(rng);
    while (!seen.insert(w).second) w = detail::MakeWord(rng);
    return w;
  };
  std::vector<std::vector<std::string>> topic_words(config.topics);
  for (auto& words : topic_words) {
    for (std::size_t i = 0; i < config.words_per_topic; ++i) words.push_back(fresh_word());
  }
  std::vector<std::string> style_words;
  for (std::size_t s = 0; s < config.styles; ++s) style_words.push_back(fresh_word());

  std::vector<double> topic_base(config.topics);
  for (double& b : topic_base) {
    b = config.base_rate * rng.Uniform(1.0 - config.base_rate_spread, 1.0 + config.base_rate_spread);
  }

  // Items.
  const std::size_t dim = config.content_dim;
  std::vector<std::vector<float>> centroids(config.topics, std::vector<float>(dim));
  std::vector<std::vector<float>> style_vecs(config.styles, std::vector<float>(dim));
  for (auto& c : centroids) {
    for (float& v : c) v = static_cast<float>(rng.Normal());
  }
  for (auto& s : style_vecs) {
    for (float& v : s) v = static_cast<float>(0.7 * rng.Normal());
  }
  struct ItemLatent {
    ItemId id;
    std::size_t topic;
    std::size_t style;
    double popularity;
  };
  std::vector<ItemLatent> items;
  std::set<std::uint64_t> ids;
  for (std::size_t i = 0; i < config.items; ++i) {
    std::uint64_t id = 1 + rng.Below(1000000000ULL);
    while (!ids.insert(id).second) id = 1 + rng.Below(1000000000ULL);
    ItemLatent it{ItemId{id}, i % config.topics, rng.Below(config.styles),
                  detail::MeanOneLognormal(config.popularity_sigma, rng.Normal())};
    model::ItemRecord rec;
    rec.features.id = it.id;
    rec.features.engagement_rates = {
        static_cast<float>(std::log(it.popularity) + 0.3 * rng.Normal()),
        static_cast<float>(10.0 * topic_base[it.topic] * rng.Uniform(0.8, 1.2)),
        static_cast<float>(rng.Uniform())};
    std::vector<float> content(dim);
    for (std::size_t d = 0; d < dim; ++d) {
      content[d] = static_cast<float>(centroids[it.topic][d] + style_vecs[it.style][d] +
                                      config.content_noise * rng.Normal());
    }
    rec.features.content = EmbeddingVec(std::move(content));
    auto words = detail::PickWords(rng, topic_words[it.topic], 3 + rng.Below(3));
    words.push_back(style_words[it.style]);
    rec.text = detail::JoinWords(words);
    logs.catalog.Add(std::move(rec));
    logs.item_topic[it.id] = it.topic;
    items.push_back(it);
  }
  std::vector<std::vector<std::size_t>> topic_items(config.topics);
  for (std::size_t i = 0; i < items.size(); ++i) topic_items[items[i].topic].push_back(i);

  // Head query vocabulary with Zipf frequencies over a random rank order.
  struct QueryLatent {
    QueryKey key;
    std::size_t topic;
  };
  std::vector<QueryLatent> queries;
  std::set<std::string> query_texts;
  for (std::size_t i = 0; i < config.queries; ++i) {
    const std::size_t topic = i % config.topics;
    std::string text;
    for (int attempt = 0; attempt < 100; ++attempt) {
      text = detail::JoinWords(detail::PickWords(rng, topic_words[topic], rng.Bernoulli(0.3) ? 3 : 2));
      if (query_texts.insert(text).second) break;
    }
    queries.push_back({NormalizeQuery(text), topic});
  }
  std::vector<std::size_t> rank(queries.size());
  for (std::size_t i = 0; i < rank.size(); ++i) rank[i] = i;
  for (std::size_t i = rank.size(); i > 1; --i) std::swap(rank[i - 1], rank[rng.Below(i)]);
  std::vector<double> zipf_cum(queries.size());
  std::vector<std::vector<std::size_t>> topic_queries(config.topics);
  std::vector<std::vector<double>> topic_query_cum(config.topics);
  double acc = 0.0;
  for (std::size_t i = 0; i < queries.size(); ++i) {
    const double w = 1.0 / std::pow(static_cast<double>(rank[i] + 1), config.zipf_exponent);
    acc += w;
    zipf_cum[i] = acc;
    const std::size_t t = queries[i].topic;
    topic_queries[t].push_back(i);
    topic_query_cum[t].push_back((topic_query_cum[t].empty() ? 0.0 : topic_query_cum[t].back()) + w);
  }

  // Users.
  static const char* kCountries[] = {"US", "GB", "FR", "DE", "BR", "JP", "IN", "CA"};
  static const double kCountryCum[] = {0.35, 0.45, 0.53, 0.61, 0.71, 0.79, 0.93, 1.0};
  static const char* kLanguages[] = {"en", "en", "fr", "de", "pt", "ja", "hi", "en"};
  struct UserLatent {
    std::vector<std::size_t> favourites;
    std::size_t style;
  };
  std::vector<UserLatent> user_latent(config.users);
  for (std::size_t u = 0; u < config.users; ++u) {
    RequestContext ctx;
    ctx.user_id = u + 1;
    const double c = rng.Uniform();
    std::size_t ci = 0;
    while (ci + 1 < 8 && c >= kCountryCum[ci]) ++ci;
    ctx.country = kCountries[ci];
    ctx.language = kLanguages[ci];
    ctx.device = static_cast<Device>(rng.Below(kNumDevices));
    ctx.age_bucket = static_cast<std::uint32_t>(rng.Below(6));
    ctx.gender_bucket = static_cast<std::uint32_t>(rng.Below(3));
    logs.users.push_back(ctx);
    std::set<std::size_t> fav;
    while (fav.size() < config.favourite_topics) fav.insert(rng.Below(config.topics));
    user_latent[u] = {std::vector<std::size_t>(fav.begin(), fav.end()), rng.Below(config.styles)};
  }

  auto pick_query = [&](std::size_t topic, bool same_topic) -> QueryKey {
    if (rng.Bernoulli(config.single_query_rate)) {
      const std::size_t n = topic_words[topic].size() < 3 ? topic_words[topic].size() : 3;
      QueryKey k = NormalizeQuery(detail::JoinWords(detail::PickWords(rng, topic_words[topic], n)));
      logs.query_topic.emplace(k.key_hash, topic);
      return k;
    }
    if (same_topic && !topic_queries[topic].empty()) return queries[topic_queries[topic][rng.Pick(topic_query_cum[topic])]].key;
    return queries[rng.Pick(zipf_cum)].key;
  };
  for (const auto& q : queries) logs.query_topic[q.key.key_hash] = q.topic;

  auto engagement_probability = [&](const QueryKey& q, std::size_t q_topic, const ItemLatent& it,
                                    const UserLatent& user) {
    double p = topic_base[it.topic] * it.popularity;
    if (it.topic == q_topic) {
      p *= config.topic_boost *
           detail::MeanOneLognormal(config.pair_sigma, detail::KeyedNormal(config.seed, q.key_hash, it.id.value));
    }
    if (std::find(user.favourites.begin(), user.favourites.end(), it.topic) != user.favourites.end()) {
      p *= config.affinity_boost;
    }
    if (it.style == user.style) p *= config.style_boost;
    return std::min(p, config.max_probability);
  };

  static const ActionType kEngageActions[] = {ActionType::kSave, ActionType::kLongClick, ActionType::kClick,
                                              ActionType::kDownload, ActionType::kScreenshot};
  static const std::vector<double> kEngageCum = {0.35, 0.6, 0.9, 0.95, 1.0};

  std::set<std::pair<std::uint64_t, std::int64_t>> used_times;
  std::vector<double> weights, cum;
  for (std::size_t day = 0; day < config.days(); ++day) {
    const std::int64_t day_start = config.start_time + static_cast<std::int64_t>(day) * kSecondsPerDay;
    std::size_t made = 0;
    while (made < config.requests_per_day) {
      const std::size_t u = rng.Below(config.users);
      const UserLatent& user = user_latent[u];
      std::int64_t ts = day_start + 1 + static_cast<std::int64_t>(rng.Below(kSecondsPerDay - 3 * 3600));
      QueryKey query = pick_query(rng.Below(config.topics), false);
      bool first = true;
      while (made < config.requests_per_day && (first || rng.Bernoulli(config.continue_session))) {
        if (!first) {
          ts += 60 + static_cast<std::int64_t>(rng.Below(540));
          query = pick_query(logs.query_topic.at(query.key_hash), true);
        }
        first = false;
        while (!used_times.insert({u + 1, ts}).second) ++ts;
        const std::size_t q_topic = logs.query_topic.at(query.key_hash);
        logs.requests.push_back({ts, u + 1, query, 0});
        ++made;

        // Candidates: popularity-weighted on-topic items, then uniform fill.
        std::vector<std::size_t> shown;
        const auto& pool = topic_items[q_topic];
        weights.assign(pool.size(), 0.0);
        for (std::size_t i = 0; i < pool.size(); ++i) weights[i] = items[pool[i]].popularity;
        while (shown.size() < std::min(config.on_topic_per_request, pool.size())) {
          cum.resize(pool.size());
          double total = 0.0;
          for (std::size_t i = 0; i < pool.size(); ++i) cum[i] = total += weights[i];
          const std::size_t pick = rng.Pick(cum);
          shown.push_back(pool[pick]);
          weights[pick] = 0.0;
        }
        while (shown.size() < config.impressions_per_request) {
          const std::size_t i = rng.Below(items.size());
          if (std::find(shown.begin(), shown.end(), i) == shown.end()) shown.push_back(i);
        }
        for (std::size_t i : shown) {
          const ItemLatent& it = items[i];
          EngagementEvent e{ts, u + 1, query, it.id, ActionType::kImpression, "search", 0};
          logs.events.push_back(e);
          if (rng.Bernoulli(engagement_probability(query, q_topic, it, user))) {
            e.action = kEngageActions[rng.Pick(kEngageCum)];
            logs.events.push_back(e);
          } else if (rng.Bernoulli(config.hide_rate)) {
            e.action = ActionType::kHide;
            logs.events.push_back(e);
          }
        }
      }
    }
  }

  // Sessions: a user's searches split at gaps longer than 30 minutes.
  std::vector<std::size_t> order(logs.requests.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& ra = logs.requests[a];
    const auto& rb = logs.requests[b];
    return std::tie(ra.user_id, ra.timestamp) < std::tie(rb.user_id, rb.timestamp);
  });
  std::map<std::pair<std::uint64_t, std::int64_t>, std::uint64_t> session_of;
  std::uint64_t next_session = 0;
  for (std::size_t n = 0; n < order.size(); ++n) {
    const auto& r = logs.requests[order[n]];
    const bool fresh = n == 0 || logs.requests[order[n - 1]].user_id != r.user_id ||
                       r.timestamp - logs.requests[order[n - 1]].timestamp > kSessionGapSeconds;
    if (fresh) ++next_session;
    session_of[{r.user_id, r.timestamp}] = next_session;
  }
  for (auto& r : logs.requests) r.session_id = session_of.at({r.user_id, r.timestamp});
  for (auto& e : logs.events) e.session_id = session_of.at({e.user_id, e.timestamp});

  std::stable_sort(logs.requests.begin(), logs.requests.end(),
                   [](const SearchRequest& a, const SearchRequest& b) { return a.timestamp < b.timestamp; });
  std::stable_sort(logs.events.begin(), logs.events.end(),
                   [](const EngagementEvent& a, const EngagementEvent& b) { return a.timestamp < b.timestamp; });
  return logs;
}

inline void WriteSyntheticLogs(const SyntheticLogs& logs, const std::string& dir) {
  std::filesystem::create_directories(dir);
  {
    auto out = OpenOutput(dir + "/events.tsv");
    WriteEventLog(out, logs.events);
  }
  {
    auto out = OpenOutput(dir + "/requests.tsv");
    WriteRequestLog(out, logs.requests);
  }
  {
    auto out = OpenOutput(dir + "/users.tsv");
    WriteUserTable(out, logs.users);
  }
  {
    auto out = OpenOutput(dir + "/items.tsv");
    model::WriteItemCatalog(out, logs.catalog);
  }
  {
    auto out = OpenOutput(dir + "/synthetic.conf");
    out << logs.config.ToKeyValue().Serialize();
  }
}

inline SyntheticLogs ReadSyntheticLogs(const std::string& dir) {
  SyntheticLogs logs;
  logs.config.UpdateFrom(KeyValueConfig::Load(dir + "/synthetic.conf"));
  logs.events = ReadEventLog(dir + "/events.tsv");
  logs.requests = ReadRequestLog(dir + "/requests.tsv");
  logs.users = ReadUserTable(dir + "/users.tsv");
  logs.catalog = model::ReadItemCatalog(dir + "/items.tsv");
  return logs;
}

}  // namespace prerank::eval
