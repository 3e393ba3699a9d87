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
#include <cstdio>
#include <istream>
#include <memory>
#include <mutex>
#include <ostream>
#include <string>
#include <string_view>

#include <json.hpp>

#include "prerank/core/error.hpp"
#include "prerank/core/query.hpp"
#include "prerank/model/item_catalog.hpp"
#include "prerank/serve/prerank.hpp"

namespace prerank::serve {

using Json = nlohmann::json;

inline std::string FormatScore(double score) {
  if (std::isinf(score)) return score < 0 ? "-inf" : "inf";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.9g", score);
  return buf;
}

inline Error BadRequest(const std::string& msg) { return Error(ErrorCode::kBadRequest, msg); }

// Parsed form of one protocol line.
struct ServiceRequest {
  Json request_id;
  PrerankRequest prerank;
  bool explain = false;
};

// Request object fields: request_id, query, context {user_id, country,
// device, language, age, gender}, sequence [{item_id, action,
// age_seconds}], candidates (id list or "@all"), n_out, explain.
inline ServiceRequest ParseServiceRequest(const Json& j, const model::ItemCatalog* catalog) {
  if (!j.is_object()) throw BadRequest("request must be a JSON object");
  ServiceRequest r;
  if (j.contains("request_id")) r.request_id = j["request_id"];
  auto field = [&j](const char* name) -> const Json* {
    auto it = j.find(name);
    return it == j.end() ? nullptr : &*it;
  };
  const Json* q = field("query");
  if (q == nullptr || !q->is_string()) throw BadRequest("query must be a string");
  try {
    r.prerank.query.query = NormalizeQuery(q->get<std::string>());
  } catch (const Error& e) {
    throw BadRequest(e.what());
  }
  RequestContext& ctx = r.prerank.query.context;
  if (const Json* c = field("context")) {
    if (!c->is_object()) throw BadRequest("context must be an object");
    for (const auto& [key, value] : c->items()) {
      if (key == "user_id" || key == "age" || key == "gender") {
        if (!value.is_number_unsigned()) throw BadRequest("context." + key + " must be a non-negative integer");
        const auto v = value.get<std::uint64_t>();
        if (key == "user_id") ctx.user_id = v;
        if (key == "age") ctx.age_bucket = static_cast<std::uint32_t>(v);
        if (key == "gender") ctx.gender_bucket = static_cast<std::uint32_t>(v);
      } else if (key == "country" || key == "language" || key == "device") {
        if (!value.is_string()) throw BadRequest("context." + key + " must be a string");
        const auto s = value.get<std::string>();
        if (key == "country") ctx.country = s;
        if (key == "language") ctx.language = s;
        if (key == "device") {
          auto d = ParseDevice(s);
          if (!d) throw BadRequest("unknown device '" + s + "'");
          ctx.device = *d;
        }
      } else {
        throw BadRequest("unknown context field '" + key + "'");
      }
    }
  }
  if (const Json* seq = field("sequence")) {
    if (!seq->is_array()) throw BadRequest("sequence must be an array");
    for (const auto& e : *seq) {
      if (!e.is_object() || !e.contains("item_id") || !e["item_id"].is_number_unsigned()) {
        throw BadRequest("sequence entries need an integer item_id");
      }
      model::SequenceEntry entry;
      if (e.contains("action")) {
        if (!e["action"].is_string()) throw BadRequest("sequence action must be a string");
        auto a = ParseAction(e["action"].get<std::string>());
        if (!a) throw BadRequest("unknown action '" + e["action"].get<std::string>() + "'");
        entry.action = *a;
      }
      if (e.contains("age_seconds")) {
        if (!e["age_seconds"].is_number_integer()) throw BadRequest("age_seconds must be an integer");
        entry.age_seconds = e["age_seconds"].get<std::int64_t>();
      }
      // Items the catalog does not know carry no content and are dropped.
      const model::ItemRecord* rec = catalog ? catalog->Find(ItemId{e["item_id"].get<std::uint64_t>()}) : nullptr;
      if (rec == nullptr) continue;
      entry.item = rec->features.content;
      r.prerank.query.sequence.push_back(std::move(entry));
    }
  }
  const Json* cands = field("candidates");
  if (cands == nullptr) throw BadRequest("candidates missing");
  if (cands->is_string()) {
    if (cands->get<std::string>() != "@all") throw BadRequest("candidates must be a list or \"@all\"");
    r.prerank.all_candidates = true;
  } else if (cands->is_array()) {
    for (const auto& c : *cands) {
      if (!c.is_number_unsigned()) throw BadRequest("candidate ids must be non-negative integers");
      r.prerank.candidates.push_back(ItemId{c.get<std::uint64_t>()});
    }
  } else {
    throw BadRequest("candidates must be a list or \"@all\"");
  }
  if (const Json* n = field("n_out")) {
    if (!n->is_number_unsigned() || n->get<std::uint64_t>() == 0) throw BadRequest("n_out must be a positive integer");
    r.prerank.n_out = n->get<std::size_t>();
  }
  if (const Json* ex = field("explain")) {
    if (!ex->is_boolean()) throw BadRequest("explain must be a boolean");
    r.explain = ex->get<bool>();
  }
  return r;
}

inline std::string ErrorResponse(const Json& request_id, const Error& e) {
  Json out;
  out["request_id"] = request_id;
  out["error"] = {{"code", ErrorCodeName(e.code())}, {"message", e.detail()}};
  return out.dump();
}

// Line-oriented request handler. The scorer can be replaced at any time;
// each request runs to completion on the scorer it started with.
class PrerankService {
 public:
  PrerankService(std::shared_ptr<const Scorer> scorer, std::shared_ptr<const model::ItemCatalog> catalog = nullptr)
      : scorer_(std::move(scorer)), catalog_(std::move(catalog)) {}

  void Swap(std::shared_ptr<const Scorer> next) {
    std::lock_guard<std::mutex> lock(mu_);
    scorer_ = std::move(next);
  }

  std::shared_ptr<const Scorer> Current() const {
    std::lock_guard<std::mutex> lock(mu_);
    return scorer_;
  }

  // Never throws; failures become error responses.
  std::string HandleLine(std::string_view line) const {
    Json request_id = nullptr;
    try {
      Json j;
      try {
        j = Json::parse(line);
      } catch (const Json::exception& e) {
        throw BadRequest(std::string("malformed JSON: ") + e.what());
      }
      if (j.is_object() && j.contains("request_id")) request_id = j["request_id"];
      const ServiceRequest req = ParseServiceRequest(j, catalog_.get());
      const std::shared_ptr<const Scorer> scorer = Current();
      const auto ranked = scorer->Prerank(req.prerank);
      Json out;
      out["request_id"] = request_id;
      Json list = Json::array();
      for (const auto& r : ranked) list.push_back(std::to_string(r.item.value) + ":" + FormatScore(r.score));
      out["ranked"] = std::move(list);
      if (req.explain) {
        const std::vector<float> q = scorer->EmbedQuery(req.prerank.query);
        Json details = Json::array();
        for (const auto& r : ranked) {
          auto b = scorer->Explain(req.prerank.query, q, r.item);
          if (!b) continue;
          details.push_back({{"item_id", r.item.value},
                             {"raw", b->raw},
                             {"probability", b->probability},
                             {"dot", b->dot},
                             {"iqp", b->iqp_features}});
        }
        out["breakdown"] = std::move(details);
      }
      return out.dump();
    } catch (const Error& e) {
      return ErrorResponse(request_id, e);
    } catch (const std::exception& e) {
      return ErrorResponse(request_id, Error(ErrorCode::kBadRequest, e.what()));
    }
  }

 private:
  mutable std::mutex mu_;
  std::shared_ptr<const Scorer> scorer_;
  std::shared_ptr<const model::ItemCatalog> catalog_;
};

// Answers one line per request until end of input.
inline void ServeStream(const PrerankService& service, std::istream& in, std::ostream& out) {
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    out << service.HandleLine(line) << '\n';
    out.flush();
  }
}

}  // namespace prerank::serve
