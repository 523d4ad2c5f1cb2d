#include "q2q/service_client.h"

#include <httplib.h>

#include <json.hpp>
#include <thread>
#include <unordered_map>

namespace q2q {

using nlohmann::json;

JsonEndpoint::JsonEndpoint(std::string base_url, RetryPolicy retry) : base_url_(std::move(base_url)), retry_(retry) {
  if (retry_.max_attempts < 1) throw ConfigError("retry policy needs at least one attempt");
  httplib::Client probe(base_url_);
  if (!probe.is_valid()) throw ConfigError("invalid service URL '" + base_url_ + "'");
}

JsonEndpoint::~JsonEndpoint() = default;
JsonEndpoint::JsonEndpoint(JsonEndpoint&&) noexcept = default;
JsonEndpoint& JsonEndpoint::operator=(JsonEndpoint&&) noexcept = default;

namespace {

std::string error_message(const std::string& body) {
  const json parsed = json::parse(body, nullptr, /*allow_exceptions=*/false);
  if (parsed.is_object() && parsed.contains("error") && parsed["error"].is_string()) return parsed["error"].get<std::string>();
  return body.substr(0, 200);
}

}  // namespace

std::string JsonEndpoint::post(const std::string& path, const std::string& body) const {
  httplib::Client client(base_url_);
  const auto seconds = std::chrono::duration_cast<std::chrono::seconds>(retry_.timeout);
  const auto micros = std::chrono::duration_cast<std::chrono::microseconds>(retry_.timeout - seconds);
  client.set_connection_timeout(seconds.count(), micros.count());
  client.set_read_timeout(seconds.count(), micros.count());
  client.set_write_timeout(seconds.count(), micros.count());

  auto backoff = retry_.backoff;
  std::string last_failure;
  for (int attempt = 1; attempt <= retry_.max_attempts; ++attempt) {
    auto res = client.Post(path, body, "application/json");
    if (res) {
      if (res->status >= 200 && res->status < 300) return res->body;
      if (res->status < 500) {
        throw ProtocolError(base_url_ + path + " answered HTTP " + std::to_string(res->status) + ": " + error_message(res->body));
      }
      last_failure = "HTTP " + std::to_string(res->status) + ": " + error_message(res->body);
    } else {
      last_failure = httplib::to_string(res.error());
    }
    if (attempt < retry_.max_attempts) {
      std::this_thread::sleep_for(backoff);
      backoff *= 2;
    }
  }
  throw TransportError(base_url_ + path + " failed after " + std::to_string(retry_.max_attempts) +
                       " attempt(s): " + last_failure);
}

bool JsonEndpoint::healthy() const {
  httplib::Client client(base_url_);
  client.set_connection_timeout(std::chrono::duration_cast<std::chrono::seconds>(retry_.timeout).count());
  auto res = client.Get("/health");
  if (!res || res->status != 200) return false;
  const json parsed = json::parse(res->body, nullptr, false);
  return parsed.is_object() && parsed.value("status", "") == "ok";
}

HttpParaphraseClient::HttpParaphraseClient(std::string base_url, RetryPolicy retry) : endpoint_(std::move(base_url), retry) {}

std::vector<ParaphraseService::Item> HttpParaphraseClient::paraphrase(std::span<const QueryRecord> queries, int num_beams) {
  if (queries.empty()) return {};
  json request;
  request["num_beams"] = num_beams;
  request["queries"] = json::array();
  for (const auto& q : queries) request["queries"].push_back({{"id", q.id}, {"text", q.text}});

  const json response = json::parse(endpoint_.post("/paraphrase", request.dump()), nullptr, false);
  if (!response.is_object() || !response.contains("results") || !response["results"].is_array()) {
    throw ProtocolError("paraphrase response lacks a 'results' array");
  }

  std::unordered_map<std::string, Item> by_id;
  for (const auto& entry : response["results"]) {
    if (!entry.is_object() || !entry.contains("id") || !entry["id"].is_string()) {
      throw ProtocolError("paraphrase result without a string 'id'");
    }
    Item item;
    item.id = entry["id"].get<std::string>();
    if (entry.contains("error")) {
      item.error = entry["error"].is_string() ? entry["error"].get<std::string>() : entry["error"].dump();
    } else {
      if (!entry.contains("beams") || !entry["beams"].is_array()) throw ProtocolError("result '" + item.id + "' lacks 'beams'");
      int rank = 1;
      for (const auto& beam : entry["beams"]) {
        if (!beam.is_object() || !beam.contains("text") || !beam["text"].is_string() || !beam.contains("log_likelihood") ||
            !beam["log_likelihood"].is_number()) {
          throw ProtocolError("result '" + item.id + "' has a malformed beam");
        }
        item.beams.push_back(ParaphraseBeam{beam["text"].get<std::string>(), beam["log_likelihood"].get<double>(), rank++});
      }
    }
    const std::string id = item.id;
    if (!by_id.emplace(id, std::move(item)).second) throw ProtocolError("duplicate paraphrase result id '" + id + "'");
  }

  std::vector<Item> items;
  items.reserve(queries.size());
  for (const auto& q : queries) {
    auto it = by_id.find(q.id);
    if (it == by_id.end()) throw ProtocolError("paraphrase response is missing query '" + q.id + "'");
    items.push_back(std::move(it->second));
    by_id.erase(it);
  }
  if (!by_id.empty()) throw ProtocolError("paraphrase response has unrequested id '" + by_id.begin()->first + "'");
  return items;
}

HttpScoreClient::HttpScoreClient(std::string base_url, RetryPolicy retry, std::size_t batch_size)
    : endpoint_(std::move(base_url), retry), batch_size_(batch_size) {
  if (batch_size_ < 1) throw ConfigError("score batch size must be >= 1");
}

std::vector<double> HttpScoreClient::score(std::span<const TextPair> pairs) const {
  std::vector<double> out;
  out.reserve(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); i += batch_size_) {
    const auto got = score_batch(pairs.subspan(i, std::min(batch_size_, pairs.size() - i)));
    out.insert(out.end(), got.begin(), got.end());
  }
  return out;
}

std::vector<double> HttpScoreClient::score_batch(std::span<const TextPair> pairs) const {
  json request;
  request["pairs"] = json::array();
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    request["pairs"].push_back({{"id", std::to_string(i)}, {"query", pairs[i].query}, {"passage", pairs[i].passage}});
  }
  const json response = json::parse(endpoint_.post("/score", request.dump()), nullptr, false);
  if (!response.is_object() || !response.contains("scores") || !response["scores"].is_array()) {
    throw ProtocolError("score response lacks a 'scores' array");
  }
  const auto& scores = response["scores"];
  if (scores.size() != pairs.size()) {
    throw ProtocolError("score response has " + std::to_string(scores.size()) + " scores for " + std::to_string(pairs.size()) +
                        " pairs");
  }
  std::vector<double> out(pairs.size());
  std::vector<bool> filled(pairs.size(), false);
  for (const auto& entry : scores) {
    if (!entry.is_object() || !entry.contains("id") || !entry["id"].is_string() || !entry.contains("probability") ||
        !entry["probability"].is_number()) {
      throw ProtocolError("malformed score entry " + entry.dump());
    }
    const std::string id = entry["id"].get<std::string>();
    std::size_t slot = 0;
    try {
      std::size_t used = 0;
      slot = std::stoul(id, &used);
      if (used != id.size()) throw std::invalid_argument(id);
    } catch (const std::exception&) {
      throw ProtocolError("unknown score id '" + id + "'");
    }
    if (slot >= pairs.size() || filled[slot]) throw ProtocolError("unknown or repeated score id '" + id + "'");
    const double p = entry["probability"].get<double>();
    if (!(p >= 0.0 && p <= 1.0)) throw ProtocolError("probability " + entry["probability"].dump() + " outside [0, 1]");
    out[slot] = p;
    filled[slot] = true;
  }
  return out;
}

std::vector<double> score_remote(std::span<const TextPair> batch, const HttpScoreClient& client) {
  return client.score(batch);
}

std::vector<double> RemoteScorer::score(std::span<const ScoringRequest> batch) {
  std::vector<TextPair> pairs;
  pairs.reserve(batch.size());
  for (const auto& r : batch) pairs.push_back(TextPair{std::string(r.query_text), std::string(r.passage_text)});
  return client_.score(pairs);
}

}  // namespace q2q
