#pragma once

#include <chrono>
#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "q2q/expansion.h"
#include "q2q/reranker.h"

namespace q2q {

struct RetryPolicy {
  int max_attempts = 3;
  std::chrono::milliseconds backoff{200};  // doubled after each failed attempt
  std::chrono::milliseconds timeout{30000};
};

// POSTs JSON bodies to one base URL ("http://host:port"). Connection failures
// and 5xx answers are retried per the policy, then surface as TransportError;
// 4xx answers and unparsable bodies are ProtocolError.
class JsonEndpoint {
 public:
  JsonEndpoint(std::string base_url, RetryPolicy retry);
  ~JsonEndpoint();
  JsonEndpoint(JsonEndpoint&&) noexcept;
  JsonEndpoint& operator=(JsonEndpoint&&) noexcept;

  // Returns the response body as serialized JSON text.
  std::string post(const std::string& path, const std::string& body) const;
  // True when GET /health answers {"status":"ok"}.
  bool healthy() const;

  const std::string& base_url() const { return base_url_; }

 private:
  std::string base_url_;
  RetryPolicy retry_;
};

// Client side of POST /paraphrase.
class HttpParaphraseClient final : public ParaphraseService {
 public:
  explicit HttpParaphraseClient(std::string base_url, RetryPolicy retry = {});

  std::vector<Item> paraphrase(std::span<const QueryRecord> queries, int num_beams) override;

 private:
  JsonEndpoint endpoint_;
};

struct TextPair {
  std::string query;
  std::string passage;
};

// Client side of POST /score.
class HttpScoreClient {
 public:
  explicit HttpScoreClient(std::string base_url, RetryPolicy retry = {}, std::size_t batch_size = 64);

  // One probability per pair, order-aligned; issues ceil(n / batch_size)
  // requests and none for an empty input. Throws ProtocolError when the
  // response is short, has unknown ids, or a score outside [0, 1].
  std::vector<double> score(std::span<const TextPair> pairs) const;

 private:
  std::vector<double> score_batch(std::span<const TextPair> pairs) const;

  JsonEndpoint endpoint_;
  std::size_t batch_size_;
};

// Equivalent to HttpScoreClient::score; named for the pipeline stage it serves.
std::vector<double> score_remote(std::span<const TextPair> batch, const HttpScoreClient& client);

class RemoteScorer final : public RelevanceScorer {
 public:
  explicit RemoteScorer(std::string base_url, RetryPolicy retry = {}, std::size_t batch_size = 64)
      : client_(std::move(base_url), retry, batch_size) {}

  std::vector<double> score(std::span<const ScoringRequest> batch) override;
  std::string name() const override { return "remote"; }

 private:
  HttpScoreClient client_;
};

}  // namespace q2q
