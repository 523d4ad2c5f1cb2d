#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "q2q/corpus_io.h"
#include "q2q/eval.h"
#include "q2q/expansion.h"

namespace q2q::fixture {

// Synthetic retrieval world with planted relevance. Every query owns a
// distinctive keyword that appears in its relevant passages only; candidates
// are listed in shuffled order.
struct World {
  QueryStore queries;
  PassageStore collection;
  Qrels qrels;
  std::vector<CandidateSet> candidates;  // texts attached
  ExpansionMap expansions;
};

World make_world(std::uint64_t seed = 7, std::size_t query_count = 20, std::size_t candidates_per_query = 50);

// queries.tsv, collection.tsv, qrels.txt, top1000.tsv, expansions.tsv
void write_world(const World& world, const std::filesystem::path& dir);

// Random judgments over `queries` x `passages` ids, at most `max_judgments`
// rows, grades in [0, max_grade].
Qrels random_qrels(std::mt19937_64& rng, std::size_t max_judgments, std::size_t queries, std::size_t passages,
                   int max_grade = 1);

// Random corpus of short passages over a small vocabulary.
PassageStore random_corpus(std::mt19937_64& rng, std::size_t passages, std::size_t vocabulary, std::size_t max_length);
std::string random_query(std::mt19937_64& rng, std::size_t vocabulary, std::size_t max_length);

// Committee stats and own scores for 43 topics whose MAP, nDCG and P@10
// classifications land in exactly the requested per-bucket counts.
struct BucketScenario {
  std::map<std::pair<std::string, Metric>, double> own;
  std::vector<PerTopicStats> stats;
};
BucketScenario make_bucket_scenario(const std::map<Metric, std::array<std::size_t, 5>>& counts);

// Uniform integer in [0, n) without relying on std distributions.
std::size_t draw(std::mt19937_64& rng, std::size_t n);

// printf-style id with one %zu conversion, e.g. format_id("p%05zu", 7).
std::string format_id(const char* pattern, std::size_t n);

class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::string operator/(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

std::string read_file(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& content);

}  // namespace q2q::fixture
