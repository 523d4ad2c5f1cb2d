#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "q2q/corpus_io.h"
#include "q2q/tokenizer.h"

namespace q2q {

struct Bm25Params {
  double k1 = 0.9;
  double b = 0.4;
  // Off: each distinct query term counts once. On: weight by its query frequency.
  bool query_tf_weighting = false;

  // Throws ConfigError unless k1 > 0 and b is in [0, 1].
  void validate() const;
};

struct Posting {
  std::uint32_t doc = 0;  // dense document number, ascending passage id order
  std::uint32_t tf = 0;

  bool operator==(const Posting&) const = default;
};

// Term -> postings with document lengths and collection statistics. Document
// numbers follow ascending passage id, so ordering by document number is
// ordering by passage id. Immutable after construction.
class InvertedIndex {
 public:
  InvertedIndex() = default;

  // Assembles an index from already-sorted parts; validates invariants and
  // throws FormatError when they do not hold.
  InvertedIndex(std::vector<std::string> passage_ids, std::vector<std::uint32_t> doc_lengths,
                std::vector<std::string> terms, std::vector<std::vector<Posting>> postings, AnalyzerOptions analyzer);

  std::size_t passage_count() const { return passage_ids_.size(); }
  double avgdl() const { return avgdl_; }
  std::size_t term_count() const { return terms_.size(); }

  const std::vector<std::string>& passage_ids() const { return passage_ids_; }
  const std::vector<std::uint32_t>& doc_lengths() const { return doc_lengths_; }
  const std::vector<std::string>& terms() const { return terms_; }
  const std::vector<std::vector<Posting>>& all_postings() const { return postings_; }

  // Empty span for an unknown term.
  std::span<const Posting> postings(std::string_view term) const;
  std::size_t document_frequency(std::string_view term) const { return postings(term).size(); }

  // Throws NotFoundError for an unknown passage id.
  std::uint32_t doc_number(std::string_view passage_id) const;
  std::uint32_t doc_length(std::string_view passage_id) const { return doc_lengths_[doc_number(passage_id)]; }
  std::uint32_t term_frequency(std::string_view term, std::uint32_t doc) const;

  const Analyzer& analyzer() const { return analyzer_; }

  bool operator==(const InvertedIndex& other) const;

 private:
  std::vector<std::string> passage_ids_;
  std::vector<std::uint32_t> doc_lengths_;
  std::vector<std::string> terms_;
  std::vector<std::vector<Posting>> postings_;
  Analyzer analyzer_;
  double avgdl_ = 0.0;
  std::unordered_map<std::string, std::uint32_t> term_lookup_;
  std::unordered_map<std::string, std::uint32_t> doc_lookup_;
};

struct IndexBuildOptions {
  AnalyzerOptions analyzer;
  unsigned threads = 1;
};

// Throws ContractViolation on an empty store.
InvertedIndex build_index(const PassageStore& passages, const IndexBuildOptions& options = {});

// ln(1 + (N - df + 0.5) / (df + 0.5)); never negative.
double idf(const InvertedIndex& index, std::string_view term);

// Query tokens are used as given (already analyzed). Throws NotFoundError
// when the passage is not indexed.
double bm25_score(const InvertedIndex& index, const TokenSequence& query, std::string_view passage_id,
                  const Bm25Params& params = {});

// Highest-scoring matching passages, score descending, ties by ascending id.
// The query text is analyzed with the index's analyzer. Throws ConfigError for k < 1.
Ranking score_topk(const InvertedIndex& index, const std::string& query_id, std::string_view query_text,
                   std::size_t k, const Bm25Params& params = {});

CandidateSet retrieve_topk(const InvertedIndex& index, const std::string& query_id, std::string_view query_text,
                           std::size_t k, const Bm25Params& params = {});

// Binary persistence. Layout (little endian):
//   magic "Q2QBM25\0", u32 version, u64 N, f64 avgdl,
//   u8 stem flag, u32 stopword count, stopwords (u32 len + bytes, sorted),
//   N x (u32 len + passage id bytes, u32 doc length),
//   u64 term count, per term (u32 len + bytes, u32 posting count, count x (u32 doc, u32 tf)).
inline constexpr std::uint32_t kIndexFormatVersion = 1;

void save_index(std::ostream& out, const InvertedIndex& index);
InvertedIndex load_index(std::istream& in);

void save_index(const std::string& path, const InvertedIndex& index);
InvertedIndex load_index(const std::string& path);

}  // namespace q2q
