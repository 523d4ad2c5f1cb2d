#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "q2q/corpus_io.h"
#include "q2q/expansion.h"
#include "q2q/tokenizer.h"

namespace q2q {

// ---------------------------------------------------------------------------
// Input preparation

struct TruncationConfig {
  std::size_t max_query_tokens = 64;
  std::size_t total_budget = 512;
  // [CLS] query [SEP] passage [SEP]
  std::size_t special_token_overhead = 3;

  // Throws ConfigError for a zero budget or total_budget <= overhead + 1.
  void validate() const;
};

// Splits text into the units the scorer's length limits are counted in.
class ModelTokenizer {
 public:
  virtual ~ModelTokenizer() = default;
  virtual std::vector<std::string> tokenize(std::string_view text) const = 0;
  // Inverse of tokenize() up to whitespace normalization.
  virtual std::string detokenize(std::span<const std::string> tokens) const = 0;
};

class WhitespaceTokenizer final : public ModelTokenizer {
 public:
  std::vector<std::string> tokenize(std::string_view text) const override;
  std::string detokenize(std::span<const std::string> tokens) const override;
};

// Greedy longest-match-first subword tokenizer over a vocabulary file (one
// piece per line, continuation pieces prefixed with "##"). Text is lowercased
// and punctuation split off before matching.
class WordPieceTokenizer final : public ModelTokenizer {
 public:
  explicit WordPieceTokenizer(std::unordered_set<std::string> vocab, std::string unknown_token = "[UNK]",
                              std::size_t max_chars_per_word = 100);

  // Throws ParseError for an empty vocabulary.
  static WordPieceTokenizer from_vocab(std::istream& in, const std::string& source = "<vocab>");

  std::vector<std::string> tokenize(std::string_view text) const override;
  std::string detokenize(std::span<const std::string> tokens) const override;

  std::size_t vocab_size() const { return vocab_.size(); }

 private:
  std::unordered_set<std::string> vocab_;
  std::string unknown_token_;
  std::size_t max_chars_per_word_;
};

struct ScorerInput {
  TokenSequence query_tokens;
  TokenSequence passage_tokens;
  std::size_t total_budget = 0;
  std::size_t special_token_overhead = 0;

  std::size_t total_length() const { return query_tokens.size() + passage_tokens.size() + special_token_overhead; }
};

// Keeps the leading query tokens up to the query limit, then the leading
// passage tokens that fit in what remains of the budget. No padding is added.
ScorerInput prepare_input(const TokenSequence& query_tokens, const TokenSequence& passage_tokens,
                          const TruncationConfig& config = {});

// ---------------------------------------------------------------------------
// Training pairs

struct LabeledPair {
  std::string query_id;
  std::string passage_id;
  int label = 0;  // 1 relevant, 0 not

  bool operator==(const LabeledPair&) const = default;
};

enum class NegativeSource { kCandidates, kCollection };

struct SamplingOptions {
  std::size_t negatives_per_positive = 1;
  std::uint64_t seed = 0;
  int min_grade = 1;
  NegativeSource source = NegativeSource::kCandidates;
};

struct SamplingResult {
  std::vector<LabeledPair> pairs;
  std::vector<std::string> warnings;  // shortfalls
};

// Every qualifying judgment becomes a positive, followed by its negatives drawn
// without replacement from the query's candidates (or the collection ids) minus
// the judged-relevant passages. Deterministic for a given seed.
SamplingResult sample_training_pairs(const Qrels& qrels, const std::vector<CandidateSet>& candidates,
                                     const SamplingOptions& options,
                                     std::span<const std::string> collection_ids = {});

void write_training_pairs(std::ostream& out, const std::vector<LabeledPair>& pairs);

// ---------------------------------------------------------------------------
// Scorers

struct ScoringRequest {
  std::string_view query_id;
  std::string_view passage_id;
  std::string_view query_text;
  std::string_view passage_text;
};

// Relevance probability in [0, 1] per request, order-aligned. Implementations
// must be safe to call from several threads at once.
class RelevanceScorer {
 public:
  virtual ~RelevanceScorer() = default;
  virtual std::vector<double> score(std::span<const ScoringRequest> batch) = 0;
  virtual std::string name() const = 0;
};

// Token-set Jaccard between the assembled query and the passage; 0 when both
// are empty.
double lexical_overlap_scorer(const ExpandedQuery& expanded, const PassageRecord& passage);
double lexical_overlap(std::string_view query_text, std::string_view passage_text);

class LexicalScorer final : public RelevanceScorer {
 public:
  std::vector<double> score(std::span<const ScoringRequest> batch) override;
  std::string name() const override { return "lexical"; }
};

using ScoreTable = std::map<std::pair<std::string, std::string>, double>;

// `query_id<TAB>passage_id<TAB>score`; scores must lie in [0, 1].
ScoreTable load_precomputed_scores(std::istream& in, const std::string& source = "<scores>");
void write_scores(std::ostream& out, const ScoreTable& scores);

// Looks scores up by (query id, passage id); a missing pair is a ScorerError.
class PrecomputedScorer final : public RelevanceScorer {
 public:
  explicit PrecomputedScorer(ScoreTable table) : table_(std::move(table)) {}
  std::vector<double> score(std::span<const ScoringRequest> batch) override;
  std::string name() const override { return "file"; }

 private:
  ScoreTable table_;
};

// 1 for pairs judged at or above min_grade, else 0.
class OracleScorer final : public RelevanceScorer {
 public:
  OracleScorer(const Qrels& qrels, int min_grade = 1) : qrels_(qrels), min_grade_(min_grade) {}
  std::vector<double> score(std::span<const ScoringRequest> batch) override;
  std::string name() const override { return "oracle"; }

 private:
  const Qrels& qrels_;
  int min_grade_;
};

class ConstantScorer final : public RelevanceScorer {
 public:
  explicit ConstantScorer(double value = 0.5);
  std::vector<double> score(std::span<const ScoringRequest> batch) override;
  std::string name() const override { return "constant"; }

 private:
  double value_;
};

// ---------------------------------------------------------------------------
// Re-ranking

struct RerankOptions {
  TruncationConfig truncation;
  const ModelTokenizer* tokenizer = nullptr;  // whitespace when null
  std::size_t batch_size = 64;
  std::size_t max_in_flight = 1;
};

// Copies texts from the store into a candidate set that lacks them. Throws
// MissingReferenceError for passages absent from the store.
void attach_texts(CandidateSet& candidates, const PassageStore& passages);

// Sorts scores descending with ties by ascending passage id.
void sort_ranking(Ranking& ranking);

// Scores every candidate exactly once against the assembled query and sorts.
// Any scoring failure abandons the whole query with a ScorerError naming the
// failing pair. Throws ContractViolation for duplicate candidates or missing texts.
Ranking rerank(const CandidateSet& candidates, const ExpandedQuery& expanded, RelevanceScorer& scorer,
               const RerankOptions& options = {});

}  // namespace q2q
