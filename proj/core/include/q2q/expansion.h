#pragma once

#include <cstddef>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "q2q/corpus_io.h"

namespace q2q {

struct ParaphraseBeam {
  std::string text;
  double log_likelihood = 0.0;  // <= 0
  int beam_rank = 1;            // 1-based

  bool operator==(const ParaphraseBeam&) const = default;
};

using ExpansionMap = std::map<std::string, std::vector<ParaphraseBeam>>;

struct ExpandedQuery {
  std::string query_id;
  std::string original_text;
  std::vector<ParaphraseBeam> beams_used;
  std::string assembled_text;

  bool operator==(const ExpandedQuery&) const = default;
};

inline constexpr std::size_t kDefaultAppendedBeams = 3;

// Appends the first min(k, beams.size()) beam texts to the original query,
// separated by single spaces. Throws ContractViolation unless beam ranks
// strictly increase.
ExpandedQuery assemble(const QueryRecord& original, std::span<const ParaphraseBeam> beams,
                       std::size_t k = kDefaultAppendedBeams);

// An ExpandedQuery that carries only the original text.
ExpandedQuery unexpanded(const QueryRecord& original);

namespace filter {
struct None {};
struct DedupExact {};
struct MinLogLikelihood {
  double threshold = 0.0;
};
struct LexicalOverlap {
  double min_jaccard = 0.0;  // token Jaccard with the original query, in [0, 1]
};
}  // namespace filter

using FilterPolicy = std::variant<filter::None, filter::DedupExact, filter::MinLogLikelihood, filter::LexicalOverlap>;

// Accepts "none", "dedup-exact", "min-log-likelihood:<theta>",
// "lexical-overlap:<tau>". Throws ConfigError otherwise.
FilterPolicy parse_filter_policy(std::string_view spec);
std::string to_string(const FilterPolicy& policy);

// Order-preserving subsequence of `beams`. `original_text` is used only by
// the lexical-overlap policy. Throws ConfigError for an out-of-range threshold.
std::vector<ParaphraseBeam> filter_beams(std::span<const ParaphraseBeam> beams, const FilterPolicy& policy,
                                         std::string_view original_text = {});

// Throws ValidationError unless ranks strictly increase from 1 and
// log-likelihoods are <= 0 and non-increasing.
void validate_beams(const std::string& query_id, std::span<const ParaphraseBeam> beams);

// `query_id<TAB>beam_rank<TAB>log_likelihood<TAB>text`, grouped per query and
// sorted by rank.
ExpansionMap load_precomputed_expansions(std::istream& in, const std::string& source = "<expansions>");
void write_expansions(std::ostream& out, const ExpansionMap& expansions);

// A paraphrase generator; implemented over HTTP by HttpParaphraseClient.
class ParaphraseService {
 public:
  virtual ~ParaphraseService() = default;

  struct Item {
    std::string id;
    std::vector<ParaphraseBeam> beams;
    std::optional<std::string> error;  // per-item failure reported by the service
  };

  // One entry per requested query, in request order.
  virtual std::vector<Item> paraphrase(std::span<const QueryRecord> queries, int num_beams) = 0;
};

struct FetchOptions {
  int num_beams = 3;
  std::size_t batch_size = 32;
  std::size_t max_in_flight = 1;
};

struct FetchResult {
  ExpansionMap expansions;
  std::vector<std::string> warnings;  // queries the service could not expand
};

// Throws ConfigError for num_beams < 1, ProtocolError for responses that break
// beam ordering. Transport failures propagate from the service.
FetchResult fetch_expansions(std::span<const QueryRecord> queries, ParaphraseService& service,
                             const FetchOptions& options = {});

struct ExpansionOptions {
  std::size_t k = kDefaultAppendedBeams;
  FilterPolicy filter = filter::None{};
};

// Filters then assembles every query. Queries without beams proceed
// unexpanded and are reported in `warnings`.
std::vector<ExpandedQuery> expand_queries(const QueryStore& queries, const ExpansionMap& expansions,
                                          const ExpansionOptions& options, std::vector<std::string>* warnings = nullptr);

}  // namespace q2q
