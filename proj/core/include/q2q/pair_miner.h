#pragma once

#include <cstddef>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "q2q/corpus_io.h"

namespace q2q {

// Queries judged relevant to one passage, sorted ascending.
struct PassageQueryGroup {
  std::string passage_id;
  std::vector<std::string> query_ids;

  bool operator==(const PassageQueryGroup&) const = default;
};

struct EquivalentQueryPair {
  std::string source_query_id;
  std::string target_query_id;
  std::string via_passage_id;

  bool operator==(const EquivalentQueryPair&) const = default;
  auto operator<=>(const EquivalentQueryPair&) const = default;
};

struct PairMiningReport {
  std::map<std::size_t, std::size_t> histogram;  // k -> passages with exactly k queries
  std::size_t passage_count = 0;
  std::size_t total_judgments = 0;
  // Sum over passages of C(k, 2): a query pair sharing two passages counts twice.
  std::size_t pair_occurrences = 0;
  // Distinct unordered query pairs that share at least one passage.
  std::size_t unique_unordered_pairs = 0;
  // Share of passages matched by more than one query.
  double multi_query_fraction = 0.0;

  bool operator==(const PairMiningReport&) const = default;
};

enum class PairOrdering { kUnordered, kBothDirections };

// One group per passage with at least one judgment of grade >= min_grade,
// sorted by passage id. Throws ConfigError for min_grade < 1.
std::vector<PassageQueryGroup> group_by_passage(const Qrels& qrels, int min_grade = 1);

PairMiningReport mining_report(const std::vector<PassageQueryGroup>& groups);

// All query pairs per group, sorted by (passage, source, target). Unordered
// pairs put the lexicographically smaller id first.
std::vector<EquivalentQueryPair> mine_pairs(const std::vector<PassageQueryGroup>& groups, PairOrdering ordering);

// Aligned source/target sentence files, one query text per line. Throws
// MissingReferenceError for unknown ids and SanitationError for texts that
// contain line breaks; nothing is written in either case.
void export_seq2seq(const std::vector<EquivalentQueryPair>& pairs, const QueryStore& queries, std::ostream& source,
                    std::ostream& target);

// `k<TAB>passage_count` rows followed by `name<TAB>value` summary rows.
void write_mining_report(std::ostream& out, const PairMiningReport& report);

// `source<TAB>target<TAB>via_passage`.
void write_pairs(std::ostream& out, const std::vector<EquivalentQueryPair>& pairs);

// Histogram with every k >= cap folded into the cap row (the ">= 10" row).
std::map<std::size_t, std::size_t> collapse_histogram(const std::map<std::size_t, std::size_t>& histogram,
                                                      std::size_t cap = 10);

}  // namespace q2q
