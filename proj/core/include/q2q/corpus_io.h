#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "q2q/error.h"

namespace q2q {

struct QueryRecord {
  std::string id;
  std::string text;

  bool operator==(const QueryRecord&) const = default;
};

struct PassageRecord {
  std::string id;
  std::string text;

  bool operator==(const PassageRecord&) const = default;
};

// Insertion-ordered records with lookup by id. Immutable once built, so a
// finished store may be shared between threads.
template <class Record>
class RecordStore {
 public:
  RecordStore() = default;

  // Throws DuplicateKeyError if the id is already present.
  void add(Record record) {
    auto [it, inserted] = index_.emplace(record.id, records_.size());
    if (!inserted) throw DuplicateKeyError("duplicate id '" + record.id + "'");
    records_.push_back(std::move(record));
  }

  const Record* find(std::string_view id) const {
    auto it = index_.find(std::string(id));
    return it == index_.end() ? nullptr : &records_[it->second];
  }

  const Record& at(std::string_view id) const {
    const Record* r = find(id);
    if (r == nullptr) throw NotFoundError("unknown id '" + std::string(id) + "'");
    return *r;
  }

  bool contains(std::string_view id) const { return find(id) != nullptr; }
  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }

  const std::vector<Record>& records() const { return records_; }
  auto begin() const { return records_.begin(); }
  auto end() const { return records_.end(); }

 private:
  std::vector<Record> records_;
  std::unordered_map<std::string, std::size_t> index_;
};

using QueryStore = RecordStore<QueryRecord>;
using PassageStore = RecordStore<PassageRecord>;

// Graded relevance judgments keyed by (query id, passage id). Iteration is in
// sorted key order.
class Qrels {
 public:
  using PassageGrades = std::map<std::string, int, std::less<>>;

  // Throws DuplicateKeyError on a repeated key, ValidationError on grade < 0.
  void add(const std::string& query_id, const std::string& passage_id, int grade);

  std::optional<int> grade(std::string_view query_id, std::string_view passage_id) const;

  // Empty map for an unjudged query.
  const PassageGrades& judgments_for(std::string_view query_id) const;

  bool has_query(std::string_view query_id) const;
  std::size_t size() const { return size_; }
  std::size_t query_count() const { return by_query_.size(); }

  const std::map<std::string, PassageGrades, std::less<>>& by_query() const { return by_query_; }

  bool operator==(const Qrels& other) const { return by_query_ == other.by_query_; }

 private:
  std::map<std::string, PassageGrades, std::less<>> by_query_;
  std::size_t size_ = 0;
};

inline constexpr std::size_t kMaxCandidatesPerQuery = 1000;

// Unranked candidate passages for one query, in file order. Texts are present
// only when the source carried them (top1000) or were attached later.
struct CandidateSet {
  std::string query_id;
  std::vector<std::string> passage_ids;
  std::optional<std::string> query_text;
  std::vector<std::string> passage_texts;  // empty, or aligned with passage_ids

  bool has_texts() const { return !passage_texts.empty() || passage_ids.empty(); }
  bool operator==(const CandidateSet&) const = default;
};

struct ScoredPassage {
  std::string passage_id;
  double score = 0.0;

  bool operator==(const ScoredPassage&) const = default;
};

// Final per-query ordering: score descending, ties by ascending passage id.
struct Ranking {
  std::string query_id;
  std::vector<ScoredPassage> entries;

  bool operator==(const Ranking&) const = default;
};

struct RunFileEntry {
  std::string query_id;
  std::string passage_id;
  int rank = 0;
  double score = 0.0;
  std::string tag;

  bool operator==(const RunFileEntry&) const = default;
};

QueryStore parse_queries(std::istream& in, const std::string& source = "<queries>");
PassageStore parse_collection(std::istream& in, const std::string& source = "<collection>");
Qrels parse_qrels(std::istream& in, const std::string& source = "<qrels>");

struct Top1000Line {
  std::string_view query_id;
  std::string_view passage_id;
  std::string_view query_text;
  std::string_view passage_text;
};

// Single streaming pass; the views are valid only for the duration of the
// callback. Memory stays constant in the input size.
void for_each_top1000_line(std::istream& in, const std::string& source,
                           const std::function<void(const Top1000Line&, std::size_t line_no)>& visit);

struct Top1000Options {
  bool keep_texts = true;
};

// Groups by query id in order of first appearance.
std::vector<CandidateSet> parse_top1000(std::istream& in, const std::string& source = "<top1000>",
                                        Top1000Options options = {});

void write_queries(std::ostream& out, const QueryStore& queries);
void write_collection(std::ostream& out, const PassageStore& passages);
void write_qrels(std::ostream& out, const Qrels& qrels);
void write_top1000(std::ostream& out, const std::vector<CandidateSet>& candidates);

// `query_id Q0 passage_id rank score tag`, scores to six decimals. Throws
// ContractViolation when a ranking's scores increase.
void write_run_file(std::ostream& out, const std::vector<Ranking>& rankings, const std::string& tag);

std::vector<RunFileEntry> parse_run_file(std::istream& in, const std::string& source = "<run>");

// Groups entries by query in order of first appearance, ordered by rank.
// Throws ValidationError if ranks are not 1..n or scores increase with rank.
std::vector<Ranking> rankings_from_run(const std::vector<RunFileEntry>& entries);

}  // namespace q2q
