#include "q2q/corpus_io.h"

#include <algorithm>
#include <istream>
#include <limits>
#include <ostream>
#include <unordered_set>

#include "q2q/text.h"

namespace q2q {

namespace {

// Reads lines, tracks line numbers, strips CR, and rejects invalid UTF-8.
// Blank lines are skipped.
class LineReader {
 public:
  LineReader(std::istream& in, const std::string& source) : in_(in), source_(source) {}

  bool next(std::string_view& line) {
    while (std::getline(in_, buffer_)) {
      ++line_no_;
      line = text::strip_cr(buffer_);
      if (line.empty()) continue;
      if (auto bad = text::find_invalid_utf8(line)) {
        fail("invalid UTF-8 at byte " + std::to_string(*bad));
      }
      return true;
    }
    return false;
  }

  [[noreturn]] void fail(const std::string& what) const { throw ParseError(source_, line_no_, what); }

  std::size_t line_no() const { return line_no_; }
  const std::string& source() const { return source_; }

 private:
  std::istream& in_;
  const std::string& source_;
  std::string buffer_;
  std::size_t line_no_ = 0;
};

template <class Record>
RecordStore<Record> parse_id_text(std::istream& in, const std::string& source, bool require_text) {
  RecordStore<Record> store;
  LineReader reader(in, source);
  std::string_view line;
  while (reader.next(line)) {
    const auto fields = text::split_tabs(line, 2);
    if (fields.size() != 2) reader.fail("expected 'id<TAB>text'");
    if (fields[0].empty()) reader.fail("empty id");
    if (require_text && text::trim(fields[1]).empty()) reader.fail("empty text for id '" + std::string(fields[0]) + "'");
    try {
      store.add(Record{std::string(fields[0]), std::string(fields[1])});
    } catch (const DuplicateKeyError& e) {
      throw DuplicateKeyError(source + ":" + std::to_string(reader.line_no()) + ": " + e.what());
    }
  }
  return store;
}

void check_line_safe(std::string_view s, std::string_view what) {
  if (text::has_line_break(s)) throw SanitationError(std::string(what) + " contains a line break");
}

bool is_single_word(std::string_view s) {
  const auto words = text::split_whitespace(s);
  return words.size() == 1 && words[0].size() == s.size();
}

}  // namespace

void Qrels::add(const std::string& query_id, const std::string& passage_id, int grade) {
  if (grade < 0) throw ValidationError("negative grade for (" + query_id + ", " + passage_id + ")");
  auto& grades = by_query_[query_id];
  auto [it, inserted] = grades.emplace(passage_id, grade);
  if (!inserted) throw DuplicateKeyError("duplicate judgment (" + query_id + ", " + passage_id + ")");
  ++size_;
}

std::optional<int> Qrels::grade(std::string_view query_id, std::string_view passage_id) const {
  auto q = by_query_.find(query_id);
  if (q == by_query_.end()) return std::nullopt;
  auto p = q->second.find(passage_id);
  if (p == q->second.end()) return std::nullopt;
  return p->second;
}

const Qrels::PassageGrades& Qrels::judgments_for(std::string_view query_id) const {
  static const PassageGrades kEmpty;
  auto q = by_query_.find(query_id);
  return q == by_query_.end() ? kEmpty : q->second;
}

bool Qrels::has_query(std::string_view query_id) const { return by_query_.find(query_id) != by_query_.end(); }

QueryStore parse_queries(std::istream& in, const std::string& source) {
  return parse_id_text<QueryRecord>(in, source, /*require_text=*/true);
}

PassageStore parse_collection(std::istream& in, const std::string& source) {
  return parse_id_text<PassageRecord>(in, source, /*require_text=*/false);
}

Qrels parse_qrels(std::istream& in, const std::string& source) {
  Qrels qrels;
  LineReader reader(in, source);
  std::string_view line;
  while (reader.next(line)) {
    const auto fields = text::split_whitespace(line);
    if (fields.size() != 4) reader.fail("expected 'query_id 0 passage_id grade', got " + std::to_string(fields.size()) + " fields");
    const auto grade = text::parse_int(fields[3]);
    if (!grade) reader.fail("grade '" + std::string(fields[3]) + "' is not an integer");
    if (*grade < 0 || *grade > std::numeric_limits<int>::max()) reader.fail("grade out of range");
    try {
      qrels.add(std::string(fields[0]), std::string(fields[2]), static_cast<int>(*grade));
    } catch (const DuplicateKeyError& e) {
      throw DuplicateKeyError(source + ":" + std::to_string(reader.line_no()) + ": " + e.what());
    }
  }
  return qrels;
}

void for_each_top1000_line(std::istream& in, const std::string& source,
                           const std::function<void(const Top1000Line&, std::size_t)>& visit) {
  LineReader reader(in, source);
  std::string_view line;
  while (reader.next(line)) {
    const auto fields = text::split_tabs(line, 4);
    if (fields.size() != 4) reader.fail("expected 4 tab-separated fields, got " + std::to_string(fields.size()));
    if (fields[0].empty() || fields[1].empty()) reader.fail("empty id");
    visit(Top1000Line{fields[0], fields[1], fields[2], fields[3]}, reader.line_no());
  }
}

std::vector<CandidateSet> parse_top1000(std::istream& in, const std::string& source, Top1000Options options) {
  std::vector<CandidateSet> sets;
  std::unordered_map<std::string, std::size_t> slot;
  std::vector<std::unordered_set<std::string>> seen;
  for_each_top1000_line(in, source, [&](const Top1000Line& row, std::size_t line_no) {
    auto [it, inserted] = slot.emplace(std::string(row.query_id), sets.size());
    if (inserted) {
      CandidateSet set;
      set.query_id = std::string(row.query_id);
      if (options.keep_texts) set.query_text = std::string(row.query_text);
      sets.push_back(std::move(set));
      seen.emplace_back();
    }
    auto& set = sets[it->second];
    if (!seen[it->second].emplace(row.passage_id).second) {
      throw DuplicateKeyError(source + ":" + std::to_string(line_no) + ": duplicate candidate (" + set.query_id + ", " +
                              std::string(row.passage_id) + ")");
    }
    if (set.passage_ids.size() >= kMaxCandidatesPerQuery) {
      throw CapacityError(source + ":" + std::to_string(line_no) + ": query '" + set.query_id + "' has more than " +
                          std::to_string(kMaxCandidatesPerQuery) + " candidates");
    }
    set.passage_ids.emplace_back(row.passage_id);
    if (options.keep_texts) set.passage_texts.emplace_back(row.passage_text);
  });
  return sets;
}

void write_queries(std::ostream& out, const QueryStore& queries) {
  for (const auto& q : queries) {
    check_line_safe(q.text, "query text");
    out << q.id << '\t' << q.text << '\n';
  }
}

void write_collection(std::ostream& out, const PassageStore& passages) {
  for (const auto& p : passages) {
    check_line_safe(p.text, "passage text");
    out << p.id << '\t' << p.text << '\n';
  }
}

void write_qrels(std::ostream& out, const Qrels& qrels) {
  for (const auto& [query_id, grades] : qrels.by_query()) {
    for (const auto& [passage_id, grade] : grades) out << query_id << " 0 " << passage_id << ' ' << grade << '\n';
  }
}

void write_top1000(std::ostream& out, const std::vector<CandidateSet>& candidates) {
  for (const auto& set : candidates) {
    if (!set.has_texts() || !set.query_text) throw ContractViolation("top1000 output needs texts for query '" + set.query_id + "'");
    for (std::size_t i = 0; i < set.passage_ids.size(); ++i) {
      check_line_safe(set.passage_texts[i], "passage text");
      out << set.query_id << '\t' << set.passage_ids[i] << '\t' << *set.query_text << '\t' << set.passage_texts[i] << '\n';
    }
  }
}

void write_run_file(std::ostream& out, const std::vector<Ranking>& rankings, const std::string& tag) {
  if (!is_single_word(tag)) throw ConfigError("run tag must be a single non-empty word");
  for (const auto& ranking : rankings) {
    if (!is_single_word(ranking.query_id)) throw ContractViolation("query id '" + ranking.query_id + "' is not a single word");
    for (std::size_t i = 0; i < ranking.entries.size(); ++i) {
      if (!is_single_word(ranking.entries[i].passage_id)) {
        throw ContractViolation("passage id '" + ranking.entries[i].passage_id + "' is not a single word");
      }
      if (i == 0) continue;
      if (ranking.entries[i].score > ranking.entries[i - 1].score) {
        throw ContractViolation("ranking for query '" + ranking.query_id + "' is not sorted by score at position " +
                                std::to_string(i + 1));
      }
    }
  }
  for (const auto& ranking : rankings) {
    int rank = 1;
    for (const auto& entry : ranking.entries) {
      out << ranking.query_id << " Q0 " << entry.passage_id << ' ' << rank++ << ' ' << text::format_score(entry.score) << ' '
          << tag << '\n';
    }
  }
}

std::vector<RunFileEntry> parse_run_file(std::istream& in, const std::string& source) {
  std::vector<RunFileEntry> entries;
  LineReader reader(in, source);
  std::string_view line;
  while (reader.next(line)) {
    const auto fields = text::split_whitespace(line);
    if (fields.size() != 6) reader.fail("expected 6 fields, got " + std::to_string(fields.size()));
    if (fields[1] != "Q0") reader.fail("second column must be 'Q0'");
    const auto rank = text::parse_int(fields[3]);
    if (!rank || *rank < 1 || *rank > std::numeric_limits<int>::max()) reader.fail("invalid rank '" + std::string(fields[3]) + "'");
    const auto score = text::parse_double(fields[4]);
    if (!score) reader.fail("invalid score '" + std::string(fields[4]) + "'");
    entries.push_back(RunFileEntry{std::string(fields[0]), std::string(fields[2]), static_cast<int>(*rank), *score,
                                   std::string(fields[5])});
  }
  return entries;
}

std::vector<Ranking> rankings_from_run(const std::vector<RunFileEntry>& entries) {
  std::vector<std::vector<const RunFileEntry*>> grouped;
  std::unordered_map<std::string, std::size_t> slot;
  for (const auto& e : entries) {
    auto [it, inserted] = slot.emplace(e.query_id, grouped.size());
    if (inserted) grouped.emplace_back();
    grouped[it->second].push_back(&e);
  }
  std::vector<Ranking> rankings;
  rankings.reserve(grouped.size());
  for (auto& group : grouped) {
    std::stable_sort(group.begin(), group.end(), [](const auto* a, const auto* b) { return a->rank < b->rank; });
    Ranking ranking;
    ranking.query_id = group.front()->query_id;
    std::unordered_set<std::string_view> ids;
    for (std::size_t i = 0; i < group.size(); ++i) {
      const auto& e = *group[i];
      if (e.rank != static_cast<int>(i + 1)) {
        throw ValidationError("query '" + ranking.query_id + "': ranks are not contiguous from 1 (found " +
                              std::to_string(e.rank) + " at position " + std::to_string(i + 1) + ")");
      }
      if (i > 0 && e.score > group[i - 1]->score) {
        throw ValidationError("query '" + ranking.query_id + "': score increases at rank " + std::to_string(e.rank));
      }
      if (!ids.insert(e.passage_id).second) {
        throw ValidationError("query '" + ranking.query_id + "': passage '" + e.passage_id + "' ranked twice");
      }
      ranking.entries.push_back(ScoredPassage{e.passage_id, e.score});
    }
    rankings.push_back(std::move(ranking));
  }
  return rankings;
}

}  // namespace q2q
