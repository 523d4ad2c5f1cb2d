#include "q2q/pair_miner.h"

#include <algorithm>
#include <ostream>
#include <set>
#include <sstream>
#include <unordered_map>
#include <utility>

#include "q2q/text.h"

namespace q2q {

std::vector<PassageQueryGroup> group_by_passage(const Qrels& qrels, int min_grade) {
  if (min_grade < 1) throw ConfigError("min_grade must be >= 1");
  std::map<std::string, std::vector<std::string>> by_passage;
  // Qrels iterate in ascending query order, so each group's ids arrive sorted.
  for (const auto& [query_id, grades] : qrels.by_query()) {
    for (const auto& [passage_id, grade] : grades) {
      if (grade >= min_grade) by_passage[passage_id].push_back(query_id);
    }
  }
  std::vector<PassageQueryGroup> groups;
  groups.reserve(by_passage.size());
  for (auto& [passage_id, queries] : by_passage) groups.push_back(PassageQueryGroup{passage_id, std::move(queries)});
  return groups;
}

PairMiningReport mining_report(const std::vector<PassageQueryGroup>& groups) {
  PairMiningReport report;
  std::set<std::pair<std::string_view, std::string_view>> distinct;
  std::size_t multi = 0;
  for (const auto& group : groups) {
    const std::size_t k = group.query_ids.size();
    if (k == 0) continue;
    ++report.histogram[k];
    ++report.passage_count;
    report.total_judgments += k;
    report.pair_occurrences += k * (k - 1) / 2;
    if (k > 1) ++multi;
    for (std::size_t i = 0; i < k; ++i) {
      for (std::size_t j = i + 1; j < k; ++j) {
        std::string_view a = group.query_ids[i];
        std::string_view b = group.query_ids[j];
        if (b < a) std::swap(a, b);
        distinct.emplace(a, b);
      }
    }
  }
  report.unique_unordered_pairs = distinct.size();
  if (report.passage_count > 0) {
    report.multi_query_fraction = static_cast<double>(multi) / static_cast<double>(report.passage_count);
  }
  return report;
}

std::vector<EquivalentQueryPair> mine_pairs(const std::vector<PassageQueryGroup>& groups, PairOrdering ordering) {
  std::vector<EquivalentQueryPair> pairs;
  for (const auto& group : groups) {
    std::vector<std::string> ids = group.query_ids;
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    for (std::size_t i = 0; i < ids.size(); ++i) {
      for (std::size_t j = i + 1; j < ids.size(); ++j) {
        pairs.push_back(EquivalentQueryPair{ids[i], ids[j], group.passage_id});
        if (ordering == PairOrdering::kBothDirections) {
          pairs.push_back(EquivalentQueryPair{ids[j], ids[i], group.passage_id});
        }
      }
    }
  }
  std::sort(pairs.begin(), pairs.end(), [](const auto& a, const auto& b) {
    return std::tie(a.via_passage_id, a.source_query_id, a.target_query_id) <
           std::tie(b.via_passage_id, b.source_query_id, b.target_query_id);
  });
  return pairs;
}

void export_seq2seq(const std::vector<EquivalentQueryPair>& pairs, const QueryStore& queries, std::ostream& source,
                    std::ostream& target) {
  const auto resolve = [&](const std::string& id) -> const std::string& {
    const QueryRecord* q = queries.find(id);
    if (q == nullptr) throw MissingReferenceError("query '" + id + "' is not in the query store");
    if (text::has_line_break(q->text)) throw SanitationError("query '" + id + "' text contains a line break");
    return q->text;
  };
  // Validate everything first so a failure leaves both outputs untouched.
  std::ostringstream src_buf;
  std::ostringstream tgt_buf;
  for (const auto& pair : pairs) {
    src_buf << resolve(pair.source_query_id) << '\n';
    tgt_buf << resolve(pair.target_query_id) << '\n';
  }
  source << src_buf.str();
  target << tgt_buf.str();
}

void write_mining_report(std::ostream& out, const PairMiningReport& report) {
  for (const auto& [k, count] : report.histogram) out << k << '\t' << count << '\n';
  out << "passages\t" << report.passage_count << '\n';
  out << "total_judgments\t" << report.total_judgments << '\n';
  out << "pair_occurrences\t" << report.pair_occurrences << '\n';
  out << "unique_unordered_pairs\t" << report.unique_unordered_pairs << '\n';
  out << "multi_query_fraction\t" << text::format_score(report.multi_query_fraction) << '\n';
}

void write_pairs(std::ostream& out, const std::vector<EquivalentQueryPair>& pairs) {
  for (const auto& p : pairs) out << p.source_query_id << '\t' << p.target_query_id << '\t' << p.via_passage_id << '\n';
}

std::map<std::size_t, std::size_t> collapse_histogram(const std::map<std::size_t, std::size_t>& histogram,
                                                      std::size_t cap) {
  std::map<std::size_t, std::size_t> out;
  for (const auto& [k, count] : histogram) out[std::min(k, cap)] += count;
  return out;
}

}  // namespace q2q
