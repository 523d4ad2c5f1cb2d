#include "q2q/bm25.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <thread>

namespace q2q {

void Bm25Params::validate() const {
  if (!(k1 > 0.0) || !std::isfinite(k1)) throw ConfigError("bm25 k1 must be > 0");
  if (!(b >= 0.0 && b <= 1.0)) throw ConfigError("bm25 b must be in [0, 1]");
}

InvertedIndex::InvertedIndex(std::vector<std::string> passage_ids, std::vector<std::uint32_t> doc_lengths,
                             std::vector<std::string> terms, std::vector<std::vector<Posting>> postings,
                             AnalyzerOptions analyzer)
    : passage_ids_(std::move(passage_ids)),
      doc_lengths_(std::move(doc_lengths)),
      terms_(std::move(terms)),
      postings_(std::move(postings)),
      analyzer_(std::move(analyzer)) {
  if (passage_ids_.size() != doc_lengths_.size()) throw FormatError("passage id and length tables differ in size");
  if (terms_.size() != postings_.size()) throw FormatError("term and posting tables differ in size");
  const auto n = static_cast<std::uint32_t>(passage_ids_.size());
  for (std::size_t i = 0; i < passage_ids_.size(); ++i) {
    if (i > 0 && !(passage_ids_[i - 1] < passage_ids_[i])) throw FormatError("passage ids not strictly ascending");
    doc_lookup_.emplace(passage_ids_[i], static_cast<std::uint32_t>(i));
  }
  for (std::size_t t = 0; t < terms_.size(); ++t) {
    if (t > 0 && !(terms_[t - 1] < terms_[t])) throw FormatError("terms not strictly ascending");
    const auto& list = postings_[t];
    if (list.empty()) throw FormatError("empty posting list for '" + terms_[t] + "'");
    for (std::size_t j = 0; j < list.size(); ++j) {
      if (list[j].doc >= n || list[j].tf == 0) throw FormatError("invalid posting for '" + terms_[t] + "'");
      if (j > 0 && list[j - 1].doc >= list[j].doc) throw FormatError("postings not ascending for '" + terms_[t] + "'");
    }
    term_lookup_.emplace(terms_[t], static_cast<std::uint32_t>(t));
  }
  if (n > 0) {
    const double total = std::accumulate(doc_lengths_.begin(), doc_lengths_.end(), 0.0);
    avgdl_ = total / static_cast<double>(n);
  }
}

std::span<const Posting> InvertedIndex::postings(std::string_view term) const {
  auto it = term_lookup_.find(std::string(term));
  if (it == term_lookup_.end()) return {};
  return postings_[it->second];
}

std::uint32_t InvertedIndex::doc_number(std::string_view passage_id) const {
  auto it = doc_lookup_.find(std::string(passage_id));
  if (it == doc_lookup_.end()) throw NotFoundError("passage '" + std::string(passage_id) + "' is not indexed");
  return it->second;
}

std::uint32_t InvertedIndex::term_frequency(std::string_view term, std::uint32_t doc) const {
  const auto list = postings(term);
  auto it = std::lower_bound(list.begin(), list.end(), doc, [](const Posting& p, std::uint32_t d) { return p.doc < d; });
  return (it != list.end() && it->doc == doc) ? it->tf : 0;
}

bool InvertedIndex::operator==(const InvertedIndex& other) const {
  return passage_ids_ == other.passage_ids_ && doc_lengths_ == other.doc_lengths_ && terms_ == other.terms_ &&
         postings_ == other.postings_ && analyzer_.options() == other.analyzer_.options();
}

namespace {

using ShardPostings = std::unordered_map<std::string, std::vector<Posting>>;

void index_shard(const std::vector<const PassageRecord*>& docs, std::size_t begin, std::size_t end,
                 const Analyzer& analyzer, ShardPostings& postings, std::vector<std::uint32_t>& lengths) {
  std::unordered_map<std::string, std::uint32_t> counts;
  for (std::size_t d = begin; d < end; ++d) {
    counts.clear();
    const TokenSequence tokens = analyzer.analyze(docs[d]->text);
    lengths[d] = static_cast<std::uint32_t>(tokens.size());
    for (const auto& token : tokens.tokens) ++counts[token];
    for (auto& [term, tf] : counts) postings[term].push_back(Posting{static_cast<std::uint32_t>(d), tf});
  }
}

}  // namespace

InvertedIndex build_index(const PassageStore& passages, const IndexBuildOptions& options) {
  if (passages.empty()) throw ContractViolation("cannot index an empty passage store");
  if (passages.size() > std::numeric_limits<std::uint32_t>::max()) throw CapacityError("too many passages for one index");

  std::vector<const PassageRecord*> docs;
  docs.reserve(passages.size());
  for (const auto& p : passages) docs.push_back(&p);
  std::sort(docs.begin(), docs.end(), [](const auto* a, const auto* b) { return a->id < b->id; });

  const Analyzer analyzer(options.analyzer);
  const std::size_t shard_count = std::clamp<std::size_t>(options.threads, 1, docs.size());
  std::vector<ShardPostings> shards(shard_count);
  std::vector<std::uint32_t> lengths(docs.size());
  {
    std::vector<std::jthread> workers;
    const std::size_t per_shard = (docs.size() + shard_count - 1) / shard_count;
    for (std::size_t s = 0; s < shard_count; ++s) {
      const std::size_t begin = std::min(docs.size(), s * per_shard);
      const std::size_t end = std::min(docs.size(), begin + per_shard);
      if (shard_count == 1) {
        index_shard(docs, begin, end, analyzer, shards[s], lengths);
      } else {
        workers.emplace_back([&, s, begin, end] { index_shard(docs, begin, end, analyzer, shards[s], lengths); });
      }
    }
  }

  // Shards cover ascending document ranges, so appending in shard order keeps
  // every posting list sorted.
  std::map<std::string, std::vector<Posting>> merged;
  for (auto& shard : shards) {
    for (auto& [term, list] : shard) {
      auto& target = merged[term];
      target.insert(target.end(), list.begin(), list.end());
    }
    shard.clear();
  }

  std::vector<std::string> ids;
  ids.reserve(docs.size());
  for (const auto* d : docs) ids.push_back(d->id);
  std::vector<std::string> terms;
  std::vector<std::vector<Posting>> lists;
  terms.reserve(merged.size());
  lists.reserve(merged.size());
  for (auto& [term, list] : merged) {
    terms.push_back(term);
    lists.push_back(std::move(list));
  }
  return InvertedIndex(std::move(ids), std::move(lengths), std::move(terms), std::move(lists), options.analyzer);
}

double idf(const InvertedIndex& index, std::string_view term) {
  const double n = static_cast<double>(index.passage_count());
  const double df = static_cast<double>(index.document_frequency(term));
  return std::log(1.0 + (n - df + 0.5) / (df + 0.5));
}

namespace {

struct WeightedTerm {
  std::string term;
  double query_weight = 1.0;
};

// Distinct terms in first-occurrence order, so every scoring path sums in
// the same order and produces bit-identical scores.
std::vector<WeightedTerm> query_terms(const TokenSequence& query, const Bm25Params& params) {
  std::vector<WeightedTerm> out;
  std::unordered_map<std::string_view, std::size_t> slot;
  for (const auto& token : query.tokens) {
    auto [it, inserted] = slot.emplace(token, out.size());
    if (inserted) {
      out.push_back(WeightedTerm{token, 1.0});
    } else if (params.query_tf_weighting) {
      out[it->second].query_weight += 1.0;
    }
  }
  return out;
}

double term_contribution(double term_idf, std::uint32_t tf, std::uint32_t doc_length, double avgdl,
                         const Bm25Params& params) {
  const double f = static_cast<double>(tf);
  const double norm = params.k1 * (1.0 - params.b + params.b * static_cast<double>(doc_length) / avgdl);
  return term_idf * f * (params.k1 + 1.0) / (f + norm);
}

}  // namespace

double bm25_score(const InvertedIndex& index, const TokenSequence& query, std::string_view passage_id,
                  const Bm25Params& params) {
  params.validate();
  const std::uint32_t doc = index.doc_number(passage_id);
  const std::uint32_t length = index.doc_lengths()[doc];
  double score = 0.0;
  for (const auto& [term, weight] : query_terms(query, params)) {
    const std::uint32_t tf = index.term_frequency(term, doc);
    if (tf == 0) continue;
    score += weight * term_contribution(idf(index, term), tf, length, index.avgdl(), params);
  }
  return score;
}

Ranking score_topk(const InvertedIndex& index, const std::string& query_id, std::string_view query_text,
                   std::size_t k, const Bm25Params& params) {
  params.validate();
  if (k < 1) throw ConfigError("top-k must be >= 1");
  Ranking ranking;
  ranking.query_id = query_id;
  const TokenSequence query = index.analyzer().analyze(query_text);

  std::vector<double> acc(index.passage_count(), 0.0);
  std::vector<std::uint32_t> touched;
  std::vector<char> seen(index.passage_count(), 0);
  const auto& lengths = index.doc_lengths();
  for (const auto& [term, weight] : query_terms(query, params)) {
    const auto list = index.postings(term);
    if (list.empty()) continue;
    const double term_idf = idf(index, term);
    for (const auto& p : list) {
      acc[p.doc] += weight * term_contribution(term_idf, p.tf, lengths[p.doc], index.avgdl(), params);
      if (!seen[p.doc]) {
        seen[p.doc] = 1;
        touched.push_back(p.doc);
      }
    }
  }

  const auto better = [&](std::uint32_t a, std::uint32_t b) { return acc[a] > acc[b] || (acc[a] == acc[b] && a < b); };
  const std::size_t keep = std::min(k, touched.size());
  std::partial_sort(touched.begin(), touched.begin() + static_cast<std::ptrdiff_t>(keep), touched.end(), better);
  ranking.entries.reserve(keep);
  for (std::size_t i = 0; i < keep; ++i) {
    ranking.entries.push_back(ScoredPassage{index.passage_ids()[touched[i]], acc[touched[i]]});
  }
  return ranking;
}

CandidateSet retrieve_topk(const InvertedIndex& index, const std::string& query_id, std::string_view query_text,
                           std::size_t k, const Bm25Params& params) {
  const Ranking ranking = score_topk(index, query_id, query_text, std::min(k, kMaxCandidatesPerQuery), params);
  CandidateSet set;
  set.query_id = query_id;
  set.query_text = std::string(query_text);
  set.passage_ids.reserve(ranking.entries.size());
  for (const auto& e : ranking.entries) set.passage_ids.push_back(e.passage_id);
  return set;
}

}  // namespace q2q
