#include "q2q/reranker.h"

#include <algorithm>
#include <cmath>
#include <future>
#include <istream>
#include <ostream>
#include <random>
#include <set>

#include "q2q/text.h"

namespace q2q {

void TruncationConfig::validate() const {
  if (max_query_tokens == 0 || total_budget == 0) throw ConfigError("token budgets must be positive");
  if (total_budget <= special_token_overhead + 1) {
    throw ConfigError("total budget " + std::to_string(total_budget) + " leaves no room after " +
                      std::to_string(special_token_overhead) + " special tokens");
  }
}

ScorerInput prepare_input(const TokenSequence& query_tokens, const TokenSequence& passage_tokens,
                          const TruncationConfig& config) {
  config.validate();
  const std::size_t content_budget = config.total_budget - config.special_token_overhead;
  const std::size_t query_keep = std::min({query_tokens.size(), config.max_query_tokens, content_budget});
  const std::size_t passage_keep = std::min(passage_tokens.size(), content_budget - query_keep);

  ScorerInput input;
  input.total_budget = config.total_budget;
  input.special_token_overhead = config.special_token_overhead;
  input.query_tokens.tokens.assign(query_tokens.tokens.begin(), query_tokens.tokens.begin() + static_cast<std::ptrdiff_t>(query_keep));
  input.passage_tokens.tokens.assign(passage_tokens.tokens.begin(),
                                     passage_tokens.tokens.begin() + static_cast<std::ptrdiff_t>(passage_keep));
  return input;
}

// ---------------------------------------------------------------------------

namespace {

std::uint64_t fnv1a(std::string_view s, std::uint64_t h = 1469598103934665603ull) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

// Unbiased draw in [0, bound) from the engine's raw output, which is fully
// specified by the standard (unlike the distributions).
std::size_t draw_below(std::mt19937_64& rng, std::size_t bound) {
  const std::uint64_t b = bound;
  const std::uint64_t threshold = (0 - b) % b;
  for (;;) {
    const std::uint64_t r = rng();
    if (r >= threshold) return static_cast<std::size_t>(r % b);
  }
}

std::vector<std::string> draw_without_replacement(std::vector<std::string> pool, std::size_t count, std::mt19937_64& rng) {
  count = std::min(count, pool.size());
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t j = i + draw_below(rng, pool.size() - i);
    std::swap(pool[i], pool[j]);
  }
  pool.resize(count);
  return pool;
}

}  // namespace

SamplingResult sample_training_pairs(const Qrels& qrels, const std::vector<CandidateSet>& candidates,
                                     const SamplingOptions& options, std::span<const std::string> collection_ids) {
  if (options.negatives_per_positive < 1) throw ConfigError("negatives per positive must be >= 1");
  if (options.min_grade < 1) throw ConfigError("min_grade must be >= 1");
  if (options.source == NegativeSource::kCollection && collection_ids.empty()) {
    throw ConfigError("collection negatives requested without collection ids");
  }

  std::unordered_map<std::string_view, const CandidateSet*> by_query;
  for (const auto& set : candidates) by_query.emplace(set.query_id, &set);

  std::vector<std::string_view> distinct_ids(collection_ids.begin(), collection_ids.end());
  std::sort(distinct_ids.begin(), distinct_ids.end());
  distinct_ids.erase(std::unique(distinct_ids.begin(), distinct_ids.end()), distinct_ids.end());

  SamplingResult result;
  for (const auto& [query_id, grades] : qrels.by_query()) {
    std::vector<std::string> positives;
    std::unordered_set<std::string_view> relevant;
    for (const auto& [passage_id, grade] : grades) {
      if (grade >= options.min_grade) {
        positives.push_back(passage_id);
        relevant.insert(passage_id);
      }
    }
    if (positives.empty()) continue;

    std::vector<std::string> pool;
    std::size_t available = 0;
    bool use_pool = true;
    if (options.source == NegativeSource::kCandidates) {
      auto it = by_query.find(query_id);
      if (it != by_query.end()) {
        for (const auto& pid : it->second->passage_ids) {
          if (relevant.count(pid) == 0) pool.push_back(pid);
        }
      }
      available = pool.size();
    } else {
      available = distinct_ids.size();
      for (auto id : relevant) {
        if (std::binary_search(distinct_ids.begin(), distinct_ids.end(), id)) --available;
      }
      use_pool = available <= 4 * options.negatives_per_positive;
      if (use_pool) {
        for (auto id : distinct_ids) {
          if (relevant.count(id) == 0) pool.emplace_back(id);
        }
      }
    }

    std::mt19937_64 rng(fnv1a(query_id, options.seed ^ 0x9e3779b97f4a7c15ull));
    for (const auto& positive : positives) {
      result.pairs.push_back(LabeledPair{query_id, positive, 1});
      std::vector<std::string> negatives;
      if (use_pool) {
        negatives = draw_without_replacement(pool, options.negatives_per_positive, rng);
      } else {
        // Large collection: rejection sampling over ids avoids copying it.
        std::unordered_set<std::string_view> chosen;
        while (negatives.size() < options.negatives_per_positive) {
          const auto& id = collection_ids[draw_below(rng, collection_ids.size())];
          if (relevant.count(id) != 0 || !chosen.insert(id).second) continue;
          negatives.push_back(id);
        }
      }
      for (auto& n : negatives) result.pairs.push_back(LabeledPair{query_id, std::move(n), 0});
    }
    if (available < options.negatives_per_positive) {
      result.warnings.push_back("query '" + query_id + "': only " + std::to_string(available) + " negatives available, " +
                                std::to_string(options.negatives_per_positive) + " requested per positive");
    }
  }
  return result;
}

void write_training_pairs(std::ostream& out, const std::vector<LabeledPair>& pairs) {
  for (const auto& p : pairs) out << p.query_id << '\t' << p.passage_id << '\t' << p.label << '\n';
}

// ---------------------------------------------------------------------------

double lexical_overlap(std::string_view query_text, std::string_view passage_text) {
  auto q = tokenize(query_text).tokens;
  auto p = tokenize(passage_text).tokens;
  std::sort(q.begin(), q.end());
  q.erase(std::unique(q.begin(), q.end()), q.end());
  std::sort(p.begin(), p.end());
  p.erase(std::unique(p.begin(), p.end()), p.end());
  if (q.empty() && p.empty()) return 0.0;
  std::vector<std::string> shared;
  std::set_intersection(q.begin(), q.end(), p.begin(), p.end(), std::back_inserter(shared));
  return static_cast<double>(shared.size()) / static_cast<double>(q.size() + p.size() - shared.size());
}

double lexical_overlap_scorer(const ExpandedQuery& expanded, const PassageRecord& passage) {
  return lexical_overlap(expanded.assembled_text, passage.text);
}

std::vector<double> LexicalScorer::score(std::span<const ScoringRequest> batch) {
  std::vector<double> out;
  out.reserve(batch.size());
  for (const auto& r : batch) out.push_back(lexical_overlap(r.query_text, r.passage_text));
  return out;
}

ScoreTable load_precomputed_scores(std::istream& in, const std::string& source) {
  ScoreTable table;
  std::string buffer;
  std::size_t line_no = 0;
  while (std::getline(in, buffer)) {
    ++line_no;
    const auto line = text::strip_cr(buffer);
    if (line.empty()) continue;
    const auto fields = text::split_tabs(line, 3);
    if (fields.size() != 3 || fields[0].empty() || fields[1].empty()) {
      throw ParseError(source, line_no, "expected 'query_id<TAB>passage_id<TAB>score'");
    }
    const auto value = text::parse_double(text::trim(fields[2]));
    if (!value) throw ParseError(source, line_no, "invalid score '" + std::string(fields[2]) + "'");
    if (*value < 0.0 || *value > 1.0) {
      throw ValidationError(source + ":" + std::to_string(line_no) + ": score " + std::string(fields[2]) + " outside [0, 1]");
    }
    auto [it, inserted] = table.emplace(std::pair(std::string(fields[0]), std::string(fields[1])), *value);
    if (!inserted) {
      throw DuplicateKeyError(source + ":" + std::to_string(line_no) + ": duplicate score for (" + std::string(fields[0]) +
                              ", " + std::string(fields[1]) + ")");
    }
  }
  return table;
}

void write_scores(std::ostream& out, const ScoreTable& scores) {
  for (const auto& [key, value] : scores) out << key.first << '\t' << key.second << '\t' << text::format_score(value) << '\n';
}

std::vector<double> PrecomputedScorer::score(std::span<const ScoringRequest> batch) {
  std::vector<double> out;
  out.reserve(batch.size());
  for (const auto& r : batch) {
    auto it = table_.find(std::pair(std::string(r.query_id), std::string(r.passage_id)));
    if (it == table_.end()) throw ScorerError(std::string(r.query_id), std::string(r.passage_id), "no precomputed score");
    out.push_back(it->second);
  }
  return out;
}

std::vector<double> OracleScorer::score(std::span<const ScoringRequest> batch) {
  std::vector<double> out;
  out.reserve(batch.size());
  for (const auto& r : batch) {
    const auto grade = qrels_.grade(r.query_id, r.passage_id);
    out.push_back(grade && *grade >= min_grade_ ? 1.0 : 0.0);
  }
  return out;
}

ConstantScorer::ConstantScorer(double value) : value_(value) {
  if (!(value >= 0.0 && value <= 1.0)) throw ConfigError("constant score must be in [0, 1]");
}

std::vector<double> ConstantScorer::score(std::span<const ScoringRequest> batch) {
  return std::vector<double>(batch.size(), value_);
}

// ---------------------------------------------------------------------------

void attach_texts(CandidateSet& candidates, const PassageStore& passages) {
  if (!candidates.passage_texts.empty()) return;
  candidates.passage_texts.reserve(candidates.passage_ids.size());
  for (const auto& pid : candidates.passage_ids) {
    const PassageRecord* p = passages.find(pid);
    if (p == nullptr) throw MissingReferenceError("candidate passage '" + pid + "' is not in the collection");
    candidates.passage_texts.push_back(p->text);
  }
}

void sort_ranking(Ranking& ranking) {
  std::sort(ranking.entries.begin(), ranking.entries.end(), [](const ScoredPassage& a, const ScoredPassage& b) {
    return a.score > b.score || (a.score == b.score && a.passage_id < b.passage_id);
  });
}

Ranking rerank(const CandidateSet& candidates, const ExpandedQuery& expanded, RelevanceScorer& scorer,
               const RerankOptions& options) {
  options.truncation.validate();
  if (options.batch_size < 1) throw ConfigError("batch size must be >= 1");
  const std::size_t n = candidates.passage_ids.size();
  if (candidates.passage_texts.size() != n) {
    throw ContractViolation("candidate set for query '" + candidates.query_id + "' has no passage texts");
  }
  {
    std::unordered_set<std::string_view> ids;
    for (const auto& pid : candidates.passage_ids) {
      if (!ids.insert(pid).second) {
        throw ContractViolation("duplicate candidate '" + pid + "' for query '" + candidates.query_id + "'");
      }
    }
  }

  static const WhitespaceTokenizer kWhitespace;
  const ModelTokenizer& tokenizer = options.tokenizer != nullptr ? *options.tokenizer : kWhitespace;
  const TokenSequence query_tokens{tokenizer.tokenize(expanded.assembled_text)};

  std::vector<std::string> query_texts(n);
  std::vector<std::string> passage_texts(n);
  std::vector<ScoringRequest> requests(n);
  for (std::size_t i = 0; i < n; ++i) {
    const ScorerInput input = prepare_input(query_tokens, TokenSequence{tokenizer.tokenize(candidates.passage_texts[i])},
                                            options.truncation);
    query_texts[i] = tokenizer.detokenize(input.query_tokens.tokens);
    passage_texts[i] = tokenizer.detokenize(input.passage_tokens.tokens);
    requests[i] = ScoringRequest{candidates.query_id, candidates.passage_ids[i], query_texts[i], passage_texts[i]};
  }

  std::vector<double> scores(n, 0.0);
  const auto score_batch = [&](std::size_t begin, std::size_t end) {
    const std::span<const ScoringRequest> batch(requests.data() + begin, end - begin);
    std::vector<double> got;
    try {
      got = scorer.score(batch);
    } catch (const ScorerError&) {
      throw;
    } catch (const std::exception& e) {
      throw ScorerError(candidates.query_id, std::string(batch.front().passage_id), e.what());
    }
    if (got.size() != batch.size()) {
      throw ScorerError(candidates.query_id, std::string(batch.front().passage_id),
                        "scorer returned " + std::to_string(got.size()) + " scores for " + std::to_string(batch.size()) + " pairs");
    }
    for (std::size_t i = 0; i < got.size(); ++i) {
      if (!(got[i] >= 0.0 && got[i] <= 1.0)) {
        throw ScorerError(candidates.query_id, std::string(batch[i].passage_id),
                          "score " + text::format_roundtrip(got[i]) + " outside [0, 1]");
      }
      scores[begin + i] = got[i];
    }
  };

  std::vector<std::pair<std::size_t, std::size_t>> batches;
  for (std::size_t b = 0; b < n; b += options.batch_size) batches.emplace_back(b, std::min(n, b + options.batch_size));
  const std::size_t window = std::max<std::size_t>(1, options.max_in_flight);
  for (std::size_t start = 0; start < batches.size(); start += window) {
    const std::size_t stop = std::min(batches.size(), start + window);
    if (stop - start == 1) {
      score_batch(batches[start].first, batches[start].second);
      continue;
    }
    std::vector<std::future<void>> pending;
    for (std::size_t b = start; b < stop; ++b) {
      pending.push_back(std::async(std::launch::async, score_batch, batches[b].first, batches[b].second));
    }
    for (auto& f : pending) f.get();
  }

  Ranking ranking;
  ranking.query_id = candidates.query_id;
  ranking.entries.reserve(n);
  for (std::size_t i = 0; i < n; ++i) ranking.entries.push_back(ScoredPassage{candidates.passage_ids[i], scores[i]});
  sort_ranking(ranking);
  return ranking;
}

}  // namespace q2q
