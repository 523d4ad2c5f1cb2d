#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "fixture.h"
#include "oracles.h"
#include "q2q/error.h"
#include "q2q/reranker.h"

namespace q2q {
namespace {

TokenSequence n_tokens(std::size_t n, const char* prefix) {
  TokenSequence seq;
  for (std::size_t i = 0; i < n; ++i) seq.tokens.push_back(prefix + std::to_string(i));
  return seq;
}

TEST(PrepareInput, LongQueryAndPassage) {
  const auto input = prepare_input(n_tokens(80, "q"), n_tokens(500, "p"));
  EXPECT_EQ(input.query_tokens.size(), 64u);
  EXPECT_EQ(input.passage_tokens.size(), 445u);
  EXPECT_EQ(input.total_length(), 512u);
  EXPECT_EQ(input.query_tokens.tokens.front(), "q0");
  EXPECT_EQ(input.passage_tokens.tokens.back(), "p444");
}

TEST(PrepareInput, ShortInputsUnchanged) {
  const auto input = prepare_input(n_tokens(5, "q"), n_tokens(10, "p"));
  EXPECT_EQ(input.query_tokens, n_tokens(5, "q"));
  EXPECT_EQ(input.passage_tokens, n_tokens(10, "p"));
  EXPECT_EQ(input.total_length(), 18u);
}

TEST(PrepareInput, EmptyPassage) {
  const auto input = prepare_input(n_tokens(3, "q"), TokenSequence{});
  EXPECT_EQ(input.query_tokens.size(), 3u);
  EXPECT_TRUE(input.passage_tokens.empty());
}

TEST(PrepareInput, BudgetHoldsForRandomLengths) {
  std::mt19937_64 rng(3);
  const TruncationConfig configs[] = {{}, {16, 40, 3}, {64, 5, 3}, {8, 128, 2}};
  for (int round = 0; round < 10000; ++round) {
    const auto& config = configs[fixture::draw(rng, std::size(configs))];
    const std::size_t q = fixture::draw(rng, 2001);
    const std::size_t p = fixture::draw(rng, 2001);
    const auto input = prepare_input(n_tokens(q, "q"), n_tokens(p, "p"), config);
    ASSERT_LE(input.query_tokens.size(), config.max_query_tokens);
    ASSERT_LE(input.total_length(), config.total_budget);
    ASSERT_EQ(input.query_tokens.size(), std::min({q, config.max_query_tokens, config.total_budget - config.special_token_overhead}));
    // whatever room remains goes to the passage
    ASSERT_EQ(input.passage_tokens.size(),
              std::min(p, config.total_budget - config.special_token_overhead - input.query_tokens.size()));
  }
}

TEST(PrepareInput, InvalidConfig) {
  EXPECT_THROW(prepare_input(n_tokens(1, "q"), n_tokens(1, "p"), TruncationConfig{64, 4, 3}), ConfigError);
  EXPECT_THROW(prepare_input(n_tokens(1, "q"), n_tokens(1, "p"), TruncationConfig{0, 512, 3}), ConfigError);
  EXPECT_NO_THROW(prepare_input(n_tokens(1, "q"), n_tokens(1, "p"), TruncationConfig{64, 5, 3}));
}

Qrels qrels_of(std::initializer_list<std::tuple<const char*, const char*, int>> rows) {
  Qrels qrels;
  for (const auto& [q, p, g] : rows) qrels.add(q, p, g);
  return qrels;
}

CandidateSet candidates_of(const std::string& qid, std::size_t n) {
  CandidateSet set;
  set.query_id = qid;
  for (std::size_t i = 0; i < n; ++i) set.passage_ids.push_back("c" + std::to_string(100 + i));
  return set;
}

TEST(Sampling, PositivesThenNegatives) {
  const Qrels qrels = qrels_of({{"q1", "c100", 1}, {"q1", "c101", 2}, {"q1", "c102", 0}});
  SamplingOptions options;
  options.negatives_per_positive = 4;
  const auto result = sample_training_pairs(qrels, {candidates_of("q1", 12)}, options);
  ASSERT_EQ(result.pairs.size(), 10u);
  EXPECT_TRUE(result.warnings.empty());
  for (std::size_t block = 0; block < 2; ++block) {
    EXPECT_EQ(result.pairs[block * 5].label, 1);
    std::set<std::string> negatives;
    for (std::size_t i = 1; i < 5; ++i) {
      const auto& pair = result.pairs[block * 5 + i];
      EXPECT_EQ(pair.label, 0);
      EXPECT_NE(pair.passage_id, "c100");
      EXPECT_NE(pair.passage_id, "c101");
      negatives.insert(pair.passage_id);
    }
    EXPECT_EQ(negatives.size(), 4u);
  }
}

TEST(Sampling, DeterministicPerSeed) {
  const auto world = fixture::make_world(7, 20, 50);
  SamplingOptions options;
  options.negatives_per_positive = 3;
  options.seed = 11;
  const auto a = sample_training_pairs(world.qrels, world.candidates, options);
  const auto b = sample_training_pairs(world.qrels, world.candidates, options);
  EXPECT_EQ(a.pairs, b.pairs);
  options.seed = 12;
  EXPECT_NE(sample_training_pairs(world.qrels, world.candidates, options).pairs, a.pairs);
}

TEST(Sampling, ShortfallWarns) {
  const Qrels qrels = qrels_of({{"q1", "c100", 1}});
  SamplingOptions options;
  options.negatives_per_positive = 10;
  const auto result = sample_training_pairs(qrels, {candidates_of("q1", 5)}, options);
  EXPECT_EQ(result.pairs.size(), 5u);
  ASSERT_EQ(result.warnings.size(), 1u);
  EXPECT_NE(result.warnings[0].find("q1"), std::string::npos);
}

TEST(Sampling, CollectionNegatives) {
  const Qrels qrels = qrels_of({{"q1", "d0001", 1}, {"q2", "d0002", 1}});
  std::vector<std::string> ids;
  for (int i = 0; i < 500; ++i) ids.push_back(fixture::format_id("d%04zu", static_cast<std::size_t>(i)));
  SamplingOptions options;
  options.source = NegativeSource::kCollection;
  options.negatives_per_positive = 5;
  const auto result = sample_training_pairs(qrels, {}, options, ids);
  ASSERT_EQ(result.pairs.size(), 12u);
  for (const auto& p : result.pairs) {
    if (p.label == 0) {
      EXPECT_EQ(qrels.grade(p.query_id, p.passage_id), std::nullopt);
    }
  }
  EXPECT_THROW(sample_training_pairs(qrels, {}, options), ConfigError);
}

TEST(Sampling, NegativesNeverJudgedRelevant) {
  std::mt19937_64 rng(5);
  for (int round = 0; round < 50; ++round) {
    const Qrels qrels = fixture::random_qrels(rng, 200, 10, 40, 2);
    std::vector<CandidateSet> candidates;
    for (std::size_t q = 0; q < 10; ++q) {
      CandidateSet set;
      set.query_id = fixture::format_id("q%03zu", q);
      for (std::size_t p = 0; p < 40; ++p) {
        if (fixture::draw(rng, 2) == 0) set.passage_ids.push_back(fixture::format_id("p%03zu", p));
      }
      candidates.push_back(std::move(set));
    }
    SamplingOptions options;
    options.negatives_per_positive = 1 + fixture::draw(rng, 4);
    options.min_grade = 1 + static_cast<int>(fixture::draw(rng, 2));
    for (const auto& p : sample_training_pairs(qrels, candidates, options).pairs) {
      const int grade = qrels.grade(p.query_id, p.passage_id).value_or(0);
      if (p.label == 1) {
        EXPECT_GE(grade, options.min_grade);
      } else {
        EXPECT_LT(grade, options.min_grade);
      }
    }
  }
}

CandidateSet with_texts(std::vector<std::pair<std::string, std::string>> passages) {
  CandidateSet set;
  set.query_id = "q1";
  for (auto& [id, text] : passages) {
    set.passage_ids.push_back(id);
    set.passage_texts.push_back(text);
  }
  return set;
}

std::vector<std::string> ids_of(const Ranking& r) {
  std::vector<std::string> ids;
  for (const auto& e : r.entries) ids.push_back(e.passage_id);
  return ids;
}

TEST(Rerank, PrecomputedTiesByPassageId) {
  const auto set = with_texts({{"p1", "x"}, {"p3", "y"}, {"p2", "z"}});
  PrecomputedScorer scorer({{{"q1", "p1"}, 0.2}, {{"q1", "p2"}, 0.9}, {{"q1", "p3"}, 0.9}});
  const auto ranking = rerank(set, unexpanded({"q1", "query"}), scorer);
  EXPECT_EQ(ids_of(ranking), (std::vector<std::string>{"p2", "p3", "p1"}));
  EXPECT_DOUBLE_EQ(ranking.entries[0].score, 0.9);
}

TEST(Rerank, ConstantScorerGivesAscendingIds) {
  const auto set = with_texts({{"p9", "a"}, {"p10", "b"}, {"p1", "c"}});
  ConstantScorer scorer(0.5);
  EXPECT_EQ(ids_of(rerank(set, unexpanded({"q1", "q"}), scorer)), (std::vector<std::string>{"p1", "p10", "p9"}));
}

TEST(Rerank, OracleScorerPutsRelevantFirst) {
  const auto world = fixture::make_world(7, 20, 50);
  OracleScorer scorer(world.qrels);
  for (const auto& set : world.candidates) {
    const auto ranking = rerank(set, unexpanded(world.queries.at(set.query_id)), scorer);
    ASSERT_EQ(ranking.entries.size(), set.passage_ids.size());
    bool seen_irrelevant = false;
    for (const auto& e : ranking.entries) {
      const bool relevant = world.qrels.grade(set.query_id, e.passage_id).value_or(0) >= 1;
      EXPECT_FALSE(relevant && seen_irrelevant);
      seen_irrelevant = seen_irrelevant || !relevant;
    }
  }
}

class FailingScorer : public RelevanceScorer {
 public:
  explicit FailingScorer(std::string bad) : bad_(std::move(bad)) {}
  std::vector<double> score(std::span<const ScoringRequest> batch) override {
    for (const auto& r : batch) {
      if (r.passage_id == bad_) throw ScorerError(std::string(r.query_id), std::string(r.passage_id), "boom");
    }
    return std::vector<double>(batch.size(), 0.1);
  }
  std::string name() const override { return "failing"; }

 private:
  std::string bad_;
};

TEST(Rerank, ScorerFailureAbandonsQuery) {
  const auto set = with_texts({{"p1", "a"}, {"p2", "b"}, {"p3", "c"}});
  FailingScorer scorer("p2");
  try {
    rerank(set, unexpanded({"q1", "q"}), scorer);
    FAIL() << "expected ScorerError";
  } catch (const ScorerError& e) {
    EXPECT_EQ(e.query_id(), "q1");
    EXPECT_EQ(e.passage_id(), "p2");
  }
}

class WrongCountScorer : public RelevanceScorer {
 public:
  std::vector<double> score(std::span<const ScoringRequest> batch) override {
    return std::vector<double>(batch.size() + 1, 0.1);
  }
  std::string name() const override { return "wrong"; }
};

TEST(Rerank, MisalignedOrOutOfRangeScores) {
  const auto set = with_texts({{"p1", "a"}, {"p2", "b"}});
  WrongCountScorer wrong;
  EXPECT_THROW(rerank(set, unexpanded({"q1", "q"}), wrong), ScorerError);
  PrecomputedScorer missing({{{"q1", "p1"}, 0.5}});
  EXPECT_THROW(rerank(set, unexpanded({"q1", "q"}), missing), ScorerError);
}

TEST(Rerank, RejectsDuplicatesAndMissingTexts) {
  ConstantScorer scorer;
  EXPECT_THROW(rerank(with_texts({{"p1", "a"}, {"p1", "b"}}), unexpanded({"q1", "q"}), scorer), ContractViolation);
  CandidateSet bare;
  bare.query_id = "q1";
  bare.passage_ids = {"p1"};
  EXPECT_THROW(rerank(bare, unexpanded({"q1", "q"}), scorer), ContractViolation);
}

class RecordingScorer : public RelevanceScorer {
 public:
  std::vector<double> score(std::span<const ScoringRequest> batch) override {
    std::vector<double> out;
    for (const auto& r : batch) {
      seen.emplace_back(r.query_text, r.passage_text);
      out.push_back(0.5);
    }
    return out;
  }
  std::string name() const override { return "recording"; }
  std::vector<std::pair<std::string, std::string>> seen;
};

TEST(Rerank, ScorerSeesTruncatedAssembledQuery) {
  std::string long_passage;
  for (int i = 0; i < 600; ++i) long_passage += "w" + std::to_string(i) + " ";
  const auto set = with_texts({{"p1", long_passage}});
  RecordingScorer scorer;
  const auto expanded = assemble({"q1", "orig"}, std::vector<ParaphraseBeam>{{"para one", -0.1, 1}}, 3);
  rerank(set, expanded, scorer);
  ASSERT_EQ(scorer.seen.size(), 1u);
  EXPECT_EQ(scorer.seen[0].first, "orig para one");
  WhitespaceTokenizer ws;
  EXPECT_EQ(ws.tokenize(scorer.seen[0].second).size(), 512u - 3u - 3u);
}

TEST(RerankProperties, PermutationAndMonotoneTransformInvariance) {
  std::mt19937_64 rng(23);
  for (int round = 0; round < 100; ++round) {
    const std::size_t n = 1 + fixture::draw(rng, 40);
    CandidateSet set;
    set.query_id = "q1";
    ScoreTable table;
    ScoreTable squared;
    for (std::size_t i = 0; i < n; ++i) {
      const std::string id = fixture::format_id("p%03zu", i);
      set.passage_ids.push_back(id);
      set.passage_texts.push_back("text " + id);
      // coarse values so ties are common
      const double s = static_cast<double>(fixture::draw(rng, 6)) / 5.0;
      table[{"q1", id}] = s;
      squared[{"q1", id}] = s * s;
    }
    PrecomputedScorer scorer(table);
    PrecomputedScorer transformed(squared);
    RerankOptions options;
    options.batch_size = 1 + fixture::draw(rng, 8);
    options.max_in_flight = 1 + fixture::draw(rng, 3);
    const auto expanded = unexpanded({"q1", "q"});
    const auto base = rerank(set, expanded, scorer, options);
    EXPECT_EQ(base.entries.size(), n);

    CandidateSet shuffled = set;
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t i = 0; i < n; ++i) {
      shuffled.passage_ids[i] = set.passage_ids[order[i]];
      shuffled.passage_texts[i] = set.passage_texts[order[i]];
    }
    EXPECT_EQ(rerank(shuffled, expanded, scorer, options), base);
    EXPECT_EQ(ids_of(rerank(set, expanded, transformed, options)), ids_of(base));
  }
}

TEST(LexicalOverlap, JaccardExample) {
  EXPECT_DOUBLE_EQ(lexical_overlap("a b", "b c d"), 0.25);
  EXPECT_DOUBLE_EQ(lexical_overlap("", ""), 0.0);
  EXPECT_DOUBLE_EQ(lexical_overlap("Cat", "cat cat"), 1.0);
  EXPECT_DOUBLE_EQ(lexical_overlap_scorer(unexpanded({"q", "a b"}), PassageRecord{"p", "b c d"}), 0.25);
}

TEST(LexicalOverlap, MatchesOracleJaccard) {
  std::mt19937_64 rng(29);
  for (int round = 0; round < 300; ++round) {
    const auto a = fixture::random_query(rng, 12, 8);
    const auto b = fixture::random_query(rng, 12, 8);
    EXPECT_DOUBLE_EQ(lexical_overlap(a, b), oracle::jaccard(tokenize(a).tokens, tokenize(b).tokens));
  }
}

TEST(ScoresFile, ParseAndFormat) {
  std::istringstream in("q1\tp1\t0.75\n\nq1\tp2\t1\n");
  const auto table = load_precomputed_scores(in);
  EXPECT_EQ(table.size(), 2u);
  std::ostringstream out;
  write_scores(out, table);
  EXPECT_EQ(out.str(), "q1\tp1\t0.750000\nq1\tp2\t1.000000\n");
}

TEST(ScoresFile, Rejections) {
  std::istringstream range("q1\tp1\t1.5\n");
  EXPECT_THROW(load_precomputed_scores(range), ValidationError);
  std::istringstream dup("q1\tp1\t0.5\nq1\tp1\t0.6\n");
  EXPECT_THROW(load_precomputed_scores(dup), DuplicateKeyError);
  std::istringstream fields("q1\tp1\n");
  EXPECT_THROW(load_precomputed_scores(fields), ParseError);
  std::istringstream junk("q1\tp1\thigh\n");
  EXPECT_THROW(load_precomputed_scores(junk), ParseError);
}

TEST(ScoresFile, RoundTripPreservesRankings) {
  std::mt19937_64 rng(37);
  ScoreTable table;
  for (int i = 0; i < 200; ++i) {
    table[{"q" + std::to_string(i % 7), "p" + std::to_string(i)}] = static_cast<double>(fixture::draw(rng, 1000001)) / 1e6;
  }
  std::ostringstream out;
  write_scores(out, table);
  std::istringstream in(out.str());
  EXPECT_EQ(load_precomputed_scores(in), table);
}

TEST(ConstantScorer, RangeChecked) {
  EXPECT_THROW(ConstantScorer(1.5), ConfigError);
  EXPECT_THROW(ConstantScorer(std::nan("")), ConfigError);
}

TEST(AttachTexts, FromStore) {
  PassageStore store;
  store.add({"p1", "one"});
  store.add({"p2", "two"});
  CandidateSet set;
  set.query_id = "q";
  set.passage_ids = {"p2", "p1"};
  attach_texts(set, store);
  EXPECT_EQ(set.passage_texts, (std::vector<std::string>{"two", "one"}));
  CandidateSet missing;
  missing.passage_ids = {"p3"};
  EXPECT_THROW(attach_texts(missing, store), MissingReferenceError);
}

TEST(TrainingPairs, Format) {
  std::ostringstream out;
  write_training_pairs(out, {{"q1", "p1", 1}, {"q1", "p7", 0}});
  EXPECT_EQ(out.str(), "q1\tp1\t1\nq1\tp7\t0\n");
}

}  // namespace
}  // namespace q2q
