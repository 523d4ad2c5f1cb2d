#include <gtest/gtest.h>

#include <atomic>
#include <mutex>
#include <random>
#include <sstream>
#include <thread>

#include "fixture.h"
#include "q2q/error.h"
#include "q2q/expansion.h"
#include "q2q/tokenizer.h"

namespace q2q {
namespace {

std::vector<ParaphraseBeam> beams(std::initializer_list<const char*> texts) {
  std::vector<ParaphraseBeam> out;
  int rank = 1;
  double ll = -0.5;
  for (const char* t : texts) {
    out.push_back(ParaphraseBeam{t, ll, rank++});
    ll -= 0.25;
  }
  return out;
}

TEST(Assemble, ThreeBeamsAppended) {
  const auto b = beams({"what is the cost of the new tesla", "how much money do you save purchasing a tesla",
                        "how much do you have to pay for a tesla"});
  const auto e = assemble(QueryRecord{"q1", "average tesla cost"}, b, 3);
  EXPECT_EQ(e.assembled_text,
            "average tesla cost what is the cost of the new tesla how much money do you save purchasing a tesla how much "
            "do you have to pay for a tesla");
  EXPECT_EQ(e.beams_used.size(), 3u);
  EXPECT_EQ(e.original_text, "average tesla cost");
  EXPECT_EQ(e.query_id, "q1");
}

TEST(Assemble, ZeroBeamsIsIdentity) {
  const auto e = assemble(QueryRecord{"q1", "some query"}, beams({"x", "y"}), 0);
  EXPECT_EQ(e.assembled_text, "some query");
  EXPECT_TRUE(e.beams_used.empty());
  EXPECT_EQ(e, unexpanded(QueryRecord{"q1", "some query"}));
}

TEST(Assemble, KLargerThanAvailable) {
  const auto e = assemble(QueryRecord{"q1", "q"}, beams({"a", "b", "c"}), 5);
  EXPECT_EQ(e.beams_used.size(), 3u);
  EXPECT_EQ(e.assembled_text, "q a b c");
}

TEST(Assemble, UnsortedBeamsRejected) {
  auto b = beams({"a", "b"});
  std::swap(b[0], b[1]);
  EXPECT_THROW(assemble(QueryRecord{"q1", "q"}, b, 2), ContractViolation);
}

TEST(Assemble, LengthAdditiveUnderTokenizer) {
  std::mt19937_64 rng(13);
  const std::string words[] = {"alpha", "Beta", "e-mail", "2019", "caf\xc3\xa9", "why?", "x"};
  const auto phrase = [&](std::size_t max) {
    std::string s = words[fixture::draw(rng, std::size(words))];
    const std::size_t n = fixture::draw(rng, max);
    for (std::size_t i = 0; i < n; ++i) s += " " + words[fixture::draw(rng, std::size(words))];
    return s;
  };
  for (int round = 0; round < 300; ++round) {
    const QueryRecord original{"q", phrase(5)};
    std::vector<ParaphraseBeam> b;
    for (int r = 1; r <= 4; ++r) b.push_back(ParaphraseBeam{phrase(6), -0.1 * r, r});
    const std::size_t k = fixture::draw(rng, 6);
    const auto e = assemble(original, b, k);
    std::size_t expected = tokenize(original.text).size();
    for (const auto& used : e.beams_used) expected += tokenize(used.text).size();
    EXPECT_EQ(tokenize(e.assembled_text).size(), expected);
    EXPECT_EQ(e.assembled_text.rfind(original.text, 0), 0u);
    EXPECT_EQ(e.beams_used.size(), std::min<std::size_t>(k, b.size()));
  }
}

TEST(FilterBeams, DedupKeepsFirstOfRepeatedText) {
  const auto b = beams({"what is not a waste product of cellular respiration", "what is the process of photosynthesis",
                        "what is not a waste product of cellular respiration"});
  const auto kept = filter_beams(b, filter::DedupExact{});
  ASSERT_EQ(kept.size(), 2u);
  EXPECT_EQ(kept[0].beam_rank, 1);
  EXPECT_EQ(kept[1].beam_rank, 2);
}

TEST(FilterBeams, NoneIsIdentity) {
  const auto b = beams({"a", "a", "b"});
  EXPECT_EQ(filter_beams(b, filter::None{}), b);
}

TEST(FilterBeams, LexicalOverlapBoundary) {
  const auto b = beams({"completely different words", "unrelated text"});
  EXPECT_TRUE(filter_beams(b, filter::LexicalOverlap{1.0}, "original query").empty());
  EXPECT_EQ(filter_beams(b, filter::LexicalOverlap{0.0}, "original query").size(), 2u);
  const auto same = beams({"Original query?", "query original extra"});
  const auto kept = filter_beams(same, filter::LexicalOverlap{1.0}, "original query");
  ASSERT_EQ(kept.size(), 1u);
  EXPECT_EQ(kept[0].beam_rank, 1);
}

TEST(FilterBeams, MinLogLikelihood) {
  const auto b = beams({"a", "b", "c"});  // -0.5, -0.75, -1.0
  EXPECT_EQ(filter_beams(b, filter::MinLogLikelihood{-0.75}).size(), 2u);
}

TEST(FilterBeams, InvalidThresholds) {
  const auto b = beams({"a"});
  EXPECT_THROW(filter_beams(b, filter::LexicalOverlap{1.5}, "a"), ConfigError);
  EXPECT_THROW(filter_beams(b, filter::LexicalOverlap{-0.1}, "a"), ConfigError);
  EXPECT_THROW(parse_filter_policy("lexical-overlap:2"), ConfigError);
  EXPECT_THROW(parse_filter_policy("lexical-overlap"), ConfigError);
  EXPECT_THROW(parse_filter_policy("min-log-likelihood:abc"), ConfigError);
  EXPECT_THROW(parse_filter_policy("shuffle"), ConfigError);
}

TEST(FilterBeams, ParseAndPrintRoundTrip) {
  for (const char* spec : {"none", "dedup-exact", "min-log-likelihood:-1.5", "lexical-overlap:0.25"}) {
    EXPECT_EQ(to_string(parse_filter_policy(spec)), spec);
  }
}

TEST(FilterBeams, IdempotentSubsequence) {
  std::mt19937_64 rng(17);
  const std::string texts[] = {"a b", "b c", "a b", "query words", "c", "words query"};
  const FilterPolicy policies[] = {filter::None{}, filter::DedupExact{}, filter::MinLogLikelihood{-1.0},
                                   filter::LexicalOverlap{0.3}};
  for (int round = 0; round < 200; ++round) {
    std::vector<ParaphraseBeam> b;
    double ll = 0.0;
    const std::size_t n = fixture::draw(rng, 7);
    for (std::size_t i = 0; i < n; ++i) {
      ll -= 0.1 * static_cast<double>(fixture::draw(rng, 6));
      b.push_back(ParaphraseBeam{texts[fixture::draw(rng, std::size(texts))], ll, static_cast<int>(i) + 1});
    }
    for (const auto& policy : policies) {
      const auto once = filter_beams(b, policy, "query a");
      EXPECT_EQ(filter_beams(once, policy, "query a"), once);
      std::size_t j = 0;
      for (const auto& beam : b) {
        if (j < once.size() && once[j] == beam) ++j;
      }
      EXPECT_EQ(j, once.size());
    }
  }
}

TEST(ValidateBeams, Rules) {
  EXPECT_NO_THROW(validate_beams("q", beams({"a", "b"})));
  EXPECT_NO_THROW(validate_beams("q", {}));
  EXPECT_THROW(validate_beams("q", std::vector<ParaphraseBeam>{{"a", 0.1, 1}}), ValidationError);
  EXPECT_THROW(validate_beams("q", std::vector<ParaphraseBeam>{{"a", -1.0, 1}, {"b", -0.5, 2}}), ValidationError);
  EXPECT_THROW(validate_beams("q", std::vector<ParaphraseBeam>{{"a", -1.0, 0}}), ValidationError);
  EXPECT_THROW(validate_beams("q", std::vector<ParaphraseBeam>{{"a", -1.0, 2}, {"b", -1.0, 2}}), ValidationError);
  EXPECT_NO_THROW(validate_beams("q", std::vector<ParaphraseBeam>{{"a", -1.0, 1}, {"b", -1.0, 2}}));
}

TEST(PrecomputedExpansions, GroupedAndSorted) {
  std::istringstream in("q1\t2\t-1.2\tsecond\nq1\t1\t-0.5\tfirst\nq2\t1\t-0.1\tother\n");
  const auto map = load_precomputed_expansions(in);
  ASSERT_EQ(map.size(), 2u);
  ASSERT_EQ(map.at("q1").size(), 2u);
  EXPECT_EQ(map.at("q1")[0], (ParaphraseBeam{"first", -0.5, 1}));
  EXPECT_EQ(map.at("q1")[1].text, "second");
}

TEST(PrecomputedExpansions, NonMonotoneRejected) {
  std::istringstream in("q1\t1\t-1.2\ta\nq1\t2\t-0.5\tb\n");
  EXPECT_THROW(load_precomputed_expansions(in), ValidationError);
}

TEST(PrecomputedExpansions, MalformedLines) {
  std::istringstream three("q1\t1\t-0.5\n");
  EXPECT_THROW(load_precomputed_expansions(three), ParseError);
  std::istringstream rank("q1\tone\t-0.5\ttext\n");
  EXPECT_THROW(load_precomputed_expansions(rank), ParseError);
  std::istringstream ll("q1\t1\tlow\ttext\n");
  EXPECT_THROW(load_precomputed_expansions(ll), ParseError);
}

TEST(PrecomputedExpansions, RoundTripProperty) {
  std::mt19937_64 rng(19);
  for (int round = 0; round < 50; ++round) {
    ExpansionMap map;
    const std::size_t queries = fixture::draw(rng, 8);
    for (std::size_t q = 0; q < queries; ++q) {
      auto& list = map["q" + std::to_string(q)];
      double ll = -static_cast<double>(rng() % 1000) / 997.0;
      const std::size_t n = 1 + fixture::draw(rng, 5);
      for (std::size_t i = 0; i < n; ++i) {
        list.push_back(ParaphraseBeam{"text with\ttab " + std::to_string(rng() % 100), ll, static_cast<int>(i) + 1});
        ll -= static_cast<double>(rng() % 1000) / 3.0e3;
      }
    }
    std::ostringstream out;
    write_expansions(out, map);
    std::istringstream in(out.str());
    EXPECT_EQ(load_precomputed_expansions(in), map);
  }
}

class ScriptedService : public ParaphraseService {
 public:
  using Handler = std::function<std::vector<Item>(std::span<const QueryRecord>, int)>;
  explicit ScriptedService(Handler handler) : handler_(std::move(handler)) {}

  std::vector<Item> paraphrase(std::span<const QueryRecord> queries, int num_beams) override {
    ++calls;
    {
      std::lock_guard lock(mu_);
      batch_sizes.push_back(queries.size());
    }
    return handler_(queries, num_beams);
  }

  std::atomic<int> calls{0};
  std::vector<std::size_t> batch_sizes;

 private:
  Handler handler_;
  std::mutex mu_;
};

std::vector<ParaphraseService::Item> three_beams(std::span<const QueryRecord> queries, int num_beams) {
  std::vector<ParaphraseService::Item> items;
  for (const auto& q : queries) {
    ParaphraseService::Item item{q.id, {}, std::nullopt};
    for (int r = 1; r <= num_beams; ++r) item.beams.push_back(ParaphraseBeam{q.text + " v" + std::to_string(r), -0.3 * r, r});
    items.push_back(std::move(item));
  }
  return items;
}

std::vector<QueryRecord> some_queries(std::size_t n) {
  std::vector<QueryRecord> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(QueryRecord{"q" + std::to_string(i), "query " + std::to_string(i)});
  return out;
}

TEST(FetchExpansions, PassThrough) {
  ScriptedService service(three_beams);
  const auto queries = some_queries(5);
  const auto result = fetch_expansions(queries, service, FetchOptions{3, 2, 1});
  EXPECT_EQ(result.expansions.size(), 5u);
  for (const auto& [id, list] : result.expansions) EXPECT_EQ(list.size(), 3u);
  EXPECT_TRUE(result.warnings.empty());
  EXPECT_EQ(service.batch_sizes, (std::vector<std::size_t>{2, 2, 1}));
}

TEST(FetchExpansions, OutOfOrderLikelihoodIsProtocolError) {
  ScriptedService service([](std::span<const QueryRecord> queries, int) {
    std::vector<ParaphraseService::Item> items;
    for (const auto& q : queries) items.push_back({q.id, {{"a", -2.0, 1}, {"b", -1.0, 2}}, std::nullopt});
    return items;
  });
  const auto queries = some_queries(1);
  EXPECT_THROW(fetch_expansions(queries, service), ProtocolError);
}

TEST(FetchExpansions, NoQueriesNoRequests) {
  ScriptedService service(three_beams);
  const auto result = fetch_expansions({}, service);
  EXPECT_TRUE(result.expansions.empty());
  EXPECT_EQ(service.calls.load(), 0);
}

TEST(FetchExpansions, PerItemFailureDegradesWithWarning) {
  ScriptedService service([](std::span<const QueryRecord> queries, int n) {
    auto items = three_beams(queries, n);
    for (auto& item : items) {
      if (item.id == "q1") {
        item.beams.clear();
        item.error = "model refused";
      }
    }
    return items;
  });
  const auto queries = some_queries(3);
  const auto result = fetch_expansions(queries, service);
  EXPECT_EQ(result.expansions.size(), 2u);
  EXPECT_FALSE(result.expansions.count("q1"));
  ASSERT_EQ(result.warnings.size(), 1u);
  EXPECT_NE(result.warnings[0].find("model refused"), std::string::npos);
}

TEST(FetchExpansions, TooManyBeamsOrWrongIds) {
  ScriptedService extra([](std::span<const QueryRecord> queries, int n) { return three_beams(queries, n + 1); });
  const auto queries = some_queries(2);
  EXPECT_THROW(fetch_expansions(queries, extra, FetchOptions{2, 8, 1}), ProtocolError);

  ScriptedService renamed([](std::span<const QueryRecord> queries, int n) {
    auto items = three_beams(queries, n);
    items[0].id = "other";
    return items;
  });
  EXPECT_THROW(fetch_expansions(queries, renamed), ProtocolError);

  ScriptedService short_reply([](std::span<const QueryRecord> queries, int n) {
    auto items = three_beams(queries, n);
    items.pop_back();
    return items;
  });
  EXPECT_THROW(fetch_expansions(queries, short_reply), ProtocolError);
}

TEST(FetchExpansions, BoundedParallelismIsOrderIndependent) {
  ScriptedService service([](std::span<const QueryRecord> queries, int n) {
    std::this_thread::sleep_for(std::chrono::milliseconds(queries.front().id == "q0" ? 20 : 0));
    return three_beams(queries, n);
  });
  const auto queries = some_queries(17);
  const auto serial = fetch_expansions(queries, service, FetchOptions{3, 3, 1});
  const auto parallel = fetch_expansions(queries, service, FetchOptions{3, 3, 4});
  EXPECT_EQ(serial.expansions, parallel.expansions);
}

TEST(FetchExpansions, InvalidOptions) {
  ScriptedService service(three_beams);
  const auto queries = some_queries(1);
  EXPECT_THROW(fetch_expansions(queries, service, FetchOptions{0, 1, 1}), ConfigError);
  EXPECT_THROW(fetch_expansions(queries, service, FetchOptions{1, 0, 1}), ConfigError);
}

TEST(ExpandQueries, MissingExpansionsDegrade) {
  QueryStore queries;
  queries.add({"q1", "first"});
  queries.add({"q2", "second"});
  ExpansionMap map;
  map["q1"] = beams({"one", "one", "uno"});
  std::vector<std::string> warnings;
  const auto out = expand_queries(queries, map, ExpansionOptions{3, filter::DedupExact{}}, &warnings);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0].assembled_text, "first one uno");
  EXPECT_EQ(out[1], unexpanded(QueryRecord{"q2", "second"}));
  EXPECT_EQ(warnings.size(), 1u);
}

TEST(ExpandQueries, OfflineAndOnlinePathsAgree) {
  ScriptedService service(three_beams);
  const auto records = some_queries(6);
  QueryStore queries;
  for (const auto& q : records) queries.add(q);
  const auto online = fetch_expansions(records, service);
  std::ostringstream saved;
  write_expansions(saved, online.expansions);
  std::istringstream reloaded(saved.str());
  const auto offline = load_precomputed_expansions(reloaded);
  EXPECT_EQ(expand_queries(queries, online.expansions, {}), expand_queries(queries, offline, {}));
}

}  // namespace
}  // namespace q2q
