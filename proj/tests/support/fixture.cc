#include "fixture.h"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

namespace q2q::fixture {

namespace fs = std::filesystem;

std::size_t draw(std::mt19937_64& rng, std::size_t n) {
  if (n <= 1) return 0;
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t v = rng();
  while (v >= limit) v = rng();
  return static_cast<std::size_t>(v % n);
}

std::string format_id(const char* pattern, std::size_t n) {
  char buf[64];
  std::snprintf(buf, sizeof buf, pattern, n);
  return buf;
}

namespace {

template <class T>
void shuffle(std::vector<T>& items, std::mt19937_64& rng) {
  for (std::size_t i = items.size(); i > 1; --i) std::swap(items[i - 1], items[draw(rng, i)]);
}

std::string numbered(const char* prefix, std::size_t n, int width) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s%0*zu", prefix, width, n);
  return buf;
}

const std::vector<std::string>& filler() {
  static const std::vector<std::string> words = {
      "the",   "river",  "market", "price",  "engine", "garden", "winter", "coffee", "history", "yellow",
      "paper", "window", "signal", "forest", "bridge", "silver", "ocean",  "planet", "letter",  "camera"};
  return words;
}

std::string filler_text(std::mt19937_64& rng, std::size_t words) {
  std::string out;
  for (std::size_t w = 0; w < words; ++w) {
    if (!out.empty()) out += ' ';
    out += filler()[draw(rng, filler().size())];
  }
  return out;
}

}  // namespace

World make_world(std::uint64_t seed, std::size_t query_count, std::size_t candidates_per_query) {
  std::mt19937_64 rng(seed);
  World world;

  std::vector<std::size_t> numbers(query_count * candidates_per_query);
  std::iota(numbers.begin(), numbers.end(), 1);
  shuffle(numbers, rng);

  std::vector<std::pair<std::string, std::string>> passages;
  std::size_t next = 0;
  for (std::size_t qi = 1; qi <= query_count; ++qi) {
    const std::string qid = numbered("q", qi, 2);
    const std::string keyword = numbered("topic", qi, 3);
    world.queries.add(QueryRecord{qid, "what about " + keyword + " " + filler_text(rng, 2)});

    CandidateSet set;
    set.query_id = qid;
    set.query_text = world.queries.at(qid).text;
    const std::size_t relevant = 1 + draw(rng, 4);
    for (std::size_t c = 0; c < candidates_per_query; ++c) {
      const std::string pid = numbered("p", numbers[next++], 5);
      std::string body = filler_text(rng, 4 + draw(rng, 8));
      if (c < relevant) {
        body = keyword + " " + body + " " + keyword;
        world.qrels.add(qid, pid, 1 + static_cast<int>(draw(rng, 2)));
      } else if (c < relevant + 3) {
        world.qrels.add(qid, pid, 0);
      }
      set.passage_ids.push_back(pid);
      set.passage_texts.push_back(body);
      passages.emplace_back(pid, body);
    }
    std::vector<std::size_t> order(set.passage_ids.size());
    std::iota(order.begin(), order.end(), 0);
    shuffle(order, rng);
    CandidateSet shuffled{set.query_id, {}, set.query_text, {}};
    for (auto i : order) {
      shuffled.passage_ids.push_back(set.passage_ids[i]);
      shuffled.passage_texts.push_back(set.passage_texts[i]);
    }
    world.candidates.push_back(std::move(shuffled));

    if (qi % 5 != 0) {
      auto& beams = world.expansions[qid];
      double ll = -0.25 * static_cast<double>(1 + draw(rng, 4));
      for (int r = 1; r <= 3; ++r) {
        beams.push_back(ParaphraseBeam{"tell me about " + keyword + " " + filler_text(rng, 1), ll, r});
        ll -= 0.5 + 0.25 * static_cast<double>(draw(rng, 3));
      }
    }
  }
  std::sort(passages.begin(), passages.end());
  for (auto& [id, body] : passages) world.collection.add(PassageRecord{id, body});
  return world;
}

void write_world(const World& world, const fs::path& dir) {
  fs::create_directories(dir);
  std::ostringstream q, c, r, t, e;
  write_queries(q, world.queries);
  write_collection(c, world.collection);
  write_qrels(r, world.qrels);
  write_top1000(t, world.candidates);
  write_expansions(e, world.expansions);
  write_text(dir / "queries.tsv", q.str());
  write_text(dir / "collection.tsv", c.str());
  write_text(dir / "qrels.txt", r.str());
  write_text(dir / "top1000.tsv", t.str());
  write_text(dir / "expansions.tsv", e.str());
}

Qrels random_qrels(std::mt19937_64& rng, std::size_t max_judgments, std::size_t queries, std::size_t passages,
                   int max_grade) {
  Qrels qrels;
  const std::size_t target = draw(rng, max_judgments + 1);
  std::set<std::pair<std::size_t, std::size_t>> used;
  for (std::size_t attempt = 0; used.size() < target && attempt < target * 4; ++attempt) {
    const std::size_t q = draw(rng, queries);
    const std::size_t p = draw(rng, passages);
    if (!used.emplace(q, p).second) continue;
    qrels.add(numbered("q", q, 3), numbered("p", p, 3), static_cast<int>(draw(rng, static_cast<std::size_t>(max_grade) + 1)));
  }
  return qrels;
}

PassageStore random_corpus(std::mt19937_64& rng, std::size_t passages, std::size_t vocabulary, std::size_t max_length) {
  PassageStore store;
  for (std::size_t i = 0; i < passages; ++i) {
    const std::size_t length = draw(rng, max_length + 1);
    std::string body;
    for (std::size_t w = 0; w < length; ++w) {
      if (!body.empty()) body += ' ';
      body += numbered("w", draw(rng, vocabulary), 0);
    }
    store.add(PassageRecord{numbered("d", i, 4), body});
  }
  return store;
}

std::string random_query(std::mt19937_64& rng, std::size_t vocabulary, std::size_t max_length) {
  const std::size_t length = 1 + draw(rng, max_length);
  std::string out;
  for (std::size_t w = 0; w < length; ++w) {
    if (!out.empty()) out += ' ';
    out += numbered("w", draw(rng, vocabulary + 2), 0);  // occasionally out of vocabulary
  }
  return out;
}

BucketScenario make_bucket_scenario(const std::map<Metric, std::array<std::size_t, 5>>& counts) {
  BucketScenario scenario;
  for (const auto& [metric, per_bucket] : counts) {
    std::size_t topic = 0;
    for (std::size_t b = 0; b < per_bucket.size(); ++b) {
      for (std::size_t i = 0; i < per_bucket[b]; ++i) {
        ++topic;
        const std::string id = numbered("t", topic, 2);
        const double shift = 0.004 * static_cast<double>(topic % 7);
        const double best = 0.80 + shift;
        const double median = 0.50 + shift;
        const double worst = 0.20 + shift;
        const double own[] = {best, (best + median) / 2, median, (median + worst) / 2, worst};
        scenario.stats.push_back(PerTopicStats{id, metric, best, median, worst});
        scenario.own[{id, metric}] = own[b];
      }
    }
  }
  return scenario;
}

TempDir::TempDir() {
  static std::atomic<unsigned> counter{0};
  std::random_device rd;
  path_ = fs::temp_directory_path() / ("q2q-test-" + std::to_string(rd()) + "-" + std::to_string(counter++));
  fs::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_text(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << content;
}

}  // namespace q2q::fixture
