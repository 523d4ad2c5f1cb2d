#include "cli/app.h"

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <thread>

#include "cli/config.h"
#include "q2q/bm25.h"
#include "q2q/corpus_io.h"
#include "q2q/eval.h"
#include "q2q/expansion.h"
#include "q2q/pair_miner.h"
#include "q2q/reranker.h"
#include "q2q/service_client.h"
#include "q2q/text.h"
#include "q2q/version.h"

namespace q2q::cli {

namespace {

namespace fs = std::filesystem;

struct PipelineConfig {
  // inputs
  std::string collection;
  std::string queries;
  std::string qrels;
  std::string top1000;
  std::string candidates;  // run file used as the candidate source
  std::string index;
  std::string expansions;
  std::string stats;
  std::string stopwords;
  std::string vocab;
  std::string run;
  // outputs
  std::string out;
  std::string expansions_out;
  std::string scores_out;
  std::string training_pairs_out;

  // pair mining
  int min_grade = 1;
  std::string ordering = "both-directions";

  // bm25
  double k1 = 0.9;
  double b = 0.4;
  std::size_t topk = 1000;
  bool stem = false;
  bool query_tf = false;

  // expansion
  std::string service;
  int num_beams = static_cast<int>(kDefaultAppendedBeams);
  std::string filter = "none";
  bool no_expansion = false;
  std::size_t batch_size = 32;
  std::size_t max_in_flight = 1;

  // reranking
  std::string scorer = "lexical";
  std::size_t max_query_tokens = 64;
  std::size_t total_budget = 512;
  std::size_t negatives_per_positive = 1;
  std::string negatives_from = "candidates";
  std::uint64_t seed = 0;
  int retries = 3;

  // eval
  std::string metric = "all";
  std::string ndcg_gain = "exponential";
  std::size_t ndcg_cutoff = 0;  // 0: none
  int binarize_threshold = 1;
  double epsilon = kDefaultBucketEpsilon;

  std::string tag = "q2q";
  unsigned threads = std::max(1u, std::thread::hardware_concurrency());
  std::string config;
};

class Log {
 public:
  explicit Log(std::ostream& err) : err_(err) {}
  void warn(const std::string& message) const { err_ << "warning: " << message << '\n'; }
  void info(const std::string& message) const { err_ << message << '\n'; }

 private:
  std::ostream& err_;
};

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NotFoundError("cannot open '" + path + "'");
  return in;
}

void write_file(const std::string& path, const std::string& content) {
  const fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  out << content;
  if (!out) throw Error("failed writing '" + path + "'");
}

template <class Fn>
void write_file_with(const std::string& path, Fn&& fn) {
  std::ostringstream buf;
  fn(buf);
  write_file(path, buf.str());
}

QueryStore load_queries(const std::string& path) {
  auto in = open_input(path);
  return parse_queries(in, path);
}

PassageStore load_collection(const std::string& path) {
  auto in = open_input(path);
  return parse_collection(in, path);
}

Qrels load_qrels(const std::string& path) {
  auto in = open_input(path);
  return parse_qrels(in, path);
}

std::vector<Ranking> load_run(const std::string& path) {
  auto in = open_input(path);
  return rankings_from_run(parse_run_file(in, path));
}

RetryPolicy retry_policy(const PipelineConfig& cfg) {
  RetryPolicy policy;
  policy.max_attempts = cfg.retries;
  return policy;
}

// Runs fn(i) for i in [0, n) on up to `threads` workers. If several calls
// throw, the exception of the lowest index is rethrown.
template <class Fn>
void parallel_for(std::size_t n, unsigned threads, Fn&& fn) {
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const unsigned count = static_cast<unsigned>(std::min<std::size_t>(std::max(1u, threads), std::max<std::size_t>(n, 1)));
  if (count <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < count; ++t) pool.emplace_back(worker);
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

MetricConfig metric_config(const PipelineConfig& cfg) {
  MetricConfig config;
  config.binarize_threshold = cfg.binarize_threshold;
  if (cfg.ndcg_gain == "exponential") {
    config.ndcg_gain = GainKind::kExponential;
  } else if (cfg.ndcg_gain == "linear") {
    config.ndcg_gain = GainKind::kLinear;
  } else {
    throw ConfigError("--ndcg-gain must be 'exponential' or 'linear'");
  }
  if (cfg.ndcg_cutoff > 0) config.ndcg_cutoff = cfg.ndcg_cutoff;
  config.validate();
  return config;
}

std::vector<Metric> selected_metrics(const PipelineConfig& cfg) {
  if (cfg.metric == "all") return {kAllMetrics.begin(), kAllMetrics.end()};
  return {parse_metric(cfg.metric)};
}

// ---------------------------------------------------------------------------
// Stages

void mine_pairs_stage(const PipelineConfig& cfg, std::ostream& out) {
  if (cfg.out.empty()) throw ConfigError("mine-pairs needs --out");
  PairOrdering ordering;
  if (cfg.ordering == "both-directions") {
    ordering = PairOrdering::kBothDirections;
  } else if (cfg.ordering == "unordered") {
    ordering = PairOrdering::kUnordered;
  } else {
    throw ConfigError("--ordering must be 'both-directions' or 'unordered'");
  }
  const Qrels qrels = load_qrels(cfg.qrels);
  const auto groups = group_by_passage(qrels, cfg.min_grade);
  const auto report = mining_report(groups);
  const auto pairs = mine_pairs(groups, ordering);

  const fs::path dir(cfg.out);
  write_file_with((dir / "report.tsv").string(), [&](std::ostream& o) { write_mining_report(o, report); });
  write_file_with((dir / "pairs.tsv").string(), [&](std::ostream& o) { write_pairs(o, pairs); });
  if (!cfg.queries.empty()) {
    const QueryStore queries = load_queries(cfg.queries);
    std::ostringstream source;
    std::ostringstream target;
    export_seq2seq(pairs, queries, source, target);
    write_file((dir / "source.txt").string(), source.str());
    write_file((dir / "target.txt").string(), target.str());
  }

  out << "passages\tqueries_matched\n";
  for (const auto& [k, count] : collapse_histogram(report.histogram)) {
    out << count << '\t' << (k >= 10 ? ">=10" : std::to_string(k)) << '\n';
  }
  out << "total_judgments\t" << report.total_judgments << '\n';
  out << "pair_occurrences\t" << report.pair_occurrences << '\n';
  out << "unique_unordered_pairs\t" << report.unique_unordered_pairs << '\n';
  out << "multi_query_fraction\t" << text::format_score(report.multi_query_fraction) << '\n';
  out << "exported_pairs\t" << pairs.size() << '\n';
}

AnalyzerOptions analyzer_options(const PipelineConfig& cfg) {
  AnalyzerOptions options;
  options.stem = cfg.stem;
  if (!cfg.stopwords.empty()) {
    auto in = open_input(cfg.stopwords);
    options.stopwords = load_stopwords(in);
  }
  return options;
}

void build_index_stage(const PipelineConfig& cfg, std::ostream& out) {
  if (cfg.index.empty()) throw ConfigError("build-index needs --index");
  const PassageStore passages = load_collection(cfg.collection);
  IndexBuildOptions options;
  options.analyzer = analyzer_options(cfg);
  options.threads = cfg.threads;
  const InvertedIndex index = build_index(passages, options);
  std::ostringstream buf(std::ios::binary);
  save_index(buf, index);
  write_file(cfg.index, buf.str());
  out << "passages\t" << index.passage_count() << '\n';
  out << "terms\t" << index.term_count() << '\n';
  out << "avgdl\t" << text::format_score(index.avgdl()) << '\n';
}

Bm25Params bm25_params(const PipelineConfig& cfg) {
  Bm25Params params;
  params.k1 = cfg.k1;
  params.b = cfg.b;
  params.query_tf_weighting = cfg.query_tf;
  params.validate();
  return params;
}

void retrieve_stage(const PipelineConfig& cfg, std::ostream& out) {
  if (cfg.run.empty()) throw ConfigError("retrieve needs --run");
  const InvertedIndex index = load_index(cfg.index);
  const QueryStore queries = load_queries(cfg.queries);
  const Bm25Params params = bm25_params(cfg);
  std::vector<Ranking> rankings(queries.size());
  parallel_for(queries.size(), cfg.threads, [&](std::size_t i) {
    const auto& q = queries.records()[i];
    rankings[i] = score_topk(index, q.id, q.text, cfg.topk, params);
  });
  write_file_with(cfg.run, [&](std::ostream& o) { write_run_file(o, rankings, cfg.tag); });
  std::size_t total = 0;
  for (const auto& r : rankings) total += r.entries.size();
  out << "queries\t" << rankings.size() << '\n' << "retrieved\t" << total << '\n';
}

// Expanded query per input query, in query-file order.
std::vector<ExpandedQuery> expansion_stage(const PipelineConfig& cfg, const QueryStore& queries, const Log& log) {
  if (cfg.no_expansion) {
    std::vector<ExpandedQuery> out;
    for (const auto& q : queries) out.push_back(unexpanded(q));
    return out;
  }
  if (cfg.num_beams < 0) throw ConfigError("--num-beams must be >= 0");
  ExpansionOptions options;
  options.k = static_cast<std::size_t>(cfg.num_beams);
  options.filter = parse_filter_policy(cfg.filter);

  ExpansionMap expansions;
  if (!cfg.service.empty()) {
    if (cfg.num_beams < 1) throw ConfigError("--num-beams must be >= 1 when fetching from a service");
    HttpParaphraseClient client(cfg.service, retry_policy(cfg));
    FetchOptions fetch;
    fetch.num_beams = cfg.num_beams;
    fetch.batch_size = cfg.batch_size;
    fetch.max_in_flight = cfg.max_in_flight;
    auto result = fetch_expansions(queries.records(), client, fetch);
    for (const auto& w : result.warnings) log.warn(w);
    expansions = std::move(result.expansions);
    if (!cfg.expansions_out.empty()) {
      write_file_with(cfg.expansions_out, [&](std::ostream& o) { write_expansions(o, expansions); });
    }
  } else if (!cfg.expansions.empty()) {
    auto in = open_input(cfg.expansions);
    expansions = load_precomputed_expansions(in, cfg.expansions);
  } else {
    throw ConfigError("expansion needs --expansions, --service, or --no-expansion");
  }

  std::vector<std::string> warnings;
  auto expanded = expand_queries(queries, expansions, options, &warnings);
  for (const auto& w : warnings) log.warn(w);
  return expanded;
}

QueryStore expanded_store(const std::vector<ExpandedQuery>& expanded) {
  QueryStore store;
  for (const auto& e : expanded) store.add(QueryRecord{e.query_id, e.assembled_text});
  return store;
}

void expand_stage(const PipelineConfig& cfg, std::ostream& out, const Log& log, const std::string& out_path) {
  if (out_path.empty()) throw ConfigError("expand needs --out");
  const QueryStore queries = load_queries(cfg.queries);
  const auto expanded = expansion_stage(cfg, queries, log);
  write_file_with(out_path, [&](std::ostream& o) { write_queries(o, expanded_store(expanded)); });
  std::size_t with_beams = 0;
  for (const auto& e : expanded) with_beams += e.beams_used.empty() ? 0 : 1;
  out << "queries\t" << expanded.size() << '\n' << "expanded\t" << with_beams << '\n';
}

std::unique_ptr<RelevanceScorer> make_scorer(const PipelineConfig& cfg, const Qrels* qrels) {
  const std::string& spec = cfg.scorer;
  if (spec == "lexical") return std::make_unique<LexicalScorer>();
  if (spec == "oracle") {
    if (qrels == nullptr) throw ConfigError("--scorer oracle needs --qrels");
    return std::make_unique<OracleScorer>(*qrels, cfg.binarize_threshold);
  }
  if (spec == "constant") return std::make_unique<ConstantScorer>(0.5);
  if (spec.rfind("constant:", 0) == 0) {
    auto v = text::parse_double(spec.substr(9));
    if (!v) throw ConfigError("invalid constant score in '" + spec + "'");
    return std::make_unique<ConstantScorer>(*v);
  }
  if (spec.rfind("file:", 0) == 0) {
    const std::string path = spec.substr(5);
    auto in = open_input(path);
    return std::make_unique<PrecomputedScorer>(load_precomputed_scores(in, path));
  }
  if (spec.rfind("remote:", 0) == 0) {
    return std::make_unique<RemoteScorer>(spec.substr(7), retry_policy(cfg), cfg.batch_size);
  }
  throw ConfigError("unknown scorer '" + spec + "' (expected lexical, oracle, constant[:v], file:<path>, remote:<url>)");
}

std::vector<CandidateSet> load_candidates(const PipelineConfig& cfg, const PassageStore* collection) {
  std::vector<CandidateSet> sets;
  if (!cfg.top1000.empty()) {
    auto in = open_input(cfg.top1000);
    sets = parse_top1000(in, cfg.top1000);
  } else if (!cfg.candidates.empty()) {
    if (collection == nullptr) throw ConfigError("--candidates needs --collection for passage texts");
    for (const auto& ranking : load_run(cfg.candidates)) {
      CandidateSet set;
      set.query_id = ranking.query_id;
      const std::size_t keep = std::min(ranking.entries.size(), kMaxCandidatesPerQuery);
      for (std::size_t i = 0; i < keep; ++i) set.passage_ids.push_back(ranking.entries[i].passage_id);
      sets.push_back(std::move(set));
    }
  } else {
    throw ConfigError("reranking needs --top1000 or --candidates");
  }
  if (collection != nullptr) {
    for (auto& set : sets) attach_texts(set, *collection);
  }
  return sets;
}

void rerank_stage(const PipelineConfig& cfg, std::ostream& out, const Log& log, const QueryStore& queries,
                  const std::vector<ExpandedQuery>& expanded) {
  if (cfg.run.empty() && cfg.training_pairs_out.empty()) throw ConfigError("rerank needs --run and/or --export-training-pairs");
  std::optional<PassageStore> collection;
  if (!cfg.collection.empty()) collection = load_collection(cfg.collection);
  std::optional<Qrels> qrels;
  if (!cfg.qrels.empty()) qrels = load_qrels(cfg.qrels);
  const auto candidates = load_candidates(cfg, collection ? &*collection : nullptr);

  if (!cfg.training_pairs_out.empty()) {
    if (!qrels) throw ConfigError("--export-training-pairs needs --qrels");
    SamplingOptions sampling;
    sampling.negatives_per_positive = cfg.negatives_per_positive;
    sampling.seed = cfg.seed;
    sampling.min_grade = cfg.binarize_threshold;
    std::vector<std::string> collection_ids;
    if (cfg.negatives_from == "collection") {
      if (!collection) throw ConfigError("--negatives-from collection needs --collection");
      sampling.source = NegativeSource::kCollection;
      for (const auto& p : *collection) collection_ids.push_back(p.id);
    } else if (cfg.negatives_from != "candidates") {
      throw ConfigError("--negatives-from must be 'candidates' or 'collection'");
    }
    const auto sampled = sample_training_pairs(*qrels, candidates, sampling, collection_ids);
    for (const auto& w : sampled.warnings) log.warn(w);
    write_file_with(cfg.training_pairs_out, [&](std::ostream& o) { write_training_pairs(o, sampled.pairs); });
    out << "training_pairs\t" << sampled.pairs.size() << '\n';
  }
  if (cfg.run.empty()) return;

  std::unordered_map<std::string, const ExpandedQuery*> by_id;
  for (const auto& e : expanded) by_id.emplace(e.query_id, &e);
  std::vector<ExpandedQuery> fallback(candidates.size());
  std::vector<const ExpandedQuery*> per_set(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    auto it = by_id.find(candidates[i].query_id);
    if (it != by_id.end()) {
      per_set[i] = it->second;
    } else if (candidates[i].query_text) {
      fallback[i] = unexpanded(QueryRecord{candidates[i].query_id, *candidates[i].query_text});
      per_set[i] = &fallback[i];
    } else {
      throw MissingReferenceError("no query text for candidate query '" + candidates[i].query_id + "'");
    }
  }
  (void)queries;

  std::unique_ptr<WordPieceTokenizer> wordpiece;
  if (!cfg.vocab.empty()) {
    auto in = open_input(cfg.vocab);
    wordpiece = std::make_unique<WordPieceTokenizer>(WordPieceTokenizer::from_vocab(in, cfg.vocab));
  }
  RerankOptions options;
  options.truncation.max_query_tokens = cfg.max_query_tokens;
  options.truncation.total_budget = cfg.total_budget;
  options.tokenizer = wordpiece.get();
  options.batch_size = cfg.batch_size;
  options.max_in_flight = cfg.max_in_flight;
  options.truncation.validate();

  const auto scorer = make_scorer(cfg, qrels ? &*qrels : nullptr);
  std::vector<Ranking> rankings(candidates.size());
  parallel_for(candidates.size(), cfg.threads,
               [&](std::size_t i) { rankings[i] = rerank(candidates[i], *per_set[i], *scorer, options); });

  write_file_with(cfg.run, [&](std::ostream& o) { write_run_file(o, rankings, cfg.tag); });
  if (!cfg.scores_out.empty()) {
    ScoreTable table;
    for (const auto& r : rankings) {
      for (const auto& e : r.entries) table[{r.query_id, e.passage_id}] = e.score;
    }
    write_file_with(cfg.scores_out, [&](std::ostream& o) { write_scores(o, table); });
  }
  out << "reranked_queries\t" << rankings.size() << '\n' << "scorer\t" << scorer->name() << '\n';
}

void evaluate_stage(const PipelineConfig& cfg, std::ostream& out, const std::string& run_path, const std::string& out_path) {
  const auto rankings = load_run(run_path);
  const Qrels qrels = load_qrels(cfg.qrels);
  const TopicScores scores = evaluate_run(rankings, qrels, selected_metrics(cfg), metric_config(cfg));
  if (!out_path.empty()) write_file_with(out_path, [&](std::ostream& o) { write_topic_scores(o, scores); });
  for (const auto& [metric, mean] : scores.means) {
    std::size_t included = 0;
    for (const auto& [topic, v] : scores.per_topic.at(metric)) included += v ? 1 : 0;
    out << metric_name(metric) << '\t' << text::format_score(mean) << '\t' << included << " topics\n";
  }
}

void compare_stage(const PipelineConfig& cfg, std::ostream& out, const std::string& run_path, const std::string& out_path) {
  const auto rankings = load_run(run_path);
  const Qrels qrels = load_qrels(cfg.qrels);
  std::vector<PerTopicStats> stats;
  {
    auto in = open_input(cfg.stats);
    stats = parse_committee_stats(in, cfg.stats);
  }
  const TopicScores scores = evaluate_run(rankings, qrels, selected_metrics(cfg), metric_config(cfg));
  std::map<std::pair<std::string, Metric>, double> own;
  for (const auto& [metric, column] : scores.per_topic) {
    for (const auto& [topic, value] : column) {
      if (value) own[{topic, metric}] = *value;
    }
  }
  const auto report = classify_buckets(own, stats, cfg.epsilon);
  std::ostringstream table;
  write_bucket_report(table, report);
  for (const auto& [metric, f] : summarize_fractions(report)) {
    table << "fraction_including_median\t" << metric_name(metric) << '\t' << text::format_score(f.including_median) << '\n';
    table << "fraction_above_median\t" << metric_name(metric) << '\t' << text::format_score(f.above_median) << '\n';
  }
  if (!out_path.empty()) write_file(out_path, table.str());
  out << table.str();
}

void pipeline_stage(const PipelineConfig& cfg, std::ostream& out, const Log& log) {
  if (cfg.out.empty()) throw ConfigError("pipeline needs --out");
  const fs::path dir(cfg.out);
  const std::string expanded_path = (dir / "expanded_queries.tsv").string();
  const std::string run_path = (dir / "run.txt").string();

  PipelineConfig expand_cfg = cfg;
  if (!cfg.service.empty() && cfg.expansions_out.empty()) expand_cfg.expansions_out = (dir / "expansions.tsv").string();
  expand_stage(expand_cfg, out, log, expanded_path);

  PipelineConfig rerank_cfg = cfg;
  rerank_cfg.run = run_path;
  rerank_cfg.no_expansion = true;
  const QueryStore expanded_queries = load_queries(expanded_path);
  std::vector<ExpandedQuery> expanded;
  for (const auto& q : expanded_queries) expanded.push_back(unexpanded(q));
  rerank_stage(rerank_cfg, out, log, expanded_queries, expanded);

  if (!cfg.qrels.empty()) {
    evaluate_stage(cfg, out, run_path, (dir / "per_topic.tsv").string());
    if (!cfg.stats.empty()) compare_stage(cfg, out, run_path, (dir / "bucket_report.tsv").string());
  }
}

// ---------------------------------------------------------------------------
// Command line wiring

void add_config_option(CLI::App* sub, PipelineConfig& cfg) {
  sub->add_option("--config", cfg.config, "Flat key=value file; command-line flags take precedence")
      ->check(CLI::ExistingFile);
  sub->add_option("--threads", cfg.threads, "Worker threads")->check(CLI::PositiveNumber);
}

void add_eval_options(CLI::App* sub, PipelineConfig& cfg) {
  sub->add_option("--metric", cfg.metric, "map, ndcg, p10 or all")->check(CLI::IsMember({"map", "ndcg", "p10", "all"}));
  sub->add_option("--ndcg-gain", cfg.ndcg_gain, "exponential or linear")->check(CLI::IsMember({"exponential", "linear"}));
  sub->add_option("--ndcg-cutoff", cfg.ndcg_cutoff, "nDCG depth; 0 evaluates the whole list");
  sub->add_option("--binarize-threshold", cfg.binarize_threshold, "Minimum grade counted as relevant")
      ->check(CLI::PositiveNumber);
}

void add_expansion_options(CLI::App* sub, PipelineConfig& cfg) {
  sub->add_option("--expansions", cfg.expansions, "Precomputed paraphrase TSV")->check(CLI::ExistingFile);
  sub->add_option("--service", cfg.service, "Paraphrase service base URL (http://host:port)");
  sub->add_option("--expansions-out", cfg.expansions_out, "Where to save beams fetched from the service");
  sub->add_option("--num-beams", cfg.num_beams, "Paraphrases appended per query");
  sub->add_option("--filter", cfg.filter,
                  "none | dedup-exact | min-log-likelihood:<theta> | lexical-overlap:<tau>");
  sub->add_flag("--no-expansion", cfg.no_expansion, "Use the original queries");
  sub->add_option("--batch-size", cfg.batch_size, "Items per service request")->check(CLI::PositiveNumber);
  sub->add_option("--max-in-flight", cfg.max_in_flight, "Concurrent service requests")->check(CLI::PositiveNumber);
  sub->add_option("--retries", cfg.retries, "Attempts per service request")->check(CLI::PositiveNumber);
}

void add_rerank_options(CLI::App* sub, PipelineConfig& cfg) {
  sub->add_option("--top1000", cfg.top1000, "Candidate TSV: qid, pid, query, passage")->check(CLI::ExistingFile);
  sub->add_option("--candidates", cfg.candidates, "Run file used as the candidate source")->check(CLI::ExistingFile);
  sub->add_option("--collection", cfg.collection, "Passage collection TSV")->check(CLI::ExistingFile);
  sub->add_option("--scorer", cfg.scorer, "lexical | oracle | constant[:v] | file:<path> | remote:<url>");
  sub->add_option("--max-query-tokens", cfg.max_query_tokens, "Query token limit")->check(CLI::PositiveNumber);
  sub->add_option("--total-budget", cfg.total_budget, "Query + passage + special token limit")->check(CLI::PositiveNumber);
  sub->add_option("--vocab", cfg.vocab, "WordPiece vocabulary for exact model token budgets")->check(CLI::ExistingFile);
  sub->add_option("--negatives-per-positive", cfg.negatives_per_positive, "Sampled negatives per positive")
      ->check(CLI::PositiveNumber);
  sub->add_option("--negatives-from", cfg.negatives_from, "candidates or collection")
      ->check(CLI::IsMember({"candidates", "collection"}));
  sub->add_option("--seed", cfg.seed, "Seed for every random choice");
  sub->add_option("--export-training-pairs", cfg.training_pairs_out, "Write sampled labeled pairs here");
  sub->add_option("--scores-out", cfg.scores_out, "Write the scores used for ranking here");
  sub->add_option("--tag", cfg.tag, "Run tag");
}

// Prepends config-file values as ordinary arguments; options take the last
// value given, so explicit flags win.
std::vector<std::string> apply_config(const std::vector<std::string>& args, CLI::App& app) {
  const std::string path = find_config_path(args);
  if (path.empty() || args.size() < 2) return args;
  CLI::App* sub = nullptr;
  std::size_t sub_pos = 0;
  for (std::size_t i = 1; i < args.size(); ++i) {
    if (!args[i].empty() && args[i][0] != '-') {
      sub = app.get_subcommand_no_throw(args[i]);
      sub_pos = i;
      break;
    }
  }
  if (sub == nullptr) return args;
  std::vector<std::string> injected;
  for (const auto& [key, value] : load_config(path)) {
    if (key == "config") continue;
    CLI::Option* opt = sub->get_option_no_throw("--" + key);
    if (opt == nullptr) continue;  // belongs to another subcommand
    if (opt->get_expected_min() == 0) {
      if (config_truthy(value)) injected.push_back("--" + key);
    } else {
      injected.push_back("--" + key);
      injected.push_back(value);
    }
  }
  std::vector<std::string> out(args.begin(), args.begin() + static_cast<std::ptrdiff_t>(sub_pos + 1));
  out.insert(out.end(), injected.begin(), injected.end());
  out.insert(out.end(), args.begin() + static_cast<std::ptrdiff_t>(sub_pos + 1), args.end());
  return out;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  PipelineConfig cfg;
  std::string expand_out;
  std::string per_topic_out;
  std::string bucket_out;

  CLI::App app{"Two-stage passage ranking with paraphrase query expansion", "q2q"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string("q2q ") + kVersion + " (index format " + std::to_string(kIndexFormatVersion) + ")");
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

  auto* mine = app.add_subcommand("mine-pairs", "Mine equivalent query pairs from relevance judgments");
  mine->add_option("--qrels", cfg.qrels, "Relevance judgments")->required()->check(CLI::ExistingFile);
  mine->add_option("--queries", cfg.queries, "Query texts; enables seq2seq export")->check(CLI::ExistingFile);
  mine->add_option("--out", cfg.out, "Output directory")->required();
  mine->add_option("--min-grade", cfg.min_grade, "Minimum grade treated as relevant")->check(CLI::PositiveNumber);
  mine->add_option("--ordering", cfg.ordering, "both-directions or unordered")
      ->check(CLI::IsMember({"both-directions", "unordered"}));
  add_config_option(mine, cfg);

  auto* build = app.add_subcommand("build-index", "Build a BM25 index over a passage collection");
  build->add_option("--collection", cfg.collection, "Passage collection TSV")->required()->check(CLI::ExistingFile);
  build->add_option("--index", cfg.index, "Index file to write")->required();
  build->add_flag("--stem", cfg.stem, "Strip English plurals");
  build->add_option("--stopwords", cfg.stopwords, "Stopword list, one per line")->check(CLI::ExistingFile);
  add_config_option(build, cfg);

  auto* retrieve = app.add_subcommand("retrieve", "BM25 top-k retrieval into a run file");
  retrieve->add_option("--index", cfg.index, "Index file")->required()->check(CLI::ExistingFile);
  retrieve->add_option("--queries", cfg.queries, "Query TSV")->required()->check(CLI::ExistingFile);
  retrieve->add_option("--run", cfg.run, "Run file to write")->required();
  retrieve->add_option("--topk", cfg.topk, "Passages per query")->check(CLI::PositiveNumber);
  retrieve->add_option("--k1", cfg.k1, "BM25 k1");
  retrieve->add_option("--b", cfg.b, "BM25 b");
  retrieve->add_flag("--query-tf", cfg.query_tf, "Weight terms by their query frequency");
  retrieve->add_option("--tag", cfg.tag, "Run tag");
  add_config_option(retrieve, cfg);

  auto* expand = app.add_subcommand("expand", "Append paraphrases to queries");
  expand->add_option("--queries", cfg.queries, "Query TSV")->required()->check(CLI::ExistingFile);
  expand->add_option("--out", expand_out, "Expanded query TSV to write")->required();
  add_expansion_options(expand, cfg);
  add_config_option(expand, cfg);

  auto* rerank_cmd = app.add_subcommand("rerank", "Score and sort candidates per query");
  rerank_cmd->add_option("--queries", cfg.queries, "Query TSV (expanded or original)")->check(CLI::ExistingFile);
  rerank_cmd->add_option("--qrels", cfg.qrels, "Judgments for the oracle scorer and pair export")->check(CLI::ExistingFile);
  rerank_cmd->add_option("--run", cfg.run, "Run file to write");
  add_expansion_options(rerank_cmd, cfg);
  add_rerank_options(rerank_cmd, cfg);
  add_eval_options(rerank_cmd, cfg);
  add_config_option(rerank_cmd, cfg);

  auto* evaluate = app.add_subcommand("evaluate", "MAP, nDCG and P@10 of a run");
  evaluate->add_option("--run", cfg.run, "Run file")->required()->check(CLI::ExistingFile);
  evaluate->add_option("--qrels", cfg.qrels, "Relevance judgments")->required()->check(CLI::ExistingFile);
  evaluate->add_option("--out", per_topic_out, "Per-topic TSV to write");
  add_eval_options(evaluate, cfg);
  add_config_option(evaluate, cfg);

  auto* compare = app.add_subcommand("compare", "Bucket per-topic scores against best/median/worst statistics");
  compare->add_option("--run", cfg.run, "Run file")->required()->check(CLI::ExistingFile);
  compare->add_option("--qrels", cfg.qrels, "Relevance judgments")->required()->check(CLI::ExistingFile);
  compare->add_option("--stats", cfg.stats, "topic, metric, best, median, worst TSV")->required()->check(CLI::ExistingFile);
  compare->add_option("--epsilon", cfg.epsilon, "Absolute tolerance for 'at' buckets")->check(CLI::PositiveNumber);
  compare->add_option("--out", bucket_out, "Bucket report to write");
  add_eval_options(compare, cfg);
  add_config_option(compare, cfg);

  auto* pipeline = app.add_subcommand("pipeline", "expand -> rerank -> evaluate");
  pipeline->add_option("--queries", cfg.queries, "Query TSV")->required()->check(CLI::ExistingFile);
  pipeline->add_option("--qrels", cfg.qrels, "Relevance judgments")->check(CLI::ExistingFile);
  pipeline->add_option("--stats", cfg.stats, "Committee statistics for bucket comparison")->check(CLI::ExistingFile);
  pipeline->add_option("--epsilon", cfg.epsilon, "Absolute tolerance for 'at' buckets")->check(CLI::PositiveNumber);
  pipeline->add_option("--out", cfg.out, "Output directory")->required();
  add_expansion_options(pipeline, cfg);
  add_rerank_options(pipeline, cfg);
  add_eval_options(pipeline, cfg);
  add_config_option(pipeline, cfg);

  const Log log(err);
  try {
    std::vector<std::string> argv = apply_config(args, app);
    std::reverse(argv.begin(), argv.end());
    argv.pop_back();  // program name
    app.parse(argv);
  } catch (const CLI::Success& e) {
    app.exit(e, out, err);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitUsage;
  } catch (const q2q::Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }

  try {
    if (cfg.tag.empty()) throw ConfigError("--tag must not be empty");
    if (*mine) {
      mine_pairs_stage(cfg, out);
    } else if (*build) {
      build_index_stage(cfg, out);
    } else if (*retrieve) {
      retrieve_stage(cfg, out);
    } else if (*expand) {
      expand_stage(cfg, out, log, expand_out);
    } else if (*rerank_cmd) {
      QueryStore queries;
      if (!cfg.queries.empty()) queries = load_queries(cfg.queries);
      const auto expanded = cfg.expansions.empty() && cfg.service.empty()
                                ? [&] {
                                    std::vector<ExpandedQuery> plain;
                                    for (const auto& q : queries) plain.push_back(unexpanded(q));
                                    return plain;
                                  }()
                                : expansion_stage(cfg, queries, log);
      rerank_stage(cfg, out, log, queries, expanded);
    } else if (*evaluate) {
      evaluate_stage(cfg, out, cfg.run, per_topic_out);
    } else if (*compare) {
      compare_stage(cfg, out, cfg.run, bucket_out);
    } else if (*pipeline) {
      pipeline_stage(cfg, out, log);
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitOk;
}

}  // namespace q2q::cli
