#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "q2q/corpus_io.h"

namespace q2q {

enum class GainKind { kExponential, kLinear };

struct MetricConfig {
  int binarize_threshold = 1;  // grade >= threshold is relevant for AP and P@k
  GainKind ndcg_gain = GainKind::kExponential;
  std::optional<std::size_t> ndcg_cutoff;  // none: the whole list

  void validate() const;
};

// Each metric returns nullopt when the topic has nothing relevant to find
// (the topic is then excluded from means rather than scored 0).
std::optional<double> average_precision(const Ranking& ranking, const Qrels& qrels, const MetricConfig& config = {});
std::optional<double> ndcg(const Ranking& ranking, const Qrels& qrels, const MetricConfig& config = {});

// Short rankings count as padded with non-relevant passages. Throws ConfigError for k < 1.
double precision_at_k(const Ranking& ranking, const Qrels& qrels, std::size_t k, const MetricConfig& config = {});

// Arithmetic mean over included topics. Throws EvaluationError when none are.
double mean_over_topics(const std::map<std::string, std::optional<double>>& per_topic);

enum class Metric { kMap, kNdcg, kP10 };

inline constexpr std::array<Metric, 3> kAllMetrics = {Metric::kMap, Metric::kNdcg, Metric::kP10};

std::string_view metric_name(Metric metric);
// "map", "ndcg", "p10". Throws ConfigError otherwise.
Metric parse_metric(std::string_view name);

struct TopicScores {
  // metric -> topic -> score (nullopt = excluded)
  std::map<Metric, std::map<std::string, std::optional<double>>> per_topic;
  std::map<Metric, double> means;
};

// Evaluates every ranking. Topics are those present in the run.
TopicScores evaluate_run(const std::vector<Ranking>& rankings, const Qrels& qrels, const std::vector<Metric>& metrics,
                         const MetricConfig& config = {});

// `topic<TAB>metric<TAB>value` rows sorted by metric then topic, followed by
// `all<TAB>metric<TAB>mean` rows. Excluded topics are omitted.
void write_topic_scores(std::ostream& out, const TopicScores& scores);

// ---------------------------------------------------------------------------
// Comparison against per-topic committee statistics

struct PerTopicStats {
  std::string topic_id;
  Metric metric = Metric::kMap;
  double best = 0.0;
  double median = 0.0;
  double worst = 0.0;

  bool operator==(const PerTopicStats&) const = default;
};

// `topic_id<TAB>metric<TAB>best<TAB>median<TAB>worst`; requires best >= median >= worst.
std::vector<PerTopicStats> parse_committee_stats(std::istream& in, const std::string& source = "<stats>");

enum class Bucket { kAtBest, kBestToMedian, kAtMedian, kMedianToWorst, kAtWorst };

inline constexpr std::array<Bucket, 5> kAllBuckets = {Bucket::kAtBest, Bucket::kBestToMedian, Bucket::kAtMedian,
                                                      Bucket::kMedianToWorst, Bucket::kAtWorst};

std::string_view bucket_name(Bucket bucket);

// First matching rule wins: at best, at median, at worst (each within
// epsilon), then above the median, else below it.
Bucket classify(double own, double best, double median, double worst, double epsilon);

struct TopicBucketReport {
  std::map<Metric, std::array<std::size_t, 5>> counts;  // indexed by Bucket
  std::map<std::pair<std::string, Metric>, Bucket> assignments;

  std::size_t topic_count(Metric metric) const;
};

inline constexpr double kDefaultBucketEpsilon = 1e-4;

// Throws EvaluationError listing every (topic, metric) without stats, and
// ConfigError for epsilon <= 0.
TopicBucketReport classify_buckets(const std::map<std::pair<std::string, Metric>, double>& own,
                                   const std::vector<PerTopicStats>& stats, double epsilon = kDefaultBucketEpsilon);

struct BucketFractions {
  double including_median = 0.0;  // (at best + best to median + at median) / total
  double above_median = 0.0;      // (at best + best to median) / total
};

std::map<Metric, BucketFractions> summarize_fractions(const TopicBucketReport& report);

// Five rows (one per bucket) with one column per metric, tab separated.
void write_bucket_report(std::ostream& out, const TopicBucketReport& report);

}  // namespace q2q
