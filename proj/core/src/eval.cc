#include "q2q/eval.h"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <set>

#include "q2q/text.h"

namespace q2q {

void MetricConfig::validate() const {
  if (binarize_threshold < 1) throw ConfigError("binarize threshold must be >= 1");
  if (ndcg_cutoff && *ndcg_cutoff < 1) throw ConfigError("nDCG cutoff must be >= 1");
}

namespace {

double gain(int grade, GainKind kind) {
  if (grade <= 0) return 0.0;
  return kind == GainKind::kExponential ? std::exp2(static_cast<double>(grade)) - 1.0 : static_cast<double>(grade);
}

double discount(std::size_t rank) { return std::log2(static_cast<double>(rank) + 1.0); }

}  // namespace

std::optional<double> average_precision(const Ranking& ranking, const Qrels& qrels, const MetricConfig& config) {
  config.validate();
  const auto& judged = qrels.judgments_for(ranking.query_id);
  std::size_t total_relevant = 0;
  for (const auto& [pid, grade] : judged) total_relevant += grade >= config.binarize_threshold ? 1 : 0;
  if (total_relevant == 0) return std::nullopt;

  double sum = 0.0;
  std::size_t found = 0;
  for (std::size_t i = 0; i < ranking.entries.size(); ++i) {
    auto it = judged.find(ranking.entries[i].passage_id);
    if (it == judged.end() || it->second < config.binarize_threshold) continue;
    ++found;
    sum += static_cast<double>(found) / static_cast<double>(i + 1);
  }
  return sum / static_cast<double>(total_relevant);
}

std::optional<double> ndcg(const Ranking& ranking, const Qrels& qrels, const MetricConfig& config) {
  config.validate();
  const auto& judged = qrels.judgments_for(ranking.query_id);
  std::vector<double> ideal;
  for (const auto& [pid, grade] : judged) {
    const double g = gain(grade, config.ndcg_gain);
    if (g > 0.0) ideal.push_back(g);
  }
  std::sort(ideal.begin(), ideal.end(), std::greater<>());
  const std::size_t ideal_depth = config.ndcg_cutoff ? std::min(*config.ndcg_cutoff, ideal.size()) : ideal.size();
  double idcg = 0.0;
  for (std::size_t i = 0; i < ideal_depth; ++i) idcg += ideal[i] / discount(i + 1);
  if (idcg <= 0.0) return std::nullopt;

  const std::size_t depth =
      config.ndcg_cutoff ? std::min(*config.ndcg_cutoff, ranking.entries.size()) : ranking.entries.size();
  double dcg = 0.0;
  for (std::size_t i = 0; i < depth; ++i) {
    auto it = judged.find(ranking.entries[i].passage_id);
    if (it == judged.end()) continue;
    dcg += gain(it->second, config.ndcg_gain) / discount(i + 1);
  }
  return dcg / idcg;
}

double precision_at_k(const Ranking& ranking, const Qrels& qrels, std::size_t k, const MetricConfig& config) {
  config.validate();
  if (k < 1) throw ConfigError("precision cutoff must be >= 1");
  const auto& judged = qrels.judgments_for(ranking.query_id);
  std::size_t hits = 0;
  const std::size_t depth = std::min(k, ranking.entries.size());
  for (std::size_t i = 0; i < depth; ++i) {
    auto it = judged.find(ranking.entries[i].passage_id);
    if (it != judged.end() && it->second >= config.binarize_threshold) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(k);
}

double mean_over_topics(const std::map<std::string, std::optional<double>>& per_topic) {
  double sum = 0.0;
  std::size_t included = 0;
  for (const auto& [topic, value] : per_topic) {
    if (!value) continue;
    sum += *value;
    ++included;
  }
  if (included == 0) throw EvaluationError("no topic has relevance judgments to average over");
  return sum / static_cast<double>(included);
}

std::string_view metric_name(Metric metric) {
  switch (metric) {
    case Metric::kMap:
      return "map";
    case Metric::kNdcg:
      return "ndcg";
    case Metric::kP10:
      return "p10";
  }
  return "?";
}

Metric parse_metric(std::string_view name) {
  for (Metric m : kAllMetrics) {
    if (metric_name(m) == name) return m;
  }
  throw ConfigError("unknown metric '" + std::string(name) + "' (expected map, ndcg or p10)");
}

TopicScores evaluate_run(const std::vector<Ranking>& rankings, const Qrels& qrels, const std::vector<Metric>& metrics,
                         const MetricConfig& config) {
  config.validate();
  TopicScores scores;
  for (Metric metric : metrics) {
    auto& column = scores.per_topic[metric];
    for (const auto& ranking : rankings) {
      std::optional<double> value;
      switch (metric) {
        case Metric::kMap:
          value = average_precision(ranking, qrels, config);
          break;
        case Metric::kNdcg:
          value = ndcg(ranking, qrels, config);
          break;
        case Metric::kP10: {
          // Same exclusion rule as AP: nothing relevant, nothing to measure.
          const bool has_relevant = std::any_of(qrels.judgments_for(ranking.query_id).begin(),
                                                qrels.judgments_for(ranking.query_id).end(),
                                                [&](const auto& j) { return j.second >= config.binarize_threshold; });
          if (has_relevant) value = precision_at_k(ranking, qrels, 10, config);
          break;
        }
      }
      column[ranking.query_id] = value;
    }
    scores.means[metric] = mean_over_topics(column);
  }
  return scores;
}

void write_topic_scores(std::ostream& out, const TopicScores& scores) {
  for (const auto& [metric, column] : scores.per_topic) {
    for (const auto& [topic, value] : column) {
      if (value) out << topic << '\t' << metric_name(metric) << '\t' << text::format_score(*value) << '\n';
    }
  }
  for (const auto& [metric, mean] : scores.means) {
    out << "all\t" << metric_name(metric) << '\t' << text::format_score(mean) << '\n';
  }
}

// ---------------------------------------------------------------------------

std::vector<PerTopicStats> parse_committee_stats(std::istream& in, const std::string& source) {
  std::vector<PerTopicStats> stats;
  std::set<std::pair<std::string, Metric>> seen;
  std::string buffer;
  std::size_t line_no = 0;
  while (std::getline(in, buffer)) {
    ++line_no;
    const auto line = text::strip_cr(buffer);
    if (line.empty()) continue;
    const auto fields = text::split_tabs(line, 5);
    if (fields.size() != 5) throw ParseError(source, line_no, "expected 'topic<TAB>metric<TAB>best<TAB>median<TAB>worst'");
    Metric metric;
    try {
      metric = parse_metric(fields[1]);
    } catch (const ConfigError& e) {
      throw ParseError(source, line_no, e.what());
    }
    std::array<double, 3> values{};
    for (std::size_t i = 0; i < 3; ++i) {
      auto v = text::parse_double(text::trim(fields[2 + i]));
      if (!v) throw ParseError(source, line_no, "invalid number '" + std::string(fields[2 + i]) + "'");
      values[i] = *v;
    }
    if (!(values[0] >= values[1] && values[1] >= values[2])) {
      throw ValidationError(source + ":" + std::to_string(line_no) + ": expected best >= median >= worst");
    }
    if (!seen.emplace(std::string(fields[0]), metric).second) {
      throw DuplicateKeyError(source + ":" + std::to_string(line_no) + ": duplicate stats for (" + std::string(fields[0]) +
                              ", " + std::string(fields[1]) + ")");
    }
    stats.push_back(PerTopicStats{std::string(fields[0]), metric, values[0], values[1], values[2]});
  }
  return stats;
}

std::string_view bucket_name(Bucket bucket) {
  switch (bucket) {
    case Bucket::kAtBest:
      return "At Best";
    case Bucket::kBestToMedian:
      return "Best to Median";
    case Bucket::kAtMedian:
      return "At Median";
    case Bucket::kMedianToWorst:
      return "Median to Worst";
    case Bucket::kAtWorst:
      return "At Worst";
  }
  return "?";
}

Bucket classify(double own, double best, double median, double worst, double epsilon) {
  if (std::abs(own - best) <= epsilon) return Bucket::kAtBest;
  if (std::abs(own - median) <= epsilon) return Bucket::kAtMedian;
  if (std::abs(own - worst) <= epsilon) return Bucket::kAtWorst;
  return own > median ? Bucket::kBestToMedian : Bucket::kMedianToWorst;
}

std::size_t TopicBucketReport::topic_count(Metric metric) const {
  auto it = counts.find(metric);
  if (it == counts.end()) return 0;
  std::size_t total = 0;
  for (auto c : it->second) total += c;
  return total;
}

TopicBucketReport classify_buckets(const std::map<std::pair<std::string, Metric>, double>& own,
                                   const std::vector<PerTopicStats>& stats, double epsilon) {
  if (!(epsilon > 0.0)) throw ConfigError("bucket epsilon must be > 0");
  std::map<std::pair<std::string, Metric>, const PerTopicStats*> lookup;
  for (const auto& s : stats) lookup.emplace(std::pair(s.topic_id, s.metric), &s);

  std::vector<std::string> missing;
  for (const auto& [key, value] : own) {
    if (lookup.count(key) == 0) missing.push_back(key.first + "/" + std::string(metric_name(key.second)));
  }
  if (!missing.empty()) {
    std::string list;
    for (const auto& m : missing) list += (list.empty() ? "" : ", ") + m;
    throw EvaluationError("no committee stats for: " + list);
  }

  TopicBucketReport report;
  for (const auto& [key, value] : own) {
    const auto& s = *lookup.at(key);
    const Bucket bucket = classify(value, s.best, s.median, s.worst, epsilon);
    report.assignments[key] = bucket;
    auto& row = report.counts[key.second];
    ++row[static_cast<std::size_t>(bucket)];
  }
  return report;
}

std::map<Metric, BucketFractions> summarize_fractions(const TopicBucketReport& report) {
  std::map<Metric, BucketFractions> out;
  for (const auto& [metric, row] : report.counts) {
    const double total = static_cast<double>(report.topic_count(metric));
    if (total == 0) continue;
    const auto at = [&](Bucket b) { return static_cast<double>(row[static_cast<std::size_t>(b)]); };
    BucketFractions f;
    f.above_median = (at(Bucket::kAtBest) + at(Bucket::kBestToMedian)) / total;
    f.including_median = (at(Bucket::kAtBest) + at(Bucket::kBestToMedian) + at(Bucket::kAtMedian)) / total;
    out[metric] = f;
  }
  return out;
}

void write_bucket_report(std::ostream& out, const TopicBucketReport& report) {
  out << "bucket";
  for (const auto& [metric, row] : report.counts) out << '\t' << metric_name(metric);
  out << '\n';
  for (Bucket bucket : kAllBuckets) {
    out << bucket_name(bucket);
    for (const auto& [metric, row] : report.counts) out << '\t' << row[static_cast<std::size_t>(bucket)];
    out << '\n';
  }
}

}  // namespace q2q
