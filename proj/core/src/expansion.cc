#include "q2q/expansion.h"

#include <algorithm>
#include <cmath>
#include <future>
#include <istream>
#include <ostream>
#include <set>
#include <unordered_set>

#include "q2q/text.h"
#include "q2q/tokenizer.h"

namespace q2q {

ExpandedQuery assemble(const QueryRecord& original, std::span<const ParaphraseBeam> beams, std::size_t k) {
  for (std::size_t i = 1; i < beams.size(); ++i) {
    if (beams[i].beam_rank <= beams[i - 1].beam_rank) {
      throw ContractViolation("beams for query '" + original.id + "' are not sorted by rank");
    }
  }
  ExpandedQuery expanded;
  expanded.query_id = original.id;
  expanded.original_text = original.text;
  expanded.assembled_text = original.text;
  const std::size_t used = std::min(k, beams.size());
  for (std::size_t i = 0; i < used; ++i) {
    expanded.beams_used.push_back(beams[i]);
    expanded.assembled_text += ' ';
    expanded.assembled_text += beams[i].text;
  }
  return expanded;
}

ExpandedQuery unexpanded(const QueryRecord& original) { return assemble(original, {}, 0); }

FilterPolicy parse_filter_policy(std::string_view spec) {
  const auto colon = spec.find(':');
  const std::string_view name = spec.substr(0, colon);
  const std::optional<std::string_view> arg =
      colon == std::string_view::npos ? std::nullopt : std::optional(spec.substr(colon + 1));
  const auto number = [&]() {
    if (!arg) throw ConfigError("filter '" + std::string(name) + "' needs a threshold, e.g. " + std::string(name) + ":0.5");
    auto v = text::parse_double(*arg);
    if (!v) throw ConfigError("invalid filter threshold '" + std::string(*arg) + "'");
    return *v;
  };
  if (name == "none" && !arg) return filter::None{};
  if (name == "dedup-exact" && !arg) return filter::DedupExact{};
  if (name == "min-log-likelihood") return filter::MinLogLikelihood{number()};
  if (name == "lexical-overlap") {
    const double tau = number();
    if (!(tau >= 0.0 && tau <= 1.0)) throw ConfigError("lexical-overlap threshold must be in [0, 1]");
    return filter::LexicalOverlap{tau};
  }
  throw ConfigError("unknown filter policy '" + std::string(spec) + "'");
}

std::string to_string(const FilterPolicy& policy) {
  struct Visitor {
    std::string operator()(const filter::None&) const { return "none"; }
    std::string operator()(const filter::DedupExact&) const { return "dedup-exact"; }
    std::string operator()(const filter::MinLogLikelihood& p) const {
      return "min-log-likelihood:" + text::format_roundtrip(p.threshold);
    }
    std::string operator()(const filter::LexicalOverlap& p) const {
      return "lexical-overlap:" + text::format_roundtrip(p.min_jaccard);
    }
  };
  return std::visit(Visitor{}, policy);
}

namespace {

double token_jaccard(const std::set<std::string>& a, const std::set<std::string>& b) {
  if (a.empty() && b.empty()) return 0.0;
  std::size_t shared = 0;
  for (const auto& t : a) shared += b.count(t);
  return static_cast<double>(shared) / static_cast<double>(a.size() + b.size() - shared);
}

std::set<std::string> token_set(std::string_view s) {
  auto tokens = tokenize(s).tokens;
  return {std::make_move_iterator(tokens.begin()), std::make_move_iterator(tokens.end())};
}

}  // namespace

std::vector<ParaphraseBeam> filter_beams(std::span<const ParaphraseBeam> beams, const FilterPolicy& policy,
                                         std::string_view original_text) {
  std::vector<ParaphraseBeam> kept;
  if (std::holds_alternative<filter::None>(policy)) {
    kept.assign(beams.begin(), beams.end());
  } else if (std::holds_alternative<filter::DedupExact>(policy)) {
    std::unordered_set<std::string_view> seen;
    for (const auto& beam : beams) {
      if (seen.insert(beam.text).second) kept.push_back(beam);
    }
  } else if (const auto* p = std::get_if<filter::MinLogLikelihood>(&policy)) {
    if (!std::isfinite(p->threshold)) throw ConfigError("min-log-likelihood threshold must be finite");
    for (const auto& beam : beams) {
      if (beam.log_likelihood >= p->threshold) kept.push_back(beam);
    }
  } else if (const auto* p = std::get_if<filter::LexicalOverlap>(&policy)) {
    if (!(p->min_jaccard >= 0.0 && p->min_jaccard <= 1.0)) throw ConfigError("lexical-overlap threshold must be in [0, 1]");
    const auto original = token_set(original_text);
    for (const auto& beam : beams) {
      if (token_jaccard(original, token_set(beam.text)) >= p->min_jaccard) kept.push_back(beam);
    }
  }
  return kept;
}

void validate_beams(const std::string& query_id, std::span<const ParaphraseBeam> beams) {
  for (std::size_t i = 0; i < beams.size(); ++i) {
    const auto& beam = beams[i];
    if (beam.beam_rank < 1) throw ValidationError("query '" + query_id + "': beam rank must be >= 1");
    if (!(beam.log_likelihood <= 0.0)) {
      throw ValidationError("query '" + query_id + "': log-likelihood must be <= 0 (rank " + std::to_string(beam.beam_rank) + ")");
    }
    if (i == 0) continue;
    if (beam.beam_rank <= beams[i - 1].beam_rank) {
      throw ValidationError("query '" + query_id + "': beam rank " + std::to_string(beam.beam_rank) + " repeated or out of order");
    }
    if (beam.log_likelihood > beams[i - 1].log_likelihood) {
      throw ValidationError("query '" + query_id + "': log-likelihood increases at beam rank " + std::to_string(beam.beam_rank));
    }
  }
}

ExpansionMap load_precomputed_expansions(std::istream& in, const std::string& source) {
  ExpansionMap expansions;
  std::string buffer;
  std::size_t line_no = 0;
  while (std::getline(in, buffer)) {
    ++line_no;
    const auto line = text::strip_cr(buffer);
    if (line.empty()) continue;
    if (auto bad = text::find_invalid_utf8(line)) throw ParseError(source, line_no, "invalid UTF-8 at byte " + std::to_string(*bad));
    const auto fields = text::split_tabs(line, 4);
    if (fields.size() != 4) throw ParseError(source, line_no, "expected 'query_id<TAB>beam_rank<TAB>log_likelihood<TAB>text'");
    if (fields[0].empty()) throw ParseError(source, line_no, "empty query id");
    const auto rank = text::parse_int(fields[1]);
    if (!rank || *rank < 1 || *rank > 1'000'000) throw ParseError(source, line_no, "invalid beam rank '" + std::string(fields[1]) + "'");
    const auto ll = text::parse_double(fields[2]);
    if (!ll) throw ParseError(source, line_no, "invalid log-likelihood '" + std::string(fields[2]) + "'");
    if (text::trim(fields[3]).empty()) throw ParseError(source, line_no, "empty paraphrase text");
    expansions[std::string(fields[0])].push_back(ParaphraseBeam{std::string(fields[3]), *ll, static_cast<int>(*rank)});
  }
  for (auto& [query_id, beams] : expansions) {
    std::stable_sort(beams.begin(), beams.end(), [](const auto& a, const auto& b) { return a.beam_rank < b.beam_rank; });
    validate_beams(query_id, beams);
  }
  return expansions;
}

void write_expansions(std::ostream& out, const ExpansionMap& expansions) {
  for (const auto& [query_id, beams] : expansions) {
    for (const auto& beam : beams) {
      if (text::has_line_break(beam.text)) throw SanitationError("paraphrase for query '" + query_id + "' contains a line break");
      out << query_id << '\t' << beam.beam_rank << '\t' << text::format_roundtrip(beam.log_likelihood) << '\t' << beam.text
          << '\n';
    }
  }
}

FetchResult fetch_expansions(std::span<const QueryRecord> queries, ParaphraseService& service, const FetchOptions& options) {
  if (options.num_beams < 1) throw ConfigError("num_beams must be >= 1");
  if (options.batch_size < 1) throw ConfigError("batch size must be >= 1");
  FetchResult result;
  if (queries.empty()) return result;

  std::vector<std::span<const QueryRecord>> batches;
  for (std::size_t i = 0; i < queries.size(); i += options.batch_size) {
    batches.push_back(queries.subspan(i, std::min(options.batch_size, queries.size() - i)));
  }

  std::vector<std::vector<ParaphraseService::Item>> responses(batches.size());
  const std::size_t window = std::max<std::size_t>(1, options.max_in_flight);
  for (std::size_t start = 0; start < batches.size(); start += window) {
    const std::size_t stop = std::min(batches.size(), start + window);
    if (stop - start == 1) {
      responses[start] = service.paraphrase(batches[start], options.num_beams);
      continue;
    }
    std::vector<std::future<std::vector<ParaphraseService::Item>>> pending;
    for (std::size_t b = start; b < stop; ++b) {
      pending.push_back(std::async(std::launch::async, [&, b] { return service.paraphrase(batches[b], options.num_beams); }));
    }
    for (std::size_t b = start; b < stop; ++b) responses[b] = pending[b - start].get();
  }

  // Assemble in request order; completion order never matters.
  for (std::size_t b = 0; b < batches.size(); ++b) {
    const auto& batch = batches[b];
    const auto& items = responses[b];
    if (items.size() != batch.size()) {
      throw ProtocolError("paraphrase service returned " + std::to_string(items.size()) + " results for " +
                          std::to_string(batch.size()) + " queries");
    }
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const auto& item = items[i];
      if (item.id != batch[i].id) throw ProtocolError("paraphrase result id '" + item.id + "' does not match request '" + batch[i].id + "'");
      if (item.error) {
        result.warnings.push_back("query '" + item.id + "' not expanded: " + *item.error);
        continue;
      }
      if (item.beams.size() > static_cast<std::size_t>(options.num_beams)) {
        throw ProtocolError("query '" + item.id + "': " + std::to_string(item.beams.size()) + " beams for num_beams=" +
                            std::to_string(options.num_beams));
      }
      try {
        validate_beams(item.id, item.beams);
      } catch (const ValidationError& e) {
        throw ProtocolError(e.what());
      }
      if (item.beams.empty()) {
        result.warnings.push_back("query '" + item.id + "' not expanded: service returned no beams");
        continue;
      }
      result.expansions[item.id] = item.beams;
    }
  }
  return result;
}

std::vector<ExpandedQuery> expand_queries(const QueryStore& queries, const ExpansionMap& expansions,
                                          const ExpansionOptions& options, std::vector<std::string>* warnings) {
  std::vector<ExpandedQuery> out;
  out.reserve(queries.size());
  for (const auto& query : queries) {
    auto it = expansions.find(query.id);
    if (it == expansions.end() || it->second.empty()) {
      if (warnings != nullptr && options.k > 0) warnings->push_back("query '" + query.id + "' has no paraphrases; left unexpanded");
      out.push_back(unexpanded(query));
      continue;
    }
    const auto kept = filter_beams(it->second, options.filter, query.text);
    out.push_back(assemble(query, kept, options.k));
  }
  return out;
}

}  // namespace q2q
