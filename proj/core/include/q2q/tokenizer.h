#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

namespace q2q {

struct TokenSequence {
  std::vector<std::string> tokens;

  std::size_t size() const { return tokens.size(); }
  bool empty() const { return tokens.empty(); }
  bool operator==(const TokenSequence&) const = default;
};

// Lowercased maximal runs of Unicode letters and digits; everything else,
// including invalid UTF-8 bytes, separates tokens.
TokenSequence tokenize(std::string_view text);

// Minimal English plural stripper (ies -> y, es -> e, s -> "").
std::string stem_plural(std::string_view token);

struct AnalyzerOptions {
  bool stem = false;
  std::unordered_set<std::string> stopwords;  // matched after lowercasing, before stemming

  bool operator==(const AnalyzerOptions&) const = default;
};

// tokenize() followed by optional stopword removal and stemming. Index and
// queries must go through the same analyzer.
class Analyzer {
 public:
  Analyzer() = default;
  explicit Analyzer(AnalyzerOptions options) : options_(std::move(options)) {}

  TokenSequence analyze(std::string_view text) const;
  const AnalyzerOptions& options() const { return options_; }

 private:
  AnalyzerOptions options_;
};

// One stopword per line; blank lines and '#' comments ignored. Words are
// normalized through tokenize().
std::unordered_set<std::string> load_stopwords(std::istream& in);

}  // namespace q2q
