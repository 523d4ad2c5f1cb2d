#include "q2q/tokenizer.h"

#include <unicode/uchar.h>
#include <unicode/utf8.h>

#include <istream>

#include "q2q/text.h"

namespace q2q {

TokenSequence tokenize(std::string_view text) {
  TokenSequence out;
  const auto* bytes = reinterpret_cast<const uint8_t*>(text.data());
  const auto length = static_cast<int32_t>(text.size());
  std::string current;
  int32_t i = 0;
  while (i < length) {
    UChar32 c;
    U8_NEXT(bytes, i, length, c);
    if (c >= 0 && u_isalnum(c)) {
      const UChar32 lower = u_tolower(c);
      uint8_t buf[U8_MAX_LENGTH];
      int32_t n = 0;
      U8_APPEND_UNSAFE(buf, n, lower);
      current.append(reinterpret_cast<const char*>(buf), static_cast<std::size_t>(n));
    } else if (!current.empty()) {
      out.tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) out.tokens.push_back(std::move(current));
  return out;
}

namespace {
bool ends_with(std::string_view s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}
}  // namespace

std::string stem_plural(std::string_view token) {
  std::string word(token);
  if (word.size() <= 3) return word;
  if (ends_with(word, "ies") && !ends_with(word, "eies") && !ends_with(word, "aies")) {
    word.replace(word.size() - 3, 3, "y");
  } else if (ends_with(word, "es") && !ends_with(word, "aes") && !ends_with(word, "ees") && !ends_with(word, "oes")) {
    word.pop_back();
  } else if (ends_with(word, "s") && !ends_with(word, "us") && !ends_with(word, "ss")) {
    word.pop_back();
  }
  return word;
}

TokenSequence Analyzer::analyze(std::string_view text) const {
  TokenSequence raw = tokenize(text);
  if (!options_.stem && options_.stopwords.empty()) return raw;
  TokenSequence out;
  out.tokens.reserve(raw.tokens.size());
  for (auto& token : raw.tokens) {
    if (options_.stopwords.count(token) != 0) continue;
    out.tokens.push_back(options_.stem ? stem_plural(token) : std::move(token));
  }
  return out;
}

std::unordered_set<std::string> load_stopwords(std::istream& in) {
  std::unordered_set<std::string> words;
  std::string line;
  while (std::getline(in, line)) {
    const auto trimmed = text::trim(line);
    if (trimmed.empty() || trimmed.front() == '#') continue;
    for (auto& token : tokenize(trimmed).tokens) words.insert(std::move(token));
  }
  return words;
}

}  // namespace q2q
