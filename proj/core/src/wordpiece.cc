#include <unicode/uchar.h>
#include <unicode/utf8.h>

#include <istream>

#include "q2q/reranker.h"
#include "q2q/text.h"

namespace q2q {

std::vector<std::string> WhitespaceTokenizer::tokenize(std::string_view text) const {
  std::vector<std::string> out;
  for (auto piece : text::split_whitespace(text)) out.emplace_back(piece);
  return out;
}

std::string WhitespaceTokenizer::detokenize(std::span<const std::string> tokens) const {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i > 0) out += ' ';
    out += tokens[i];
  }
  return out;
}

WordPieceTokenizer::WordPieceTokenizer(std::unordered_set<std::string> vocab, std::string unknown_token,
                                       std::size_t max_chars_per_word)
    : vocab_(std::move(vocab)), unknown_token_(std::move(unknown_token)), max_chars_per_word_(max_chars_per_word) {}

WordPieceTokenizer WordPieceTokenizer::from_vocab(std::istream& in, const std::string& source) {
  std::unordered_set<std::string> vocab;
  std::string line;
  while (std::getline(in, line)) {
    const auto piece = text::trim(text::strip_cr(line));
    if (!piece.empty()) vocab.emplace(piece);
  }
  if (vocab.empty()) throw ParseError(source, 0, "empty vocabulary");
  return WordPieceTokenizer(std::move(vocab));
}

namespace {

// Lowercases, splits on whitespace, and makes every punctuation or symbol
// character its own word.
std::vector<std::string> basic_split(std::string_view input) {
  std::vector<std::string> words;
  std::string current;
  const auto flush = [&] {
    if (!current.empty()) words.push_back(std::move(current));
    current.clear();
  };
  const auto* bytes = reinterpret_cast<const uint8_t*>(input.data());
  const auto length = static_cast<int32_t>(input.size());
  int32_t i = 0;
  while (i < length) {
    UChar32 c;
    U8_NEXT(bytes, i, length, c);
    if (c < 0 || u_isUWhiteSpace(c) || u_iscntrl(c)) {
      flush();
      continue;
    }
    uint8_t buf[U8_MAX_LENGTH];
    int32_t n = 0;
    U8_APPEND_UNSAFE(buf, n, u_tolower(c));
    const std::string encoded(reinterpret_cast<const char*>(buf), static_cast<std::size_t>(n));
    const bool ascii_symbol = c < 128 && !u_isalnum(c);
    if (ascii_symbol || u_ispunct(c)) {
      flush();
      words.push_back(encoded);
    } else {
      current += encoded;
    }
  }
  flush();
  return words;
}

std::vector<std::size_t> code_point_offsets(std::string_view word) {
  std::vector<std::size_t> offsets;
  const auto* bytes = reinterpret_cast<const uint8_t*>(word.data());
  const auto length = static_cast<int32_t>(word.size());
  int32_t i = 0;
  while (i < length) {
    offsets.push_back(static_cast<std::size_t>(i));
    U8_FWD_1(bytes, i, length);
  }
  offsets.push_back(word.size());
  return offsets;
}

}  // namespace

std::vector<std::string> WordPieceTokenizer::tokenize(std::string_view text) const {
  std::vector<std::string> out;
  for (const auto& word : basic_split(text)) {
    const auto offsets = code_point_offsets(word);
    const std::size_t chars = offsets.size() - 1;
    if (chars > max_chars_per_word_) {
      out.push_back(unknown_token_);
      continue;
    }
    std::vector<std::string> pieces;
    bool bad = false;
    std::size_t start = 0;
    while (start < chars) {
      std::size_t end = chars;
      std::string match;
      while (start < end) {
        std::string candidate = word.substr(offsets[start], offsets[end] - offsets[start]);
        if (start > 0) candidate.insert(0, "##");
        if (vocab_.count(candidate) != 0) {
          match = std::move(candidate);
          break;
        }
        --end;
      }
      if (match.empty()) {
        bad = true;
        break;
      }
      pieces.push_back(std::move(match));
      start = end;
    }
    if (bad) {
      out.push_back(unknown_token_);
    } else {
      for (auto& p : pieces) out.push_back(std::move(p));
    }
  }
  return out;
}

std::string WordPieceTokenizer::detokenize(std::span<const std::string> tokens) const {
  std::string out;
  for (const auto& token : tokens) {
    if (token.size() > 2 && token.compare(0, 2, "##") == 0) {
      out.append(token, 2);
      continue;
    }
    if (!out.empty()) out += ' ';
    out += token;
  }
  return out;
}

}  // namespace q2q
