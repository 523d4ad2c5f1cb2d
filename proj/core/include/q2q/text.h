#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace q2q::text {

// Offset of the first invalid UTF-8 byte, or nullopt if `s` is well formed.
std::optional<std::size_t> find_invalid_utf8(std::string_view s);

bool is_valid_utf8(std::string_view s);

// Splits on the first `fields - 1` tabs; the last field keeps any remaining tabs.
// Returns fewer than `fields` pieces when the line has too few tabs.
std::vector<std::string_view> split_tabs(std::string_view line, std::size_t fields);

// Splits on runs of ASCII whitespace.
std::vector<std::string_view> split_whitespace(std::string_view line);

std::string_view trim(std::string_view s);

// Removes one trailing '\r' (CRLF input).
std::string_view strip_cr(std::string_view s);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

bool has_line_break(std::string_view s);

// Fixed six-decimal rendering used by every score-bearing file format.
std::string format_score(double value);

// Shortest decimal string that parses back to the same double.
std::string format_roundtrip(double value);

std::optional<long long> parse_int(std::string_view s);
std::optional<double> parse_double(std::string_view s);

}  // namespace q2q::text
