#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace q2q {

// Root of every error thrown by the library. The CLI maps these to exit 1.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input. Carries the source name and 1-based line number when known.
class ParseError : public Error {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& what)
      : Error(source + ":" + std::to_string(line) + ": " + what), source_(source), line_(line) {}

  const std::string& source() const { return source_; }
  std::size_t line() const { return line_; }

 private:
  std::string source_;
  std::size_t line_;
};

class DuplicateKeyError : public Error {
 public:
  using Error::Error;
};

class CapacityError : public Error {
 public:
  using Error::Error;
};

// A caller broke a documented precondition (unsorted input, empty store...).
class ContractViolation : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class NotFoundError : public Error {
 public:
  using Error::Error;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

class MissingReferenceError : public Error {
 public:
  using Error::Error;
};

// Text that cannot be written to a line-oriented file unchanged.
class SanitationError : public Error {
 public:
  using Error::Error;
};

class FormatError : public Error {
 public:
  using Error::Error;
};

// A remote service answered, but the answer breaks the wire contract.
class ProtocolError : public Error {
 public:
  using Error::Error;
};

// A remote service could not be reached after the configured retries.
class TransportError : public Error {
 public:
  using Error::Error;
};

// Scoring failed for one (query, passage) pair; the whole query is abandoned.
class ScorerError : public Error {
 public:
  ScorerError(std::string query_id, std::string passage_id, const std::string& what)
      : Error("scoring (" + query_id + ", " + passage_id + ") failed: " + what),
        query_id_(std::move(query_id)),
        passage_id_(std::move(passage_id)) {}

  const std::string& query_id() const { return query_id_; }
  const std::string& passage_id() const { return passage_id_; }

 private:
  std::string query_id_;
  std::string passage_id_;
};

class EvaluationError : public Error {
 public:
  using Error::Error;
};

}  // namespace q2q
