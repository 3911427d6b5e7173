#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace yarnlab {

// Base class for every toolkit error. Subclasses mirror the failure modes of
// the operations that raise them so callers can catch precisely.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

class MissingFieldError : public Error {
 public:
  explicit MissingFieldError(const std::string& field)
      : Error("unbound template placeholder: {" + field + "}"), field_(field) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

class EmptyDistributionError : public Error {
 public:
  EmptyDistributionError() : Error("empty distribution") {}
};

class InvalidDistributionError : public Error {
 public:
  using Error::Error;
};

class InvalidVocabularyError : public Error {
 public:
  using Error::Error;
};

class EmptyCorpusError : public Error {
 public:
  EmptyCorpusError() : Error("corpus is empty") {}
};

class BadLambdaError : public Error {
 public:
  using Error::Error;
};

class VocabMismatchError : public Error {
 public:
  VocabMismatchError(const std::string& expected, const std::string& got)
      : Error("vocabulary fingerprint mismatch: expected " + expected + ", got " + got),
        expected_(expected),
        got_(got) {}
  const std::string& expected() const { return expected_; }
  const std::string& got() const { return got_; }

 private:
  std::string expected_;
  std::string got_;
};

class TransportError : public Error {
 public:
  TransportError(int status, const std::string& detail)
      : Error("transport error (status " + std::to_string(status) + "): " + detail),
        status_(status) {}
  int status() const { return status_; }

 private:
  int status_;  // 0 when no HTTP status was received
};

class TimeoutError : public Error {
 public:
  explicit TimeoutError(const std::string& detail) : Error("request timed out: " + detail) {}
};

class MalformedError : public Error {
 public:
  explicit MalformedError(const std::string& detail, std::size_t line = 0)
      : Error(line ? "malformed input at line " + std::to_string(line) + ": " + detail
                   : "malformed input: " + detail),
        line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class NoDictionaryHitError : public Error {
 public:
  NoDictionaryHitError() : Error("no source token has a dictionary entry") {}
};

class MissingExampleError : public Error {
 public:
  explicit MissingExampleError(const std::string& id)
      : Error("example id not found: " + id), id_(id) {}
  const std::string& id() const { return id_; }

 private:
  std::string id_;
};

class UnknownCategoryError : public Error {
 public:
  explicit UnknownCategoryError(const std::string& category)
      : Error("unknown lexicon category: " + category) {}
};

class LengthMismatchError : public Error {
 public:
  using Error::Error;
};

class EmptyInputError : public Error {
 public:
  using Error::Error;
};

class DivisionByZeroError : public Error {
 public:
  explicit DivisionByZeroError(const std::string& metric)
      : Error("reference score is zero for metric: " + metric), metric_(metric) {}
  const std::string& metric() const { return metric_; }

 private:
  std::string metric_;
};

class EmptyGenerationError : public Error {
 public:
  EmptyGenerationError() : Error("model emitted end-of-sequence before any token") {}
};

class TokenizationMismatchError : public Error {
 public:
  using Error::Error;
};

class NoParsableArrayError : public Error {
 public:
  NoParsableArrayError() : Error("no parsable JSON array in model output") {}
};

class DimensionMismatchError : public Error {
 public:
  using Error::Error;
};

class UnsupportedError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// Raised by the experiment runner when per-example failures left a run
// incomplete; artifacts written so far are preserved on disk.
class PartialRunError : public Error {
 public:
  using Error::Error;
};

}  // namespace yarnlab
