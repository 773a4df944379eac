#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace causerl {

enum class ErrorKind {
  kZeroNorm,
  kNotScalar,
  kNonDeterministic,
  kShapeMismatch,
  kNonFinite,
  kOutOfVocab,
  kEmptySequence,
  kSpanOutOfRange,
  kBatchTooSmall,
  kEmptyCorpus,
  kEmptyBatch,
  kNoPositives,
  kMarkerNotFound,
  kMultipleMarkers,
  kInvalidSpec,
  kInvalidConfig,
  kTooFewDocuments,
  kParseError,
  kMissingArtifact,
  kUnknownVariant,
};

std::string_view to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Parse failure in a line-delimited file; `line()` is 1-based.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error(ErrorKind::kParseError, "line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace causerl
