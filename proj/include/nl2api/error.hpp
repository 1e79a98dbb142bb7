#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace nl2api {

enum class ErrorKind {
  InvalidArgument,
  NotFound,
  // corpus_store
  MalformedRecord,
  DuplicateId,
  UnparseableQuery,
  CorpusTooSmall,
  MalformedVocabulary,
  EnumeratedWithoutValues,
  // query_model
  MalformedUrl,
  EmptyKey,
  SyntaxError,
  MultipleOperations,
  EmptySelection,
  // vector_index
  BackendUnavailable,
  DimensionMismatch,
  ZeroVector,
  EmptyCorpus,
  MalformedIndex,
  // llm_gateway
  Timeout,
  Unauthorized,
  CassetteMiss,
  UpstreamError,
  NoQueryFound,
  MissingCredential,
  // strategies
  MissingExamples,
  // api_executor
  Transport,
  ShapeUnrecognized,
  RateLimited,
  // config
  MalformedConfig,
};

std::string_view to_string(ErrorKind kind);

/// Every failure raised by the library. `subject` carries the offending
/// id/attribute/hash and `position` the line, byte offset or HTTP status,
/// depending on the kind.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message, std::string subject = {},
        std::optional<std::int64_t> position = std::nullopt)
      : std::runtime_error(message),
        kind_(kind),
        subject_(std::move(subject)),
        position_(position) {}

  ErrorKind kind() const noexcept { return kind_; }
  const std::string& subject() const noexcept { return subject_; }
  std::optional<std::int64_t> position() const noexcept { return position_; }

 private:
  ErrorKind kind_;
  std::string subject_;
  std::optional<std::int64_t> position_;
};

}  // namespace nl2api
