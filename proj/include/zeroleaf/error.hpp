#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace zeroleaf {

/// Every failure the library reports. The CLI prints the enumerator name.
enum class Errc {
  ZeroVector,
  DimensionMismatch,
  NotNormalized,
  NonFiniteValue,
  ParseError,
  EmptyClass,
  DuplicateClassName,
  RowCountMismatch,
  PromptMismatch,
  EmptyScores,
  DuplicateItemId,
  LengthMismatch,
  LabelOutOfRange,
  DegenerateLabels,
  MalformedCurve,
  UnresolvableEmbeddingRef,
  InvalidK,
  MissingRows,
  ExtraRows,
  ColumnCountMismatch,
  NonFiniteScore,
  ModeMismatch,
  UnknownFormat,
  IoFailure,
  BadMagic,
  UnsupportedVersion,
  DigestMismatch,
  TruncatedPayload,
};

std::string_view to_string(Errc code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& context)
      : std::runtime_error(std::string(to_string(code)) + ": " + context), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace zeroleaf
