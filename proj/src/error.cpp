#include "zeroleaf/error.hpp"

namespace zeroleaf {

std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::ZeroVector: return "ZeroVector";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::NotNormalized: return "NotNormalized";
    case Errc::NonFiniteValue: return "NonFiniteValue";
    case Errc::ParseError: return "ParseError";
    case Errc::EmptyClass: return "EmptyClass";
    case Errc::DuplicateClassName: return "DuplicateClassName";
    case Errc::RowCountMismatch: return "RowCountMismatch";
    case Errc::PromptMismatch: return "PromptMismatch";
    case Errc::EmptyScores: return "EmptyScores";
    case Errc::DuplicateItemId: return "DuplicateItemId";
    case Errc::LengthMismatch: return "LengthMismatch";
    case Errc::LabelOutOfRange: return "LabelOutOfRange";
    case Errc::DegenerateLabels: return "DegenerateLabels";
    case Errc::MalformedCurve: return "MalformedCurve";
    case Errc::UnresolvableEmbeddingRef: return "UnresolvableEmbeddingRef";
    case Errc::InvalidK: return "InvalidK";
    case Errc::MissingRows: return "MissingRows";
    case Errc::ExtraRows: return "ExtraRows";
    case Errc::ColumnCountMismatch: return "ColumnCountMismatch";
    case Errc::NonFiniteScore: return "NonFiniteScore";
    case Errc::ModeMismatch: return "ModeMismatch";
    case Errc::UnknownFormat: return "UnknownFormat";
    case Errc::IoFailure: return "IoFailure";
    case Errc::BadMagic: return "BadMagic";
    case Errc::UnsupportedVersion: return "UnsupportedVersion";
    case Errc::DigestMismatch: return "DigestMismatch";
    case Errc::TruncatedPayload: return "TruncatedPayload";
  }
  return "Unknown";
}

}  // namespace zeroleaf
