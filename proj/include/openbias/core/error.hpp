#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <type_traits>

namespace openbias {

enum class ErrorKind {
  InvariantViolation,
  NoNeutralOption,
  MultipleNeutralOptions,
  SequenceOverflow,
  ShapeMismatch,
  NumericalFault,
  UnknownAdapter,
  FewerThanTwoAdapters,
  IndexOutOfRange,
  KTooSmall,
  CategoryUnderflow,
  EmptySelection,
  MissingStereotypeAnnotation,
  EmptyInput,
  LengthMismatch,
  InvalidP,
  ProviderFailure,
  ParseFailure,
  RewriteRejected,
  AnswerNotInClasses,
  DegenerateData,
  UnknownClusterId,
  DuplicateSource,
  PreconditionFailed,
  ConfigError,
  IoError,
};

constexpr std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvariantViolation: return "InvariantViolation";
    case ErrorKind::NoNeutralOption: return "NoNeutralOption";
    case ErrorKind::MultipleNeutralOptions: return "MultipleNeutralOptions";
    case ErrorKind::SequenceOverflow: return "SequenceOverflow";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::NumericalFault: return "NumericalFault";
    case ErrorKind::UnknownAdapter: return "UnknownAdapter";
    case ErrorKind::FewerThanTwoAdapters: return "FewerThanTwoAdapters";
    case ErrorKind::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorKind::KTooSmall: return "KTooSmall";
    case ErrorKind::CategoryUnderflow: return "CategoryUnderflow";
    case ErrorKind::EmptySelection: return "EmptySelection";
    case ErrorKind::MissingStereotypeAnnotation: return "MissingStereotypeAnnotation";
    case ErrorKind::EmptyInput: return "EmptyInput";
    case ErrorKind::LengthMismatch: return "LengthMismatch";
    case ErrorKind::InvalidP: return "InvalidP";
    case ErrorKind::ProviderFailure: return "ProviderFailure";
    case ErrorKind::ParseFailure: return "ParseFailure";
    case ErrorKind::RewriteRejected: return "RewriteRejected";
    case ErrorKind::AnswerNotInClasses: return "AnswerNotInClasses";
    case ErrorKind::DegenerateData: return "DegenerateData";
    case ErrorKind::UnknownClusterId: return "UnknownClusterId";
    case ErrorKind::DuplicateSource: return "DuplicateSource";
    case ErrorKind::PreconditionFailed: return "PreconditionFailed";
    case ErrorKind::ConfigError: return "ConfigError";
    case ErrorKind::IoError: return "IoError";
  }
  return "Unknown";
}

/// Single exception type for the library; `kind()` identifies the failure.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

inline void require(bool condition, ErrorKind kind, const std::string& message) {
  if (!condition) fail(kind, message);
}

/// Builds the message only on failure; for checks on hot paths.
template <typename MessageFn>
  requires std::is_invocable_r_v<std::string, MessageFn>
inline void require(bool condition, ErrorKind kind, MessageFn&& message) {
  if (!condition) fail(kind, message());
}

}  // namespace openbias
