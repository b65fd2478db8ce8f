#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace wtad {

enum class ErrorKind {
  MissingColumn,
  BadTimestamp,
  BadValue,
  EmptyFile,
  EmptyResult,
  EmptyInput,
  NoFeaturesLeft,
  BadArchitecture,
  ShapeMismatch,
  SchemaMismatch,
  LengthMismatch,
  BadArtifact,
  BadSpec,
  BadWindow,
  BadSchema,
  IoFailure,
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::MissingColumn: return "MissingColumn";
    case ErrorKind::BadTimestamp: return "BadTimestamp";
    case ErrorKind::BadValue: return "BadValue";
    case ErrorKind::EmptyFile: return "EmptyFile";
    case ErrorKind::EmptyResult: return "EmptyResult";
    case ErrorKind::EmptyInput: return "EmptyInput";
    case ErrorKind::NoFeaturesLeft: return "NoFeaturesLeft";
    case ErrorKind::BadArchitecture: return "BadArchitecture";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::SchemaMismatch: return "SchemaMismatch";
    case ErrorKind::LengthMismatch: return "LengthMismatch";
    case ErrorKind::BadArtifact: return "BadArtifact";
    case ErrorKind::BadSpec: return "BadSpec";
    case ErrorKind::BadWindow: return "BadWindow";
    case ErrorKind::BadSchema: return "BadSchema";
    case ErrorKind::IoFailure: return "IoFailure";
  }
  return "Unknown";
}

/// Single exception type for the library; callers dispatch on kind().
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace wtad
