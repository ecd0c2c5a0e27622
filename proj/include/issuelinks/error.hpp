#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace issuelinks {

enum class ErrorKind {
  MalformedRecord,
  SelfLink,
  RepoTooSmall,
  InsufficientCandidates,
  StratificationImpossible,
  EmptyCorpus,
  DegenerateTraining,
  DimensionMismatch,
  EmptyPredictions,
  UnknownLabel,
  MissingScores,
  InvalidArgument,
  SchemaError,
  CoverageError,
  ConstantSeries,
  LengthMismatch,
  Io,
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::MalformedRecord: return "MalformedRecord";
    case ErrorKind::SelfLink: return "SelfLink";
    case ErrorKind::RepoTooSmall: return "RepoTooSmall";
    case ErrorKind::InsufficientCandidates: return "InsufficientCandidates";
    case ErrorKind::StratificationImpossible: return "StratificationImpossible";
    case ErrorKind::EmptyCorpus: return "EmptyCorpus";
    case ErrorKind::DegenerateTraining: return "DegenerateTraining";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::EmptyPredictions: return "EmptyPredictions";
    case ErrorKind::UnknownLabel: return "UnknownLabel";
    case ErrorKind::MissingScores: return "MissingScores";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::SchemaError: return "SchemaError";
    case ErrorKind::CoverageError: return "CoverageError";
    case ErrorKind::ConstantSeries: return "ConstantSeries";
    case ErrorKind::LengthMismatch: return "LengthMismatch";
    case ErrorKind::Io: return "Io";
  }
  return "Unknown";
}

/// Every failure raised by the library carries a machine-checkable kind.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace issuelinks
