#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>

namespace cotox {

// Every failure the library raises carries one of these codes. The CLI maps
// the code's category onto its exit status.
enum class ErrorCode {
  // configuration
  ConfigError,
  MissingTemplateAsset,
  PreconditionViolation,
  // data
  UnknownToxicityType,
  UnknownVerdict,
  MissingColumn,
  BadVerdict,
  DuplicateCompoundId,
  MalformedRow,
  EmptyFile,
  DuplicateGene,
  NonNumericScore,
  TooFewEntries,
  EmptyTestSet,
  IllegalCombination,
  MissingStructure,
  WrongExampleCount,
  UnfilteredContext,
  PoolTooSmall,
  NoOverlap,
  FullOverlap,
  ZeroNormalizer,
  NoAdmissibleSets,
  UnlabeledCompound,
  IncompleteMap,
  TooFewCompounds,
  DivisionByZero,
  ExtractionFailure,
  SchemaFailure,
  VocabularyFailure,
  UnparseableFilterResponse,
  IoError,
  // provider / network
  NetworkError,
  RateLimited,
  ParseError,
  ProviderError,
  Timeout,
  ReplayMiss,
};

enum class ErrorCategory { Config, Data, Provider };

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::MissingTemplateAsset: return "MissingTemplateAsset";
    case ErrorCode::PreconditionViolation: return "PreconditionViolation";
    case ErrorCode::UnknownToxicityType: return "UnknownToxicityType";
    case ErrorCode::UnknownVerdict: return "UnknownVerdict";
    case ErrorCode::MissingColumn: return "MissingColumn";
    case ErrorCode::BadVerdict: return "BadVerdict";
    case ErrorCode::DuplicateCompoundId: return "DuplicateCompoundId";
    case ErrorCode::MalformedRow: return "MalformedRow";
    case ErrorCode::EmptyFile: return "EmptyFile";
    case ErrorCode::DuplicateGene: return "DuplicateGene";
    case ErrorCode::NonNumericScore: return "NonNumericScore";
    case ErrorCode::TooFewEntries: return "TooFewEntries";
    case ErrorCode::EmptyTestSet: return "EmptyTestSet";
    case ErrorCode::IllegalCombination: return "IllegalCombination";
    case ErrorCode::MissingStructure: return "MissingStructure";
    case ErrorCode::WrongExampleCount: return "WrongExampleCount";
    case ErrorCode::UnfilteredContext: return "UnfilteredContext";
    case ErrorCode::PoolTooSmall: return "PoolTooSmall";
    case ErrorCode::NoOverlap: return "NoOverlap";
    case ErrorCode::FullOverlap: return "FullOverlap";
    case ErrorCode::ZeroNormalizer: return "ZeroNormalizer";
    case ErrorCode::NoAdmissibleSets: return "NoAdmissibleSets";
    case ErrorCode::UnlabeledCompound: return "UnlabeledCompound";
    case ErrorCode::IncompleteMap: return "IncompleteMap";
    case ErrorCode::TooFewCompounds: return "TooFewCompounds";
    case ErrorCode::DivisionByZero: return "DivisionByZero";
    case ErrorCode::ExtractionFailure: return "ExtractionFailure";
    case ErrorCode::SchemaFailure: return "SchemaFailure";
    case ErrorCode::VocabularyFailure: return "VocabularyFailure";
    case ErrorCode::UnparseableFilterResponse: return "UnparseableFilterResponse";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::NetworkError: return "NetworkError";
    case ErrorCode::RateLimited: return "RateLimited";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::ProviderError: return "ProviderError";
    case ErrorCode::Timeout: return "Timeout";
    case ErrorCode::ReplayMiss: return "ReplayMiss";
  }
  return "Unknown";
}

constexpr ErrorCategory category_of(ErrorCode code) {
  switch (code) {
    case ErrorCode::ConfigError:
    case ErrorCode::MissingTemplateAsset:
    case ErrorCode::PreconditionViolation:
      return ErrorCategory::Config;
    case ErrorCode::NetworkError:
    case ErrorCode::RateLimited:
    case ErrorCode::ParseError:
    case ErrorCode::ProviderError:
    case ErrorCode::Timeout:
    case ErrorCode::ReplayMiss:
      return ErrorCategory::Provider;
    default:
      return ErrorCategory::Data;
  }
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, std::string detail)
      : std::runtime_error(std::string(to_string(code)) + ": " + detail),
        code_(code),
        detail_(std::move(detail)) {}

  ErrorCode code() const noexcept { return code_; }
  ErrorCategory category() const noexcept { return category_of(code_); }
  // The payload without the code prefix, e.g. the missing column name.
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

}  // namespace cotox
