#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mebn {

enum class ErrorCode {
  // core model
  InvalidIdentifier,
  DuplicateIdentifier,
  UnknownType,
  ArityMismatch,
  UnboundParameter,
  TypeViolation,
  // local distributions
  IncompleteWorld,
  NegativeResidual,
  MassError,
  // theory format
  Parse,
  UnknownRV,
  UnknownIdentifier,
  InvalidValue,
  // validation
  Validation,
  // grounding
  UnresolvableContext,
  LimitExceeded,
  UnknownTarget,
  // inference
  InconsistentEvidence,
  StateSpaceTooLarge,
  // logical builtins
  EmptyDomain,
  Io,
};

std::string_view to_string(ErrorCode code);

/// Every engine failure is reported as an Error carrying a code; the pipeline
/// stage ("parse", "validate", "ground", "infer") is attached by answer_query.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}
  Error(ErrorCode code, std::string stage, const std::string& message)
      : std::runtime_error(message), code_(code), stage_(std::move(stage)) {}

  ErrorCode code() const noexcept { return code_; }
  const std::string& stage() const noexcept { return stage_; }

 private:
  ErrorCode code_;
  std::string stage_;
};

}  // namespace mebn
