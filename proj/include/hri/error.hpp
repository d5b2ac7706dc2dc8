#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace hri {

enum class ErrorKind {
  InvalidInput,
  EmptyCluster,
  ProtocolError,
  MissingJoint,
  DegenerateRay,
  NoCandidates,
  UnrecognizedUtterance,
  ProtocolViolation,
  IncompleteIntention,
  TooManyActions,
  UnknownTarget,
  Ungraspable,
  UnsupportedIntention,
  PlannerUnavailable,
  InvalidToken,
  InvalidArgument,
  EmptyPlan,
  PlanningFailed,
  InvalidSequence,
  SafetyGateViolation,
  StaleEvent,
  NotFound,
};

std::string_view to_string(ErrorKind kind);

/// Exception type carried by every module. `kind()` is the stable,
/// machine-readable part; `what()` is for humans.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace hri
