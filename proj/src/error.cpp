#include "hri/error.hpp"

namespace hri {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidInput: return "InvalidInput";
    case ErrorKind::EmptyCluster: return "EmptyCluster";
    case ErrorKind::ProtocolError: return "ProtocolError";
    case ErrorKind::MissingJoint: return "MissingJoint";
    case ErrorKind::DegenerateRay: return "DegenerateRay";
    case ErrorKind::NoCandidates: return "NoCandidates";
    case ErrorKind::UnrecognizedUtterance: return "UnrecognizedUtterance";
    case ErrorKind::ProtocolViolation: return "ProtocolViolation";
    case ErrorKind::IncompleteIntention: return "IncompleteIntention";
    case ErrorKind::TooManyActions: return "TooManyActions";
    case ErrorKind::UnknownTarget: return "UnknownTarget";
    case ErrorKind::Ungraspable: return "Ungraspable";
    case ErrorKind::UnsupportedIntention: return "UnsupportedIntention";
    case ErrorKind::PlannerUnavailable: return "PlannerUnavailable";
    case ErrorKind::InvalidToken: return "InvalidToken";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::EmptyPlan: return "EmptyPlan";
    case ErrorKind::PlanningFailed: return "PlanningFailed";
    case ErrorKind::InvalidSequence: return "InvalidSequence";
    case ErrorKind::SafetyGateViolation: return "SafetyGateViolation";
    case ErrorKind::StaleEvent: return "StaleEvent";
    case ErrorKind::NotFound: return "NotFound";
  }
  return "Unknown";
}

}  // namespace hri
