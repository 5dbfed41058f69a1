#include "flexens/error.hpp"

namespace flexens {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::MalformedManifest: return "MalformedManifest";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::NonFiniteLogit: return "NonFiniteLogit";
    case ErrorKind::LabelOutOfRange: return "LabelOutOfRange";
    case ErrorKind::NonPositiveCost: return "NonPositiveCost";
    case ErrorKind::IoFailure: return "IoFailure";
    case ErrorKind::RaggedRows: return "RaggedRows";
    case ErrorKind::ParseFailure: return "ParseFailure";
    case ErrorKind::InvalidConfig: return "InvalidConfig";
    case ErrorKind::NonFiniteInput: return "NonFiniteInput";
    case ErrorKind::EmptyList: return "EmptyList";
    case ErrorKind::LengthMismatch: return "LengthMismatch";
    case ErrorKind::TooFewClasses: return "TooFewClasses";
    case ErrorKind::ScheduleLengthMismatch: return "ScheduleLengthMismatch";
    case ErrorKind::InvalidSchedule: return "InvalidSchedule";
    case ErrorKind::SingleModelEnsemble: return "SingleModelEnsemble";
    case ErrorKind::InvalidEnsembleSize: return "InvalidEnsembleSize";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

}  // namespace flexens
