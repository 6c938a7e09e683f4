#include "batchrl/error.hpp"

namespace batchrl {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::DuplicateName: return "DuplicateName";
    case ErrorCode::ZeroDimension: return "ZeroDimension";
    case ErrorCode::StoreFinalized: return "StoreFinalized";
    case ErrorCode::StoreNotFinalized: return "StoreNotFinalized";
    case ErrorCode::EmptyStore: return "EmptyStore";
    case ErrorCode::UnknownName: return "UnknownName";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::SlotOutOfRange: return "SlotOutOfRange";
    case ErrorCode::ReadOnly: return "ReadOnly";
    case ErrorCode::KindMismatch: return "KindMismatch";
    case ErrorCode::UnknownEnvironment: return "UnknownEnvironment";
    case ErrorCode::InvalidParams: return "InvalidParams";
    case ErrorCode::InvalidAction: return "InvalidAction";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::OutOfSupport: return "OutOfSupport";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::OutOfMemoryBudget: return "OutOfMemoryBudget";
    case ErrorCode::InsufficientPoints: return "InsufficientPoints";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace batchrl
