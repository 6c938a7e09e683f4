#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace batchrl {

enum class ErrorCode {
  // tensor store
  DuplicateName,
  ZeroDimension,
  StoreFinalized,
  StoreNotFinalized,
  EmptyStore,
  UnknownName,
  IndexOutOfRange,
  SlotOutOfRange,
  ReadOnly,
  KindMismatch,
  // engine / environments
  UnknownEnvironment,
  InvalidParams,
  InvalidAction,
  // policy / trainer
  ShapeMismatch,
  OutOfSupport,
  NonFiniteLoss,
  // bench
  OutOfMemoryBudget,
  InsufficientPoints,
  // io / config
  ConfigError,
  IoError,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Every failure raised by the library carries one of the codes above so
/// callers (and tests) can branch on the kind without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace batchrl
