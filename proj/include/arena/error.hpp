#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace arena {

enum class ErrorCode {
  InvalidBudget,
  InvalidType,
  TheoryMismatch,
  InvalidLapse,
  DegenerateParticles,
  DesignMismatch,
  UnknownTheory,
  EmptyPool,
  AgentUnavailable,
  ConfigError,
  SchemaError,
};

std::string_view to_string(ErrorCode code);

// Every failure raised by the library carries one of the codes above.
class ArenaError : public std::runtime_error {
 public:
  ArenaError(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace arena
