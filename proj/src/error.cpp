#include "arena/error.hpp"

namespace arena {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidBudget: return "INVALID_BUDGET";
    case ErrorCode::InvalidType: return "INVALID_TYPE";
    case ErrorCode::TheoryMismatch: return "THEORY_MISMATCH";
    case ErrorCode::InvalidLapse: return "INVALID_LAPSE";
    case ErrorCode::DegenerateParticles: return "DEGENERATE_PARTICLES";
    case ErrorCode::DesignMismatch: return "DESIGN_MISMATCH";
    case ErrorCode::UnknownTheory: return "UNKNOWN_THEORY";
    case ErrorCode::EmptyPool: return "EMPTY_POOL";
    case ErrorCode::AgentUnavailable: return "AGENT_UNAVAILABLE";
    case ErrorCode::ConfigError: return "CONFIG_ERROR";
    case ErrorCode::SchemaError: return "SCHEMA_ERROR";
  }
  return "UNKNOWN";
}

}  // namespace arena
