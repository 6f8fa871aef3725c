#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "arena/adjudication.hpp"
#include "arena/design_engine.hpp"
#include "arena/rng.hpp"
#include "arena/serialize.hpp"
#include "arena/stimulus_space.hpp"

namespace arena {

enum class AgentKind { ScriptedMaxDiv, ScriptedRandom, External };

std::string_view to_string(AgentKind kind);
std::optional<AgentKind> parse_agent_kind(std::string_view name);

struct RevisionPolicy {
  int top_k = 8;                    // particles kept per revision
  double perturbation_scale = 0.1;  // sd of the log-scale multiplicative jitter
};

// Child process speaking the line protocol on its stdin/stdout.
struct ExternalCommand {
  std::vector<std::string> argv;
  int timeout_ms = 10000;
};

struct AgentDescriptor {
  std::string agent_id;
  std::string theory_id;
  AgentKind kind = AgentKind::ScriptedMaxDiv;
  RevisionPolicy revision;
  ExternalCommand external;
};

enum class ClaimCode { Overfit, Underpredicted, Consistent };

std::string_view to_string(ClaimCode code);
std::optional<ClaimCode> parse_claim_code(std::string_view name);

struct Claim {
  std::string rival;
  ClaimCode code = ClaimCode::Consistent;
};

struct CritiqueRecord {
  std::string agent_id;
  int cycle = 0;
  std::string text;
  std::vector<Claim> claims;
};

// What an agent sees after a cycle: beliefs before and after, plus the raw
// outcome. No verdict is included.
struct CycleEvidence {
  int cycle = 0;
  Posterior before;
  Posterior after;
  ResponseDataset outcome;
};

struct ProposalRequest {
  const DivergenceMap& divergence;
  std::span<const ExperimentDesign> pool;
  const StimulusSpace& space;
  int count = 1;
  std::uint64_t rng_key = 0;
};

class TheoryAgent {
 public:
  explicit TheoryAgent(AgentDescriptor descriptor) : descriptor_(std::move(descriptor)) {}
  virtual ~TheoryAgent() = default;
  TheoryAgent(const TheoryAgent&) = delete;
  TheoryAgent& operator=(const TheoryAgent&) = delete;

  const AgentDescriptor& descriptor() const noexcept { return descriptor_; }

  // Proposed designs. External agents' replies are already validated here;
  // scripted agents only ever emit valid designs.
  virtual std::vector<ExperimentDesign> propose_experiments(const ProposalRequest& request) = 0;
  virtual CritiqueRecord critique(const CycleEvidence& evidence) = 0;

 protected:
  AgentDescriptor descriptor_;
};

// Request/response transport for external agents. Implementations throw
// ArenaError(AgentUnavailable) on transport failure or timeout.
class AgentChannel {
 public:
  virtual ~AgentChannel() = default;
  virtual Json exchange(const Json& request, int timeout_ms) = 0;
};

// Spawns argv as a child process; one JSON message per line each way.
std::unique_ptr<AgentChannel> spawn_process_channel(const std::vector<std::string>& argv);

inline constexpr std::string_view kProtocolVersion = "v1";

std::unique_ptr<TheoryAgent> make_agent(const AgentDescriptor& descriptor);
std::unique_ptr<TheoryAgent> make_external_agent(const AgentDescriptor& descriptor, std::unique_ptr<AgentChannel> channel);

// Keeps the top_k particles by weight and adds one jittered neighbour per
// kept particle; all resulting particles get equal weight.
TheoryFamily revise_particles(const AgentDescriptor& agent, const TheoryFamily& theory, std::uint64_t rng_key);

// Template critique used by scripted agents: a rival whose posterior fell
// gets CONSISTENT, otherwise UNDERPREDICTED.
CritiqueRecord scripted_critique(const AgentDescriptor& agent, const CycleEvidence& evidence);

// One random edit (a training label or a training feature). May yield an
// invalid design; callers validate.
ExperimentDesign mutate_design(const ExperimentDesign& design, const StimulusSpace& space, CounterRng& rng,
                               const std::string& proposer);

// Uniform draw from the set enumerate_designs would produce without a budget.
ExperimentDesign sample_design(const StimulusSpace& space, CounterRng& rng, const std::string& proposer);

}  // namespace arena
