#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "arena/adjudication.hpp"
#include "arena/agents.hpp"
#include "arena/design_engine.hpp"
#include "arena/oracle.hpp"
#include "arena/serialize.hpp"
#include "arena/stimulus_space.hpp"

namespace arena {

struct RunConfig {
  StimulusSpace space;
  GroundTruth truth;
  std::vector<AgentDescriptor> agents;
  std::vector<TheoryFamily> theories;
  int cycles = 5;
  int seed_pool_budget = 64;
  int proposals_per_agent = 3;
  double stop_threshold = 0.95;
  std::uint64_t master_seed = 1;
  int divergence_top_n = 5;
  int mc_samples = 20000;
  double exact_cutoff = 200000;

  // Throws ArenaError(ConfigError) naming the first offending field.
  void check() const;
};

// GCM, RULEX and SUSTAIN families on their default grids, one max-divergence
// agent each, truth at the fiducial parameters of `truth`.
RunConfig default_run_config(ModelKind truth = ModelKind::Gcm, double epsilon = 0.0);

struct ProposalRecord {
  std::string agent_id;
  std::vector<std::string> accepted;
  std::vector<std::pair<std::string, std::string>> rejected;  // (design id, reason)
  std::string error;                                           // set when the agent was unavailable
};

struct RevisionSummary {
  std::string agent_id;
  std::size_t particles_before = 0;
  std::size_t particles_after = 0;
};

struct CycleRecord {
  int cycle = 0;
  std::size_t pool_size = 0;  // before proposals were added
  std::vector<PairSummary> divergence_summary;
  std::vector<ProposalRecord> proposals;
  std::vector<EigEstimate> eig_table;
  ExperimentDesign selected;
  EigEstimate selected_eig;
  std::vector<PredictiveProfile> predictions;  // per theory, registration order
  ResponseDataset responses;
  std::vector<TheoryFamily> theories;  // particles the update was computed over
  Posterior posterior_before;
  Posterior posterior_after;
  bool degenerate_evidence = false;
  std::vector<CritiqueRecord> critiques;
  std::vector<RevisionSummary> revisions;
  std::vector<std::string> agent_errors;
};

struct DebateTrace {
  std::string truth;
  double epsilon = 0.0;
  std::uint64_t master_seed = 0;
  std::vector<CycleRecord> cycles;
  Posterior final_posterior;
  AdjudicationVerdict verdict;
  std::string stop_reason;  // "threshold", "cycles" or "pool_exhausted"
};

Json to_json(const DebateTrace& trace);

// The full adversarial cycle, repeated until the cycle cap, the posterior
// threshold, or pool exhaustion. Deterministic given the config.
DebateTrace run_adjudication(const RunConfig& config);

// Recomputes every cycle's posterior from the recorded particles and
// datasets of a written trace. Returns posterior_after per cycle.
std::vector<Posterior> replay_posteriors(const Json& trace);

struct StudySpec {
  std::vector<std::string> truths;
  std::vector<double> epsilons;
  int replications = 1;
};

struct RecoveryRow {
  std::string truth;
  double epsilon = 0.0;
  int replication = 0;
  bool recovered = false;
  double margin = 0.0;
  int cycles_used = 0;
  std::string winner;
  Posterior final_posterior;
  std::string error;  // empty on success
};

struct RecoveryCell {
  std::string truth;
  double epsilon = 0.0;
  int runs = 0;
  double recovery_rate = 0.0;
  double mean_margin = 0.0;  // over runs without error
};

struct RecoveryTable {
  std::vector<RecoveryRow> rows;    // truth-major, then epsilon, then replication
  std::vector<RecoveryCell> cells;  // first-appearance order of (truth, epsilon)
};

// Cell aggregates in first-appearance order of (truth, epsilon).
std::vector<RecoveryCell> aggregate_rows(const std::vector<RecoveryRow>& rows);

std::uint64_t run_seed(std::uint64_t master_seed, const std::string& truth, double epsilon, int replication);

// Runs every (truth, epsilon, replication) cell of the grid. Ground-truth
// parameters come from `fiducials` (falling back to the built-in fiducial
// values of the truth's model kind). threads = 0 uses every hardware thread.
// Run failures are recorded in the row's error field.
RecoveryTable run_recovery_study(const StudySpec& spec, const RunConfig& base,
                                 const std::map<std::string, ParameterVector>& fiducials, std::uint64_t master_seed,
                                 int threads = 1, std::vector<DebateTrace>* traces = nullptr);

}  // namespace arena
