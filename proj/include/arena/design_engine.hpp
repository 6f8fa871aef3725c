#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "arena/adjudication.hpp"
#include "arena/models.hpp"
#include "arena/stimulus_space.hpp"

namespace arena {

struct DivergenceEntry {
  std::string design_id;
  std::string theory_a;
  std::string theory_b;
  double value = 0.0;  // mean per-item Jensen-Shannon divergence, nats
};

struct PairSummary {
  std::string theory_a;
  std::string theory_b;
  std::vector<DivergenceEntry> top;  // descending value, ties by design id
};

struct DivergenceMap {
  std::vector<DivergenceEntry> entries;  // design-major, pairs in registration order
  std::vector<PairSummary> summary;

  // Divergence of one design for the unordered pair {a, b}; 0 if absent.
  double value(const std::string& design_id, const std::string& a, const std::string& b) const;
};

// Jensen-Shannon divergence with natural logarithms.
double jensen_shannon(std::span<const double> p, std::span<const double> q);

// Mixture profiles for every theory (outer index) on one design.
using TheoryProfiles = std::vector<PredictiveProfile>;

TheoryProfiles theory_profiles(const std::vector<TheoryFamily>& theories, const ExperimentDesign& design);

DivergenceMap divergence_map(const std::vector<TheoryFamily>& theories, std::span<const ExperimentDesign> pool,
                             int top_n = 5);

// Same, reusing profiles computed by theory_profiles (profiles[d] for pool[d]).
DivergenceMap divergence_map(const std::vector<TheoryFamily>& theories, std::span<const ExperimentDesign> pool,
                             std::span<const TheoryProfiles> profiles, int top_n = 5);

enum class EigMethod { Exact, MonteCarlo };

std::string_view to_string(EigMethod method);

struct EigEstimate {
  std::string design_id;
  double value = 0.0;  // nats
  EigMethod method = EigMethod::Exact;
  int mc_samples = 0;
};

struct EigOptions {
  int mc_samples = 20000;
  double exact_cutoff = 200000;  // largest joint outcome space enumerated exactly
  std::uint64_t seed = 0;        // MC stream key base; the design's content is folded in
};

// Number of distinct joint count outcomes: product over items of C(n+K-1, K-1).
double outcome_space_size(const ExperimentDesign& design);

// Mutual information between the theory indicator and the design's count
// outcome. Each theory predicts independent trials from its lapsed
// particle-mixture profile.
EigEstimate expected_information_gain(const Posterior& prior, const std::vector<TheoryFamily>& theories,
                                      const ExperimentDesign& design, double epsilon, const EigOptions& options = {});

EigEstimate expected_information_gain(const Posterior& prior, const std::vector<TheoryFamily>& theories,
                                      const ExperimentDesign& design, const TheoryProfiles& profiles, double epsilon,
                                      const EigOptions& options = {});

struct Selection {
  ExperimentDesign design;
  EigEstimate estimate;
  std::vector<EigEstimate> table;  // one estimate per pool design, pool order
};

// Argmax EIG; ties go to the lexicographically smallest design id.
Selection select_experiment(std::span<const ExperimentDesign> pool, const Posterior& prior,
                            const std::vector<TheoryFamily>& theories, double epsilon, const EigOptions& options = {});

Selection select_experiment(std::span<const ExperimentDesign> pool, std::span<const TheoryProfiles> profiles,
                            const Posterior& prior, const std::vector<TheoryFamily>& theories, double epsilon,
                            const EigOptions& options = {});

}  // namespace arena
