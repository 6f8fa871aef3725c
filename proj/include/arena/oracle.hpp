#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "arena/models.hpp"
#include "arena/stimulus_space.hpp"

namespace arena {

// Observed response counts per test item; each row has K entries summing to
// the design's trials_per_item.
struct ResponseDataset {
  std::string design_id;
  std::vector<Stimulus> items;
  std::vector<std::vector<int>> counts;

  int total_trials() const noexcept;

  friend bool operator==(const ResponseDataset&, const ResponseDataset&) = default;
};

// The synthetic participant: a model instance plus the lapse rate epsilon
// (probability that a trial's response is uniformly random).
struct GroundTruth {
  std::string theory_id;
  ParameterVector params;
  double epsilon = 0.0;
};

// Simulates trials_per_item independent responses to every test item. Item i
// draws from a counter-based stream keyed by (seed, design id, i), so results
// do not depend on evaluation order.
ResponseDataset generate_responses(const GroundTruth& truth, const ExperimentDesign& design, std::uint64_t seed);

// Same as above from an already-computed (unlapsed) profile.
ResponseDataset sample_responses(const PredictiveProfile& profile, const ExperimentDesign& design, double epsilon,
                                 std::uint64_t seed);

}  // namespace arena
