#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace arena {

using Label = int;

// A point in a D-dimensional binary feature space. The id is the rank of the
// feature vector read as a binary number with feature 1 most significant, so
// equal ids always mean equal features.
struct Stimulus {
  std::vector<std::uint8_t> features;

  int id() const noexcept;
  std::size_t dims() const noexcept { return features.size(); }

  static Stimulus from_rank(int rank, int dims);

  friend bool operator==(const Stimulus&, const Stimulus&) = default;
  friend auto operator<=>(const Stimulus&, const Stimulus&) = default;
};

struct TrainingItem {
  Stimulus stimulus;
  Label label = 0;

  friend bool operator==(const TrainingItem&, const TrainingItem&) = default;
};

struct StimulusSpace {
  int dims = 3;
  int categories = 2;
  int max_train_items = 8;
  int max_test_items = 8;
  int trials_per_test_item = 8;

  int size() const noexcept { return 1 << dims; }
  // Throws ArenaError(ConfigError) naming the offending field.
  void check() const;
};

struct ExperimentDesign {
  std::string id;
  std::string proposer;
  std::vector<TrainingItem> training;
  std::vector<Stimulus> test_items;
  int trials_per_item = 8;
  // K, the number of response categories. Must match the space.
  int categories = 2;

  friend bool operator==(const ExperimentDesign&, const ExperimentDesign&) = default;
};

inline constexpr std::string_view kSeedPoolProposer = "seed-pool";

// Content key over training, test items, trial count and K (id and proposer
// excluded). Identical experiments get identical keys.
std::string design_fingerprint(const ExperimentDesign& design);

// Builds a design whose id is its content fingerprint.
ExperimentDesign make_design(std::string proposer, std::vector<TrainingItem> training,
                             std::vector<Stimulus> test_items, int trials_per_item, int categories = 2);

enum class Violation {
  MissingCategory,
  ConflictingLabel,
  DimMismatch,
  SizeExceeded,
  EmptyTestSet,
};

std::string_view to_string(Violation v);

struct ValidityReport {
  bool valid = true;
  std::vector<Violation> violations;

  bool has(Violation v) const;
};

// Reports every kind of violation present, each at most once, in the order
// of the Violation enumeration.
ValidityReport validate_design(const ExperimentDesign& design, const StimulusSpace& space);

// Deterministic canonical enumeration of valid designs, truncated at budget.
// Training sets are visited largest first, then in lexicographic order of
// their sorted stimulus ranks; within a set, label assignments are visited in
// base-K rank order (first item most significant), skipping assignments that
// leave a category empty. Every design tests the first max_test_items stimuli.
std::vector<ExperimentDesign> enumerate_designs(const StimulusSpace& space, int budget);

// The six Shepard-Hovland-Jenkins structures over three binary dimensions.
ExperimentDesign shj_fixture(int type, int trials_per_item = 8);

// Training items in canonical presentation order (by stimulus rank, stable).
std::vector<TrainingItem> canonical_training_order(const ExperimentDesign& design);

}  // namespace arena
