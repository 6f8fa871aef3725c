#include "arena/stimulus_space.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <numeric>

#include "arena/error.hpp"
#include "arena/rng.hpp"

namespace arena {

int Stimulus::id() const noexcept {
  int rank = 0;
  for (std::uint8_t f : features) rank = (rank << 1) | (f & 1);
  return rank;
}

Stimulus Stimulus::from_rank(int rank, int dims) {
  Stimulus s;
  s.features.resize(static_cast<std::size_t>(dims));
  for (int k = 0; k < dims; ++k) {
    s.features[static_cast<std::size_t>(k)] = static_cast<std::uint8_t>((rank >> (dims - 1 - k)) & 1);
  }
  return s;
}

void StimulusSpace::check() const {
  auto fail = [](const char* field, const char* why) {
    throw ArenaError(ErrorCode::ConfigError, std::string(field) + ": " + why);
  };
  if (dims < 1 || dims > 8) fail("space.dims", "must be in [1, 8]");
  if (categories < 2) fail("space.categories", "must be >= 2");
  if (max_train_items < categories || max_train_items > size())
    fail("space.max_train_items", "must be in [categories, 2^dims]");
  if (max_test_items < 1 || max_test_items > size()) fail("space.max_test_items", "must be in [1, 2^dims]");
  if (trials_per_test_item < 1) fail("space.trials_per_test_item", "must be >= 1");
}

std::string design_fingerprint(const ExperimentDesign& design) {
  std::string canon;
  canon.reserve(16 * (design.training.size() + design.test_items.size()));
  canon += "train:";
  for (const auto& item : design.training) {
    for (auto f : item.stimulus.features) canon += static_cast<char>('0' + f);
    canon += '=';
    canon += std::to_string(item.label);
    canon += ';';
  }
  canon += "test:";
  for (const auto& s : design.test_items) {
    for (auto f : s.features) canon += static_cast<char>('0' + f);
    canon += ';';
  }
  canon += "n:" + std::to_string(design.trials_per_item);
  canon += ";k:" + std::to_string(design.categories);
  std::array<char, 20> buf{};
  std::snprintf(buf.data(), buf.size(), "d%016llx", static_cast<unsigned long long>(mix64(fnv1a64(canon))));
  return buf.data();
}

ExperimentDesign make_design(std::string proposer, std::vector<TrainingItem> training,
                             std::vector<Stimulus> test_items, int trials_per_item, int categories) {
  ExperimentDesign d;
  d.categories = categories;
  d.proposer = std::move(proposer);
  d.training = std::move(training);
  d.test_items = std::move(test_items);
  d.trials_per_item = trials_per_item;
  d.id = design_fingerprint(d);
  return d;
}

std::string_view to_string(Violation v) {
  switch (v) {
    case Violation::MissingCategory: return "MISSING_CATEGORY";
    case Violation::ConflictingLabel: return "CONFLICTING_LABEL";
    case Violation::DimMismatch: return "DIM_MISMATCH";
    case Violation::SizeExceeded: return "SIZE_EXCEEDED";
    case Violation::EmptyTestSet: return "EMPTY_TEST_SET";
  }
  return "UNKNOWN";
}

bool ValidityReport::has(Violation v) const {
  return std::find(violations.begin(), violations.end(), v) != violations.end();
}

namespace {

bool conforms(const Stimulus& s, const StimulusSpace& space) {
  if (static_cast<int>(s.features.size()) != space.dims) return false;
  return std::all_of(s.features.begin(), s.features.end(), [](std::uint8_t f) { return f <= 1; });
}

}  // namespace

ValidityReport validate_design(const ExperimentDesign& design, const StimulusSpace& space) {
  bool missing = false, conflict = false, dim = design.categories != space.categories, size = false, empty = false;

  std::vector<bool> seen(static_cast<std::size_t>(std::max(space.categories, 0)), false);
  for (const auto& item : design.training) {
    if (!conforms(item.stimulus, space) || item.label < 0 || item.label >= space.categories) {
      dim = true;
      continue;
    }
    seen[static_cast<std::size_t>(item.label)] = true;
  }
  missing = std::find(seen.begin(), seen.end(), false) != seen.end();

  for (std::size_t a = 0; a < design.training.size() && !conflict; ++a) {
    for (std::size_t b = a + 1; b < design.training.size(); ++b) {
      if (design.training[a].stimulus == design.training[b].stimulus &&
          design.training[a].label != design.training[b].label) {
        conflict = true;
        break;
      }
    }
  }

  for (const auto& s : design.test_items) dim = dim || !conforms(s, space);

  size = static_cast<int>(design.training.size()) > space.max_train_items ||
         static_cast<int>(design.test_items.size()) > space.max_test_items;
  // A design with no trials yields no observations, same as an empty test set.
  empty = design.test_items.empty() || design.trials_per_item < 1;

  ValidityReport report;
  if (missing) report.violations.push_back(Violation::MissingCategory);
  if (conflict) report.violations.push_back(Violation::ConflictingLabel);
  if (dim) report.violations.push_back(Violation::DimMismatch);
  if (size) report.violations.push_back(Violation::SizeExceeded);
  if (empty) report.violations.push_back(Violation::EmptyTestSet);
  report.valid = report.violations.empty();
  return report;
}

namespace {

// Advances a combination (strictly increasing indices in [0, n)) to its
// lexicographic successor. Returns false after the last one.
bool next_combination(std::vector<int>& combo, int n) {
  const int r = static_cast<int>(combo.size());
  int i = r - 1;
  while (i >= 0 && combo[static_cast<std::size_t>(i)] == n - r + i) --i;
  if (i < 0) return false;
  ++combo[static_cast<std::size_t>(i)];
  for (int j = i + 1; j < r; ++j) combo[static_cast<std::size_t>(j)] = combo[static_cast<std::size_t>(j - 1)] + 1;
  return true;
}

// Base-K odometer with the first position most significant.
bool next_assignment(std::vector<int>& labels, int k) {
  for (int i = static_cast<int>(labels.size()) - 1; i >= 0; --i) {
    auto& l = labels[static_cast<std::size_t>(i)];
    if (++l < k) return true;
    l = 0;
  }
  return false;
}

}  // namespace

std::vector<ExperimentDesign> enumerate_designs(const StimulusSpace& space, int budget) {
  if (budget < 1) throw ArenaError(ErrorCode::InvalidBudget, "budget must be >= 1");
  space.check();

  std::vector<Stimulus> test;
  for (int r = 0; r < space.max_test_items; ++r) test.push_back(Stimulus::from_rank(r, space.dims));

  std::vector<ExperimentDesign> out;
  const int n = space.size();
  for (int set_size = space.max_train_items; set_size >= space.categories; --set_size) {
    std::vector<int> combo(static_cast<std::size_t>(set_size));
    std::iota(combo.begin(), combo.end(), 0);
    do {
      std::vector<int> labels(combo.size(), 0);
      do {
        std::vector<bool> used(static_cast<std::size_t>(space.categories), false);
        for (int l : labels) used[static_cast<std::size_t>(l)] = true;
        if (std::find(used.begin(), used.end(), false) != used.end()) continue;

        std::vector<TrainingItem> training;
        training.reserve(combo.size());
        for (std::size_t i = 0; i < combo.size(); ++i) {
          training.push_back({Stimulus::from_rank(combo[i], space.dims), labels[i]});
        }
        out.push_back(make_design(std::string(kSeedPoolProposer), std::move(training), test,
                                  space.trials_per_test_item, space.categories));
        if (static_cast<int>(out.size()) == budget) return out;
      } while (next_assignment(labels, space.categories));
    } while (next_combination(combo, n));
  }
  return out;
}

ExperimentDesign shj_fixture(int type, int trials_per_item) {
  // Category A members (stimulus ranks over f1 f2 f3) for Types I..VI.
  static constexpr std::array<std::array<int, 4>, 6> kCategoryA = {{
      {0, 1, 2, 3},  // I: f1 = 0
      {0, 1, 6, 7},  // II: f1 xor f2 = 0
      {0, 1, 2, 5},  // III
      {0, 1, 2, 4},  // IV: family resemblance around 000
      {0, 1, 2, 7},  // V
      {0, 3, 5, 6},  // VI: even parity
  }};
  if (type < 1 || type > 6) throw ArenaError(ErrorCode::InvalidType, "SHJ type must be in [1, 6]");
  const auto& members = kCategoryA[static_cast<std::size_t>(type - 1)];

  std::vector<TrainingItem> training;
  std::vector<Stimulus> test;
  for (int r = 0; r < 8; ++r) {
    const bool in_a = std::find(members.begin(), members.end(), r) != members.end();
    training.push_back({Stimulus::from_rank(r, 3), in_a ? 0 : 1});
    test.push_back(Stimulus::from_rank(r, 3));
  }
  auto design = make_design("fixture", std::move(training), std::move(test), trials_per_item);
  design.id = "shj-" + std::to_string(type);
  return design;
}

std::vector<TrainingItem> canonical_training_order(const ExperimentDesign& design) {
  auto items = design.training;
  std::stable_sort(items.begin(), items.end(), [](const TrainingItem& a, const TrainingItem& b) {
    return a.stimulus.features < b.stimulus.features;
  });
  return items;
}

}  // namespace arena
