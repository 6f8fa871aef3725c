#include "arena/oracle.hpp"

#include <numeric>

#include "arena/rng.hpp"

namespace arena {

int ResponseDataset::total_trials() const noexcept {
  int total = 0;
  for (const auto& row : counts) total = std::accumulate(row.begin(), row.end(), total);
  return total;
}

ResponseDataset generate_responses(const GroundTruth& truth, const ExperimentDesign& design, std::uint64_t seed) {
  return sample_responses(predict(truth.params, design), design, truth.epsilon, seed);
}

ResponseDataset sample_responses(const PredictiveProfile& profile, const ExperimentDesign& design, double epsilon,
                                 std::uint64_t seed) {
  const auto lapsed = apply_lapse(profile, epsilon);

  ResponseDataset data;
  data.design_id = design.id;
  data.items = design.test_items;
  data.counts.reserve(lapsed.items.size());

  for (std::size_t i = 0; i < lapsed.items.size(); ++i) {
    const auto& p = lapsed.items[i];
    CounterRng rng(derive_key(seed, design.id, static_cast<std::uint64_t>(i)));
    std::vector<int> row(p.size(), 0);
    for (int t = 0; t < design.trials_per_item; ++t) {
      const double u = rng.uniform();
      double cumulative = 0.0;
      std::size_t chosen = p.size() - 1;
      for (std::size_t c = 0; c < p.size(); ++c) {
        cumulative += p[c];
        if (u < cumulative) {
          chosen = c;
          break;
        }
      }
      // Never land on a zero-probability category through rounding slack.
      while (p[chosen] <= 0.0 && chosen > 0) --chosen;
      ++row[chosen];
    }
    data.counts.push_back(std::move(row));
  }
  return data;
}

}  // namespace arena
