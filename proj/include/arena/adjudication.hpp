#pragma once

#include <map>
#include <string>
#include <vector>

#include "arena/models.hpp"
#include "arena/oracle.hpp"

namespace arena {

// Belief over registered theories, keyed by theory id (ordered lexicographically).
using Posterior = std::map<std::string, double>;

Posterior uniform_posterior(const std::vector<TheoryFamily>& theories);

// Shannon entropy in nats.
double entropy(const Posterior& posterior);

// Multinomial log-likelihood of the counts under the lapsed profile, without
// the multinomial coefficient. A zero-probability category contributes -inf
// only when it was actually observed.
double log_likelihood(const PredictiveProfile& profile, const ResponseDataset& data, double epsilon);

struct PosteriorUpdate {
  Posterior posterior;
  std::vector<TheoryFamily> theories;  // particle weights renormalized within each theory
  bool degenerate_evidence = false;    // every joint mass was zero; prior returned unchanged
};

// Joint Bayes over (theory, particle) in log space.
PosteriorUpdate update_posterior(const Posterior& prior, const std::vector<TheoryFamily>& theories,
                                 const ExperimentDesign& design, const ResponseDataset& data, double epsilon);

// Variant taking precomputed per-particle log-likelihoods, one row per theory.
PosteriorUpdate update_posterior_from_loglik(const Posterior& prior, const std::vector<TheoryFamily>& theories,
                                             const std::vector<std::vector<double>>& particle_loglik);

struct AdjudicationVerdict {
  std::string winner;
  double margin = 0.0;  // P(truth) - max P(rival)
  bool recovered = false;
};

AdjudicationVerdict verdict(const Posterior& posterior, const std::string& truth);

}  // namespace arena
