#include "arena/adjudication.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "arena/error.hpp"

namespace arena {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
}

Posterior uniform_posterior(const std::vector<TheoryFamily>& theories) {
  Posterior p;
  for (const auto& t : theories) p[t.id] = 1.0 / static_cast<double>(theories.size());
  return p;
}

double entropy(const Posterior& posterior) {
  double h = 0.0;
  for (const auto& [id, p] : posterior) {
    if (p > 0.0) h -= p * std::log(p);
  }
  return h;
}

double log_likelihood(const PredictiveProfile& profile, const ResponseDataset& data, double epsilon) {
  if (profile.design_id != data.design_id || profile.items.size() != data.counts.size()) {
    throw ArenaError(ErrorCode::DesignMismatch,
                     "profile for '" + profile.design_id + "' scored against data for '" + data.design_id + "'");
  }
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw ArenaError(ErrorCode::InvalidLapse, "lapse rate must lie in [0, 1]");

  double total = 0.0;
  for (std::size_t i = 0; i < data.counts.size(); ++i) {
    const auto& p = profile.items[i];
    const auto& n = data.counts[i];
    if (p.size() != n.size()) throw ArenaError(ErrorCode::DesignMismatch, "category count differs on item " + std::to_string(i));
    const double floor = epsilon / static_cast<double>(p.size());
    for (std::size_t c = 0; c < n.size(); ++c) {
      if (n[c] == 0) continue;
      const double q = (1.0 - epsilon) * p[c] + floor;
      if (q <= 0.0) return kNegInf;
      total += n[c] * std::log(q);
    }
  }
  return total;
}

PosteriorUpdate update_posterior_from_loglik(const Posterior& prior, const std::vector<TheoryFamily>& theories,
                                             const std::vector<std::vector<double>>& particle_loglik) {
  if (prior.size() != theories.size()) {
    throw ArenaError(ErrorCode::UnknownTheory, "prior does not cover exactly the registered theories");
  }

  // log of prior(t) * weight(p) * L(p), then one global max subtraction.
  std::vector<std::vector<double>> log_mass(theories.size());
  double peak = kNegInf;
  for (std::size_t t = 0; t < theories.size(); ++t) {
    auto it = prior.find(theories[t].id);
    if (it == prior.end()) throw ArenaError(ErrorCode::UnknownTheory, "prior lacks theory '" + theories[t].id + "'");
    const double log_prior = it->second > 0.0 ? std::log(it->second) : kNegInf;
    const auto& particles = theories[t].particles;
    log_mass[t].resize(particles.size());
    for (std::size_t p = 0; p < particles.size(); ++p) {
      const double w = particles[p].weight;
      const double lm = (w > 0.0 && log_prior > kNegInf) ? log_prior + std::log(w) + particle_loglik[t][p] : kNegInf;
      log_mass[t][p] = lm;
      peak = std::max(peak, lm);
    }
  }

  PosteriorUpdate out;
  out.theories = theories;
  if (!(peak > kNegInf) || std::isnan(peak)) {
    out.posterior = prior;
    out.degenerate_evidence = true;
    return out;
  }

  std::vector<double> row_sum(theories.size(), 0.0);
  double grand = 0.0;
  for (std::size_t t = 0; t < theories.size(); ++t) {
    for (std::size_t p = 0; p < log_mass[t].size(); ++p) {
      const double m = std::exp(log_mass[t][p] - peak);
      out.theories[t].particles[p].weight = m;
      row_sum[t] += m;
    }
    grand += row_sum[t];
  }
  for (std::size_t t = 0; t < theories.size(); ++t) {
    out.posterior[theories[t].id] = row_sum[t] / grand;
    // A theory ruled out entirely keeps its previous particle weights.
    if (row_sum[t] > 0.0) {
      for (auto& particle : out.theories[t].particles) particle.weight /= row_sum[t];
    } else {
      out.theories[t].particles = theories[t].particles;
    }
  }
  return out;
}

PosteriorUpdate update_posterior(const Posterior& prior, const std::vector<TheoryFamily>& theories,
                                 const ExperimentDesign& design, const ResponseDataset& data, double epsilon) {
  if (design.id != data.design_id) {
    throw ArenaError(ErrorCode::DesignMismatch, "data for '" + data.design_id + "' applied to design '" + design.id + "'");
  }
  std::vector<std::vector<double>> loglik(theories.size());
  for (std::size_t t = 0; t < theories.size(); ++t) {
    for (const auto& particle : theories[t].particles) {
      if (kind_of(particle.params) != theories[t].kind) {
        throw ArenaError(ErrorCode::TheoryMismatch, "particle kind differs from theory '" + theories[t].id + "'");
      }
      loglik[t].push_back(particle.weight > 0.0 ? log_likelihood(predict(particle.params, design), data, epsilon) : 0.0);
    }
  }
  return update_posterior_from_loglik(prior, theories, loglik);
}

AdjudicationVerdict verdict(const Posterior& posterior, const std::string& truth) {
  auto it = posterior.find(truth);
  if (it == posterior.end()) throw ArenaError(ErrorCode::UnknownTheory, "truth '" + truth + "' is not registered");

  AdjudicationVerdict v;
  double best = -1.0;
  double best_rival = 0.0;
  bool any_rival = false;
  // std::map iterates ids lexicographically, so strict '>' keeps the smallest id on ties.
  for (const auto& [id, p] : posterior) {
    if (p > best) {
      best = p;
      v.winner = id;
    }
    if (id != truth) {
      best_rival = any_rival ? std::max(best_rival, p) : p;
      any_rival = true;
    }
  }
  v.margin = it->second - best_rival;
  v.recovered = v.winner == truth && v.margin > 0.0;
  return v;
}

}  // namespace arena
