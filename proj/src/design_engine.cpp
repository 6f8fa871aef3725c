#include "arena/design_engine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "arena/error.hpp"
#include "arena/rng.hpp"

namespace arena {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
// Items with more count outcomes than this are simulated trial by trial in MC.
constexpr std::size_t kMaxTabulatedOutcomes = 20000;
}  // namespace

double DivergenceMap::value(const std::string& design_id, const std::string& a, const std::string& b) const {
  for (const auto& e : entries) {
    if (e.design_id == design_id && ((e.theory_a == a && e.theory_b == b) || (e.theory_a == b && e.theory_b == a))) {
      return e.value;
    }
  }
  return 0.0;
}

double jensen_shannon(std::span<const double> p, std::span<const double> q) {
  double js = 0.0;
  for (std::size_t c = 0; c < p.size(); ++c) {
    const double m = 0.5 * (p[c] + q[c]);
    if (p[c] > 0.0) js += 0.5 * p[c] * std::log(p[c] / m);
    if (q[c] > 0.0) js += 0.5 * q[c] * std::log(q[c] / m);
  }
  return std::max(js, 0.0);
}

TheoryProfiles theory_profiles(const std::vector<TheoryFamily>& theories, const ExperimentDesign& design) {
  TheoryProfiles out;
  out.reserve(theories.size());
  for (const auto& t : theories) out.push_back(theory_predict(t, design));
  return out;
}

DivergenceMap divergence_map(const std::vector<TheoryFamily>& theories, std::span<const ExperimentDesign> pool,
                             int top_n) {
  std::vector<TheoryProfiles> profiles;
  profiles.reserve(pool.size());
  for (const auto& d : pool) profiles.push_back(theory_profiles(theories, d));
  return divergence_map(theories, pool, profiles, top_n);
}

DivergenceMap divergence_map(const std::vector<TheoryFamily>& theories, std::span<const ExperimentDesign> pool,
                             std::span<const TheoryProfiles> profiles, int top_n) {
  if (pool.empty()) throw ArenaError(ErrorCode::EmptyPool, "no candidate designs");
  if (theories.size() < 2) throw ArenaError(ErrorCode::UnknownTheory, "divergence needs at least two theories");

  DivergenceMap map;
  for (std::size_t d = 0; d < pool.size(); ++d) {
    for (std::size_t a = 0; a < theories.size(); ++a) {
      for (std::size_t b = a + 1; b < theories.size(); ++b) {
        const auto& pa = profiles[d][a].items;
        const auto& pb = profiles[d][b].items;
        double sum = 0.0;
        for (std::size_t i = 0; i < pa.size(); ++i) sum += jensen_shannon(pa[i], pb[i]);
        map.entries.push_back({pool[d].id, theories[a].id, theories[b].id,
                               pa.empty() ? 0.0 : sum / static_cast<double>(pa.size())});
      }
    }
  }

  for (std::size_t a = 0; a < theories.size(); ++a) {
    for (std::size_t b = a + 1; b < theories.size(); ++b) {
      PairSummary s{theories[a].id, theories[b].id, {}};
      for (const auto& e : map.entries) {
        if (e.theory_a == s.theory_a && e.theory_b == s.theory_b) s.top.push_back(e);
      }
      std::stable_sort(s.top.begin(), s.top.end(), [](const DivergenceEntry& x, const DivergenceEntry& y) {
        return x.value != y.value ? x.value > y.value : x.design_id < y.design_id;
      });
      if (static_cast<int>(s.top.size()) > top_n) s.top.resize(static_cast<std::size_t>(std::max(top_n, 0)));
      map.summary.push_back(std::move(s));
    }
  }
  return map;
}

std::string_view to_string(EigMethod method) { return method == EigMethod::Exact ? "EXACT" : "MONTE_CARLO"; }

namespace {

double binomial(int n, int k) {
  return std::round(std::exp(std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0)));
}

// All count vectors of length k summing to n, in reverse-lexicographic order.
std::vector<std::vector<int>> compositions(int n, int k) {
  std::vector<std::vector<int>> out;
  std::vector<int> cur(static_cast<std::size_t>(k), 0);
  auto rec = [&](auto&& self, int pos, int left) -> void {
    if (pos == k - 1) {
      cur[static_cast<std::size_t>(pos)] = left;
      out.push_back(cur);
      return;
    }
    for (int c = left; c >= 0; --c) {
      cur[static_cast<std::size_t>(pos)] = c;
      self(self, pos + 1, left - c);
    }
  };
  rec(rec, 0, n);
  return out;
}

double log_multinomial(const std::vector<int>& counts, const std::vector<double>& q) {
  int n = 0;
  double lp = 0.0;
  for (std::size_t c = 0; c < counts.size(); ++c) {
    n += counts[c];
    lp -= std::lgamma(counts[c] + 1.0);
    if (counts[c] > 0) {
      if (q[c] <= 0.0) return kNegInf;
      lp += counts[c] * std::log(q[c]);
    }
  }
  return lp + std::lgamma(n + 1.0);
}

// log sum_g exp(log_prior[g] + l[g]).
double log_evidence(const std::vector<double>& log_prior, const std::vector<double>& l) {
  double peak = kNegInf;
  for (std::size_t g = 0; g < l.size(); ++g) peak = std::max(peak, log_prior[g] + l[g]);
  if (!(peak > kNegInf)) return kNegInf;
  double s = 0.0;
  for (std::size_t g = 0; g < l.size(); ++g) s += std::exp(log_prior[g] + l[g] - peak);
  return peak + std::log(s);
}

struct ItemTable {
  std::vector<std::vector<int>> outcomes;
  std::vector<std::vector<double>> log_prob;  // [group][outcome]
  std::vector<std::vector<double>> cdf;       // [group][outcome]
};

}  // namespace

double outcome_space_size(const ExperimentDesign& design) {
  const int k = design.categories;
  double size = 1.0;
  for (std::size_t i = 0; i < design.test_items.size(); ++i) {
    size *= binomial(design.trials_per_item + k - 1, k - 1);
  }
  return size;
}

EigEstimate expected_information_gain(const Posterior& prior, const std::vector<TheoryFamily>& theories,
                                      const ExperimentDesign& design, double epsilon, const EigOptions& options) {
  return expected_information_gain(prior, theories, design, theory_profiles(theories, design), epsilon, options);
}

EigEstimate expected_information_gain(const Posterior& prior, const std::vector<TheoryFamily>& theories,
                                      const ExperimentDesign& design, const TheoryProfiles& profiles, double epsilon,
                                      const EigOptions& options) {
  EigEstimate est;
  est.design_id = design.id;
  const double space = outcome_space_size(design);
  est.method = space <= options.exact_cutoff ? EigMethod::Exact : EigMethod::MonteCarlo;
  est.mc_samples = est.method == EigMethod::MonteCarlo ? options.mc_samples : 0;

  // Theories predicting identical lapsed profiles are indistinguishable by
  // any outcome; merging them leaves the mutual information unchanged.
  std::vector<double> group_prior;
  std::vector<PredictiveProfile> group_profile;
  for (std::size_t t = 0; t < theories.size(); ++t) {
    auto it = prior.find(theories[t].id);
    if (it == prior.end()) throw ArenaError(ErrorCode::UnknownTheory, "prior lacks theory '" + theories[t].id + "'");
    if (!(it->second > 0.0)) continue;
    auto lapsed = apply_lapse(profiles[t], epsilon);
    auto same = std::find_if(group_profile.begin(), group_profile.end(),
                             [&](const PredictiveProfile& g) { return g.items == lapsed.items; });
    if (same != group_profile.end()) {
      group_prior[static_cast<std::size_t>(same - group_profile.begin())] += it->second;
    } else {
      group_prior.push_back(it->second);
      group_profile.push_back(std::move(lapsed));
    }
  }
  if (group_prior.size() <= 1) return est;

  double mass = 0.0;
  for (double p : group_prior) mass += p;
  std::vector<double> log_prior;
  double bound = 0.0;
  for (double& p : group_prior) {
    p /= mass;
    log_prior.push_back(std::log(p));
    bound -= p * std::log(p);
  }

  const std::size_t groups = group_prior.size();
  const std::size_t items = design.test_items.size();
  const int n = design.trials_per_item;
  const int k = design.categories;
  const bool tabulate = binomial(n + k - 1, k - 1) <= static_cast<double>(kMaxTabulatedOutcomes);

  std::vector<ItemTable> tables(tabulate ? items : 0);
  if (tabulate) {
    const auto outcomes = compositions(n, k);
    for (std::size_t i = 0; i < items; ++i) {
      auto& table = tables[i];
      table.outcomes = outcomes;
      table.log_prob.assign(groups, {});
      table.cdf.assign(groups, {});
      for (std::size_t g = 0; g < groups; ++g) {
        double cum = 0.0;
        for (const auto& o : outcomes) {
          const double lp = log_multinomial(o, group_profile[g].items[i]);
          table.log_prob[g].push_back(lp);
          cum += std::exp(lp);
          table.cdf[g].push_back(cum);
        }
      }
    }
  }

  double value = 0.0;
  if (est.method == EigMethod::Exact) {
    // Depth-first over items carrying partial per-group log-likelihoods.
    std::vector<std::vector<double>> partial(items + 1, std::vector<double>(groups, 0.0));
    double mi = 0.0;
    auto walk = [&](auto&& self, std::size_t depth) -> void {
      if (depth == items) {
        const auto& l = partial[items];
        const double log_py = log_evidence(log_prior, l);
        if (!(log_py > kNegInf)) return;
        for (std::size_t g = 0; g < groups; ++g) {
          if (!(l[g] > kNegInf)) continue;
          mi += std::exp(log_prior[g] + l[g]) * (l[g] - log_py);
        }
        return;
      }
      const auto& table = tables[depth];
      for (std::size_t o = 0; o < table.outcomes.size(); ++o) {
        for (std::size_t g = 0; g < groups; ++g) partial[depth + 1][g] = partial[depth][g] + table.log_prob[g][o];
        self(self, depth + 1);
      }
    };
    walk(walk, 0);
    value = mi;
  } else {
    CounterRng rng(derive_key(options.seed, "eig", design_fingerprint(design)));
    std::vector<double> prior_cdf;
    double cum = 0.0;
    for (double p : group_prior) prior_cdf.push_back(cum += p);

    std::vector<double> l(groups);
    std::vector<int> counts(static_cast<std::size_t>(k));
    double sum = 0.0;
    for (int s = 0; s < options.mc_samples; ++s) {
      const double u = rng.uniform() * cum;
      std::size_t source = static_cast<std::size_t>(std::upper_bound(prior_cdf.begin(), prior_cdf.end(), u) - prior_cdf.begin());
      source = std::min(source, groups - 1);
      std::fill(l.begin(), l.end(), 0.0);
      for (std::size_t i = 0; i < items; ++i) {
        if (tabulate) {
          const auto& table = tables[i];
          const auto& cdf = table.cdf[source];
          const double v = rng.uniform() * cdf.back();
          std::size_t o = static_cast<std::size_t>(std::upper_bound(cdf.begin(), cdf.end(), v) - cdf.begin());
          o = std::min(o, cdf.size() - 1);
          while (!(table.log_prob[source][o] > kNegInf) && o > 0) --o;
          for (std::size_t g = 0; g < groups; ++g) l[g] += table.log_prob[g][o];
        } else {
          const auto& q = group_profile[source].items[i];
          std::fill(counts.begin(), counts.end(), 0);
          for (int t = 0; t < n; ++t) {
            const double v = rng.uniform();
            double c = 0.0;
            std::size_t pick = q.size() - 1;
            for (std::size_t j = 0; j < q.size(); ++j) {
              c += q[j];
              if (v < c) {
                pick = j;
                break;
              }
            }
            while (q[pick] <= 0.0 && pick > 0) --pick;
            ++counts[pick];
          }
          for (std::size_t g = 0; g < groups; ++g) {
            const auto& qg = group_profile[g].items[i];
            for (std::size_t j = 0; j < counts.size(); ++j) {
              if (counts[j] == 0) continue;
              l[g] += qg[j] > 0.0 ? counts[j] * std::log(qg[j]) : kNegInf;
            }
          }
        }
      }
      sum += l[source] - log_evidence(log_prior, l);
    }
    value = options.mc_samples > 0 ? sum / options.mc_samples : 0.0;
  }
  est.value = std::clamp(value, 0.0, bound);
  return est;
}

Selection select_experiment(std::span<const ExperimentDesign> pool, const Posterior& prior,
                            const std::vector<TheoryFamily>& theories, double epsilon, const EigOptions& options) {
  std::vector<TheoryProfiles> profiles;
  profiles.reserve(pool.size());
  for (const auto& d : pool) profiles.push_back(theory_profiles(theories, d));
  return select_experiment(pool, profiles, prior, theories, epsilon, options);
}

Selection select_experiment(std::span<const ExperimentDesign> pool, std::span<const TheoryProfiles> profiles,
                            const Posterior& prior, const std::vector<TheoryFamily>& theories, double epsilon,
                            const EigOptions& options) {
  if (pool.empty()) throw ArenaError(ErrorCode::EmptyPool, "no candidate designs");
  Selection sel;
  std::size_t best = 0;
  for (std::size_t d = 0; d < pool.size(); ++d) {
    sel.table.push_back(expected_information_gain(prior, theories, pool[d], profiles[d], epsilon, options));
    const double v = sel.table.back().value;
    const double top = sel.table[best].value;
    if (d > 0 && (v > top || (v == top && pool[d].id < pool[best].id))) best = d;
  }
  sel.design = pool[best];
  sel.estimate = sel.table[best];
  return sel;
}

}  // namespace arena
