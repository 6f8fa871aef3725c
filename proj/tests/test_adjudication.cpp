#include <doctest.h>

#include <cmath>
#include <random>

#include "arena/adjudication.hpp"
#include "arena/error.hpp"
#include "generators.hpp"

using namespace arena;

namespace {

TheoryFamily single(const std::string& id, ParameterVector params) {
  const auto kind = kind_of(params);
  return TheoryFamily{id, kind, {{std::move(params), 1.0}}};
}

ResponseDataset dataset(const ExperimentDesign& d, std::vector<std::vector<int>> counts) {
  return ResponseDataset{d.id, d.test_items, std::move(counts)};
}

ExperimentDesign one_dim(int test_items, int trials) {
  std::vector<Stimulus> test;
  for (int i = 0; i < test_items; ++i) test.push_back(Stimulus::from_rank(i % 2, 1));
  return make_design("t", {{Stimulus::from_rank(0, 1), 0}, {Stimulus::from_rank(1, 1), 1}}, test, trials);
}

}  // namespace

TEST_CASE("log_likelihood examples") {
  PredictiveProfile certain{"d", {{1.0, 0.0}, {0.0, 1.0}}};
  ResponseDataset hit{"d", {}, {{4, 0}, {0, 4}}};
  CHECK(log_likelihood(certain, hit, 0.0) == 0.0);

  PredictiveProfile uniform{"d", {{0.5, 0.5}, {0.5, 0.5}}};
  ResponseDataset any{"d", {}, {{3, 1}, {2, 2}}};
  CHECK(log_likelihood(uniform, any, 0.0) == doctest::Approx(8 * std::log(0.5)).epsilon(1e-15));

  PredictiveProfile skew{"d", {{0.75, 0.25}}};
  ResponseDataset obs{"d", {}, {{3, 1}}};
  CHECK(log_likelihood(skew, obs, 0.0) == doctest::Approx(3 * std::log(0.75) + std::log(0.25)).epsilon(1e-15));

  ResponseDataset miss{"d", {}, {{3, 1}, {0, 4}}};
  CHECK(std::isinf(log_likelihood(certain, miss, 0.0)));
  CHECK(std::isfinite(log_likelihood(certain, miss, 0.1)));

  ResponseDataset other{"e", {}, {{1, 0}}};
  try {
    log_likelihood(skew, other, 0.0);
    FAIL("expected throw");
  } catch (const ArenaError& e) {
    CHECK(e.code() == ErrorCode::DesignMismatch);
  }
}

TEST_CASE("identical theories leave the prior unchanged") {
  auto d = shj_fixture(2, 4);
  std::vector<TheoryFamily> theories = {single("A", RulexParams{0.8, 0.7}), single("B", RulexParams{0.8, 0.7})};
  Posterior prior{{"A", 0.3}, {"B", 0.7}};
  auto data = generate_responses(GroundTruth{"A", GcmParams{2.0, {0.2, 0.3, 0.5}}, 0.1}, d, 3);
  auto up = update_posterior(prior, theories, d, data, 0.1);
  CHECK(up.posterior.at("A") == doctest::Approx(0.3).epsilon(1e-14));
  CHECK(up.posterior.at("B") == doctest::Approx(0.7).epsilon(1e-14));
  CHECK_FALSE(up.degenerate_evidence);
}

TEST_CASE("hand Bayes: certain versus coin-flip theory") {
  auto d = one_dim(1, 1);
  // Theory 1 predicts the observed response with p = 1, theory 2 with p = 0.5.
  std::vector<TheoryFamily> theories = {single("T1", RulexParams{1.0, 1.0}), single("T2", RulexParams{0.5, 0.5})};
  auto up = update_posterior(uniform_posterior(theories), theories, d, dataset(d, {{1, 0}}), 0.0);
  CHECK(up.posterior.at("T1") == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
  CHECK(up.posterior.at("T2") == doctest::Approx(1.0 / 3.0).epsilon(1e-14));

  auto ruled_out = update_posterior(uniform_posterior(theories), theories, d, dataset(d, {{0, 1}}), 0.0);
  CHECK(ruled_out.posterior.at("T1") == 0.0);
  CHECK(ruled_out.posterior.at("T2") == 1.0);
}

TEST_CASE("all-zero evidence returns the prior and flags it") {
  auto d = one_dim(1, 2);
  std::vector<TheoryFamily> theories = {single("T1", RulexParams{1.0, 1.0}), single("T2", RulexParams{1.0, 1.0})};
  Posterior prior{{"T1", 0.25}, {"T2", 0.75}};
  auto up = update_posterior(prior, theories, d, dataset(d, {{1, 1}}), 0.0);
  CHECK(up.degenerate_evidence);
  CHECK(up.posterior == prior);

  auto wrong = dataset(d, {{1, 1}});
  wrong.design_id = "elsewhere";
  CHECK_THROWS_AS(update_posterior(prior, theories, d, wrong, 0.0), ArenaError);
}

TEST_CASE("brute-force joint table on the 2-theory, 2-item, 2-trial fixture") {
  auto d = make_design("t", {{Stimulus::from_rank(0, 2), 0}, {Stimulus::from_rank(3, 2), 1}},
                       {Stimulus::from_rank(1, 2), Stimulus::from_rank(0, 2)}, 2);
  std::vector<TheoryFamily> theories = {
      TheoryFamily{"GCM", ModelKind::Gcm, {{GcmParams{1.3, {0.7, 0.3}}, 0.4}, {GcmParams{5.0, {0.2, 0.8}}, 0.6}}},
      TheoryFamily{"RULEX", ModelKind::Rulex, {{RulexParams{0.85, 0.6}, 1.0}}},
  };
  Posterior prior{{"GCM", 0.35}, {"RULEX", 0.65}};
  const double eps = 0.15;

  // Enumerate every outcome; compare the posterior with an explicit table
  // built from per-trial probabilities (no log space, no shared code).
  for (int a0 = 0; a0 <= 2; ++a0) {
    for (int a1 = 0; a1 <= 2; ++a1) {
      auto data = dataset(d, {{a0, 2 - a0}, {a1, 2 - a1}});
      double table[2][2] = {};
      double total = 0.0;
      for (std::size_t t = 0; t < theories.size(); ++t) {
        for (std::size_t p = 0; p < theories[t].particles.size(); ++p) {
          const auto prof = predict(theories[t].particles[p].params, d);
          double like = 1.0;
          const int counts[2] = {a0, a1};
          for (int i = 0; i < 2; ++i) {
            const double pa = (1 - eps) * prof.items[i][0] + eps / 2;
            for (int k = 0; k < counts[i]; ++k) like *= pa;
            for (int k = 0; k < 2 - counts[i]; ++k) like *= 1 - pa;
          }
          table[t][p] = prior.at(theories[t].id) * theories[t].particles[p].weight * like;
          total += table[t][p];
        }
      }
      auto up = update_posterior(prior, theories, d, data, eps);
      CHECK(std::abs(up.posterior.at("GCM") - (table[0][0] + table[0][1]) / total) <= 1e-12);
      CHECK(std::abs(up.posterior.at("RULEX") - table[1][0] / total) <= 1e-12);
      CHECK(std::abs(up.theories[0].particles[0].weight - table[0][0] / (table[0][0] + table[0][1])) <= 1e-12);
      CHECK(up.theories[1].particles[0].weight == doctest::Approx(1.0).epsilon(1e-15));
    }
  }
}

TEST_CASE("sequential updates equal one batch update") {
  std::mt19937_64 rng(77);
  for (int n = 0; n < 100; ++n) {
    StimulusSpace space{2, 2, 4, 4, 1 + static_cast<int>(rng() % 5)};
    auto d = testing::random_design(rng, space);
    std::vector<TheoryFamily> theories;
    for (int t = 0; t < 3; ++t) {
      const auto kind = static_cast<ModelKind>(t);
      TheoryFamily fam{std::string(to_string(kind)), kind, {}};
      for (int p = 0; p < 3; ++p) fam.particles.push_back({testing::random_params(rng, kind, 2), testing::uniform(rng, 0.1, 1.0)});
      fam.normalize();
      theories.push_back(fam);
    }
    const double eps = testing::uniform(rng, 0.01, 0.5);
    auto truth = GroundTruth{"x", testing::random_params(rng, ModelKind::Sustain, 2), eps};
    auto a = generate_responses(truth, d, rng());
    auto b = generate_responses(truth, d, rng());
    auto joined = a;
    for (std::size_t i = 0; i < joined.counts.size(); ++i)
      for (std::size_t c = 0; c < 2; ++c) joined.counts[i][c] += b.counts[i][c];

    Posterior prior{{"GCM", 0.2}, {"RULEX", 0.5}, {"SUSTAIN", 0.3}};
    auto first = update_posterior(prior, theories, d, a, eps);
    auto seq = update_posterior(first.posterior, first.theories, d, b, eps);
    auto batch = update_posterior(prior, theories, d, joined, eps);
    double sum = 0.0;
    for (const auto& [id, p] : seq.posterior) {
      CHECK(std::abs(p - batch.posterior.at(id)) <= 1e-9);
      sum += p;
    }
    CHECK(std::abs(sum - 1.0) <= 1e-9);
  }
}

TEST_CASE("duplicated evidence never hurts the maximum-likelihood theory") {
  std::mt19937_64 rng(8);
  for (int n = 0; n < 200; ++n) {
    auto space = testing::random_space(rng);
    auto d = testing::random_design(rng, space);
    std::vector<TheoryFamily> theories;
    for (int t = 0; t < 3; ++t) {
      const auto kind = static_cast<ModelKind>(t);
      theories.push_back(single(std::string(to_string(kind)), testing::random_params(rng, kind, space.dims)));
    }
    const double eps = testing::uniform(rng, 0.05, 0.5);
    auto data = generate_responses(GroundTruth{"x", testing::random_params(rng, ModelKind::Gcm, space.dims), eps}, d, rng());
    std::string best;
    double best_ll = -1e300;
    for (const auto& t : theories) {
      const double ll = log_likelihood(theory_predict(t, d), data, eps);
      if (ll > best_ll) {
        best_ll = ll;
        best = t.id;
      }
    }
    auto once = update_posterior(uniform_posterior(theories), theories, d, data, eps);
    auto twice = update_posterior(once.posterior, once.theories, d, data, eps);
    CHECK(twice.posterior.at(best) >= once.posterior.at(best) - 1e-12);
  }
}

TEST_CASE("verdict") {
  Posterior p{{"GCM", 0.7}, {"RULEX", 0.2}, {"SUSTAIN", 0.1}};
  auto g = verdict(p, "GCM");
  CHECK(g.winner == "GCM");
  CHECK(g.margin == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(g.recovered);

  auto r = verdict(p, "RULEX");
  CHECK(r.winner == "GCM");
  CHECK(r.margin == doctest::Approx(-0.5).epsilon(1e-15));
  CHECK_FALSE(r.recovered);

  Posterior flat{{"GCM", 1.0 / 3}, {"RULEX", 1.0 / 3}, {"SUSTAIN", 1.0 / 3}};
  auto tie = verdict(flat, "SUSTAIN");
  CHECK(tie.margin == 0.0);
  CHECK_FALSE(tie.recovered);
  CHECK(tie.winner == "GCM");

  try {
    verdict(p, "ALCOVE");
    FAIL("expected throw");
  } catch (const ArenaError& e) {
    CHECK(e.code() == ErrorCode::UnknownTheory);
  }
}

TEST_CASE("posterior normalizes across random evidence") {
  std::mt19937_64 rng(31);
  for (int n = 0; n < 300; ++n) {
    auto space = testing::random_space(rng);
    auto d = testing::random_design(rng, space);
    std::vector<TheoryFamily> theories;
    for (int t = 0; t < 3; ++t) {
      const auto kind = static_cast<ModelKind>(t);
      TheoryFamily fam{std::string(to_string(kind)), kind, {}};
      for (int p = 0; p < 4; ++p) fam.particles.push_back({testing::random_params(rng, kind, space.dims), 0.25});
      theories.push_back(fam);
    }
    const double eps = testing::uniform(rng, 0.0, 1.0);
    auto data = generate_responses(GroundTruth{"x", testing::random_params(rng, ModelKind::Rulex, space.dims), eps}, d, rng());
    auto up = update_posterior(uniform_posterior(theories), theories, d, data, eps);
    double sum = 0.0;
    for (const auto& [id, p] : up.posterior) {
      CHECK(p >= 0.0);
      sum += p;
    }
    CHECK(std::abs(sum - 1.0) <= 1e-9);
    for (const auto& t : up.theories) {
      double w = 0.0;
      for (const auto& p : t.particles) w += p.weight;
      CHECK(std::abs(w - 1.0) <= 1e-9);
    }
  }
}
