// Acceptance suite: one PASS/FAIL line per criterion, exit 1 if any fail.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>

#include <unistd.h>

#include "arena/cli.hpp"
#include "arena/config.hpp"
#include "arena/design_engine.hpp"
#include "arena/loop.hpp"
#include "generators.hpp"

using namespace arena;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail += (detail.empty() ? "" : "; ") + what;
    }
  }
};

std::string fmt(double v, int digits = 3) {
  std::ostringstream s;
  s.precision(digits);
  s << std::fixed << v;
  return s.str();
}

const RecoveryCell* cell(const RecoveryTable& t, const std::string& truth, double eps) {
  for (const auto& c : t.cells)
    if (c.truth == truth && c.epsilon == eps) return &c;
  return nullptr;
}

// Criteria 1-3 share one study: default config, 3 truths x 4 lapse rates x R=10.
struct StudyRun {
  RecoveryTable table;
  double seconds = 0.0;
};

StudyRun main_study() {
  const auto cfg = default_config();
  StudySpec spec{{"GCM", "RULEX", "SUSTAIN"}, {0.0, 0.1, 0.2, 0.4}, 10};
  const auto t0 = std::chrono::steady_clock::now();
  StudyRun out;
  out.table = run_recovery_study(spec, cfg.run, cfg.fiducials, 2026, threads_from_env());
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

Outcome criterion1(const StudyRun& s) {
  Outcome o;
  for (const auto* truth : {"GCM", "RULEX", "SUSTAIN"}) {
    const auto* c = cell(s.table, truth, 0.0);
    o.require(c && c->recovery_rate == 1.0, std::string(truth) + " eps=0 rate " + (c ? fmt(c->recovery_rate) : "n/a"));
  }
  for (const auto& r : s.table.rows) o.require(r.error.empty(), "row error: " + r.error);
  o.require(s.seconds < 300.0, "study took " + fmt(s.seconds, 1) + " s");
  if (o.pass) o.detail = "rates GCM/RULEX/SUSTAIN at eps=0 all 1.000; 120 runs in " + fmt(s.seconds, 1) + " s";
  return o;
}

Outcome criterion2(const StudyRun& s) {
  Outcome o;
  std::string rates;
  for (double e : {0.0, 0.1, 0.2, 0.4}) {
    const auto* c = cell(s.table, "GCM", e);
    if (!c) {
      o.require(false, "missing GCM cell");
      continue;
    }
    rates += " " + fmt(c->recovery_rate, 2) + "/" + fmt(c->mean_margin, 2);
    o.require(c->recovery_rate >= 0.9, "GCM eps=" + fmt(e, 1) + " rate " + fmt(c->recovery_rate));
    o.require(c->mean_margin > 0.0, "GCM eps=" + fmt(e, 1) + " margin " + fmt(c->mean_margin));
  }
  if (o.pass) o.detail = "GCM rate/margin over eps 0,0.1,0.2,0.4:" + rates;
  return o;
}

Outcome criterion3(const StudyRun& s) {
  Outcome o;
  std::string info;
  for (const auto* truth : {"GCM", "RULEX", "SUSTAIN"}) {
    const auto* lo = cell(s.table, truth, 0.0);
    const auto* hi = cell(s.table, truth, 0.4);
    if (!lo || !hi) {
      o.require(false, std::string("missing cells for ") + truth);
      continue;
    }
    info += std::string(" ") + truth + " " + fmt(lo->mean_margin) + "->" + fmt(hi->mean_margin);
    o.require(hi->mean_margin <= lo->mean_margin, std::string(truth) + " margin rose:" + info);
  }
  if (o.pass) o.detail = "mean margin eps 0 -> 0.4:" + info;
  return o;
}

Outcome criterion4() {
  Outcome o;
  std::mt19937_64 rng(404);
  StimulusSpace space;
  std::vector<TheoryFamily> theories;
  for (auto k : {ModelKind::Gcm, ModelKind::Rulex, ModelKind::Sustain})
    theories.push_back({std::string(to_string(k)), k, default_particle_grid(k, space.dims)});
  int within = 0;
  double worst = 0.0;
  for (int n = 0; n < 20; ++n) {
    ExperimentDesign d;
    do {
      space.trials_per_test_item = 1 + static_cast<int>(rng() % 6);
      d = testing::random_design(rng, space);
      const std::size_t items = 1 + rng() % 3;
      if (d.test_items.size() > items) d.test_items.resize(items);
      d.id = design_fingerprint(d);
    } while (outcome_space_size(d) > 200000);
    double a = testing::uniform(rng, 0.05, 1), b = testing::uniform(rng, 0.05, 1), c = testing::uniform(rng, 0.05, 1);
    const Posterior prior{{"GCM", a / (a + b + c)}, {"RULEX", b / (a + b + c)}, {"SUSTAIN", c / (a + b + c)}};
    const double eps = testing::uniform(rng, 0.0, 0.4);
    const auto exact = expected_information_gain(prior, theories, d, eps);
    EigOptions mc;
    mc.exact_cutoff = 0;
    mc.mc_samples = 20000;
    mc.seed = rng();
    const auto approx = expected_information_gain(prior, theories, d, eps, mc);
    o.require(exact.method == EigMethod::Exact, "design " + std::to_string(n) + " not exact");
    o.require(approx.method == EigMethod::MonteCarlo && approx.mc_samples == 20000, "MC not used");
    o.require(exact.value >= 0.0 && exact.value <= entropy(prior) + 1e-9, "exact EIG outside [0, H]");
    const double gap = std::abs(approx.value - exact.value);
    worst = std::max(worst, gap);
    within += gap <= 0.02 ? 1 : 0;
  }
  o.require(within >= 19, std::to_string(within) + "/20 within 0.02 nats");
  if (o.pass) o.detail = std::to_string(within) + "/20 within 0.02 nats (max gap " + fmt(worst, 4) + ")";
  return o;
}

double pow_int(double p, int n) {
  double out = 1.0;
  for (int i = 0; i < n; ++i) out *= p;
  return out;
}

Outcome criterion5() {
  Outcome o;
  // Fixture: 2 theories, 2 test items, 2 trials each.
  const auto d = make_design("fixture", {{Stimulus::from_rank(0, 2), 0}, {Stimulus::from_rank(3, 2), 1}},
                             {Stimulus::from_rank(1, 2), Stimulus::from_rank(2, 2)}, 2);
  const std::vector<TheoryFamily> theories = {
      {"GCM", ModelKind::Gcm, {{GcmParams{2.0, {0.6, 0.4}}, 0.3}, {GcmParams{0.7, {0.1, 0.9}}, 0.7}}},
      {"RULEX", ModelKind::Rulex, {{RulexParams{0.8, 0.65}, 0.5}, {RulexParams{0.6, 0.9}, 0.5}}},
  };
  const Posterior prior{{"GCM", 0.45}, {"RULEX", 0.55}};
  const double eps = 0.2;
  double worst = 0.0;
  for (int a0 = 0; a0 <= 2; ++a0) {
    for (int a1 = 0; a1 <= 2; ++a1) {
      const ResponseDataset data{d.id, d.test_items, {{a0, 2 - a0}, {a1, 2 - a1}}};
      std::vector<double> joint;
      double total = 0.0;
      for (const auto& t : theories) {
        double mass = 0.0;
        for (const auto& p : t.particles) {
          const auto prof = predict(p.params, d);
          const double q0 = (1 - eps) * prof.items[0][0] + eps / 2, q1 = (1 - eps) * prof.items[1][0] + eps / 2;
          mass += p.weight * pow_int(q0, a0) * pow_int(1 - q0, 2 - a0) * pow_int(q1, a1) * pow_int(1 - q1, 2 - a1);
        }
        joint.push_back(prior.at(t.id) * mass);
        total += joint.back();
      }
      const auto up = update_posterior(prior, theories, d, data, eps);
      for (std::size_t t = 0; t < theories.size(); ++t)
        worst = std::max(worst, std::abs(up.posterior.at(theories[t].id) - joint[t] / total));
    }
  }
  o.require(worst <= 1e-12, "joint-table gap " + std::to_string(worst));

  std::mt19937_64 rng(55);
  double seq_worst = 0.0;
  for (int n = 0; n < 100; ++n) {
    StimulusSpace space{2, 2, 4, 4, 1 + static_cast<int>(rng() % 5)};
    const auto design = testing::random_design(rng, space);
    std::vector<TheoryFamily> fams;
    for (auto kind : {ModelKind::Gcm, ModelKind::Rulex, ModelKind::Sustain}) {
      TheoryFamily f{std::string(to_string(kind)), kind, {}};
      for (int p = 0; p < 3; ++p) f.particles.push_back({testing::random_params(rng, kind, 2), testing::uniform(rng, 0.1, 1)});
      f.normalize();
      fams.push_back(f);
    }
    const double e = testing::uniform(rng, 0.01, 0.5);
    const GroundTruth truth{"x", testing::random_params(rng, ModelKind::Gcm, 2), e};
    const auto a = generate_responses(truth, design, rng());
    const auto b = generate_responses(truth, design, rng());
    auto both = a;
    for (std::size_t i = 0; i < both.counts.size(); ++i)
      for (std::size_t k = 0; k < both.counts[i].size(); ++k) both.counts[i][k] += b.counts[i][k];
    const Posterior pri{{"GCM", 0.3}, {"RULEX", 0.3}, {"SUSTAIN", 0.4}};
    const auto first = update_posterior(pri, fams, design, a, e);
    const auto seq = update_posterior(first.posterior, first.theories, design, b, e);
    const auto batch = update_posterior(pri, fams, design, both, e);
    for (const auto& [id, p] : seq.posterior) seq_worst = std::max(seq_worst, std::abs(p - batch.posterior.at(id)));
  }
  o.require(seq_worst <= 1e-9, "sequential-vs-batch gap " + std::to_string(seq_worst));
  if (o.pass) {
    std::ostringstream s;
    s << "joint-table max gap " << worst << "; sequential-vs-batch max gap " << seq_worst << " over 100 cases";
    o.detail = s.str();
  }
  return o;
}

Outcome criterion6() {
  Outcome o;
  auto stim = [](std::vector<std::uint8_t> f) { return Stimulus{std::move(f)}; };

  const auto gd = make_design("g", {{stim({0, 0}), 0}, {stim({1, 1}), 1}}, {stim({0, 0})}, 8);
  const auto gp = gcm_predict(GcmParams{std::log(3.0), {0.5, 0.5}}, gd);
  o.require(std::abs(gp.items[0][0] - 0.75) <= 1e-12, "GCM P(A) " + std::to_string(gp.items[0][0]));

  auto label_of = [](const ExperimentDesign& d, const Stimulus& s) {
    for (const auto& t : d.training)
      if (t.stimulus == s) return t.label;
    return -1;
  };
  const auto one = shj_fixture(1);
  const auto p1 = rulex_predict(RulexParams{0.9, 0.7}, one);
  for (std::size_t i = 0; i < one.test_items.size(); ++i)
    o.require(std::abs(p1.items[i][label_of(one, one.test_items[i])] - 0.9) <= 1e-12, "RULEX Type I");
  const auto six = shj_fixture(6);
  const auto p6 = rulex_predict(RulexParams{1.0, 1.0}, six);
  for (std::size_t i = 0; i < six.test_items.size(); ++i)
    o.require(std::abs(p6.items[i][label_of(six, six.test_items[i])] - 1.0) <= 1e-12, "RULEX Type VI");

  const auto sd = make_design("s", {{stim({0, 0, 0}), 0}, {stim({1, 1, 1}), 1}}, {stim({0, 0, 0})}, 8);
  const auto clusters = sustain_cluster_count(SustainParams{6, 4, 8, 0.1}, sd);
  o.require(clusters == 2, "SUSTAIN recruited " + std::to_string(clusters) + " clusters");

  std::mt19937_64 rng(606);
  int normalized = 0;
  for (int n = 0; n < 1000; ++n) {
    const auto space = testing::random_space(rng);
    const auto d = testing::random_design(rng, space);
    const auto kind = static_cast<ModelKind>(n % 3);
    const auto p = predict(testing::random_params(rng, kind, space.dims), d);
    bool ok = p.items.size() == d.test_items.size();
    for (const auto& item : p.items) {
      double sum = 0.0;
      for (double v : item) {
        ok = ok && v >= 0.0;
        sum += v;
      }
      ok = ok && std::abs(sum - 1.0) <= 1e-9 && static_cast<int>(item.size()) == space.categories;
    }
    normalized += ok;
  }
  o.require(normalized == 1000, std::to_string(normalized) + "/1000 profiles normalized");
  if (o.pass) o.detail = "GCM 0.75, RULEX Type I 0.9 / Type VI 1.0, SUSTAIN 2 clusters, 1000/1000 profiles normalized";
  return o;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream s;
  s << f.rdbuf();
  return s.str();
}

// Every file under dir, keyed by relative path.
std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) out[fs::relative(e.path(), dir).string()] = slurp(e.path());
  return out;
}

Outcome criterion7() {
  Outcome o;
  const auto root = fs::temp_directory_path() / ("arena_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(root);
  fs::create_directories(root);
  const auto cfg = (root / "config.json").string();
  std::ofstream(cfg) << R"({"cycles": 3})";

  std::vector<std::map<std::string, std::string>> outputs;
  const char* settings[] = {"1", "1", "3", "0"};
  for (int i = 0; i < 4; ++i) {
    ::setenv("THEORY_ARENA_THREADS", settings[i], 1);
    const auto out = root / ("out" + std::to_string(i));
    std::ostringstream sink, err;
    const int code = run_cli({"study", "--config", cfg, "--truths", "GCM,RULEX,SUSTAIN", "--eps", "0,0.4", "--reps",
                              "2", "--seed", "77", "--out", out.string()},
                             sink, err);
    o.require(code == 0, "study exited " + std::to_string(code) + ": " + err.str());
    outputs.push_back(snapshot(out));
  }
  ::unsetenv("THEORY_ARENA_THREADS");
  const auto& ref = outputs[0];
  o.require(ref.count("recovery_rows.csv") && ref.count("recovery_summary.csv"), "missing CSV output");
  std::size_t traces = 0;
  for (const auto& [name, text] : ref) traces += name.rfind("traces/", 0) == 0;
  o.require(traces == 12, std::to_string(traces) + " trace files");
  for (std::size_t i = 1; i < outputs.size(); ++i)
    o.require(outputs[i] == ref, std::string("output differs with THEORY_ARENA_THREADS=") + settings[i]);
  fs::remove_all(root);
  if (o.pass) o.detail = "4 study invocations (threads 1,1,3,0): rows, summary and 12 traces byte-identical";
  return o;
}

Outcome criterion8() {
  Outcome o;
  std::mt19937_64 rng(808);
  double worst_comp = 0.0;
  for (int n = 0; n < 500; ++n) {
    const int k = 2 + static_cast<int>(rng() % 4);
    PredictiveProfile p{"x", {}};
    for (int i = 0; i < 4; ++i) {
      std::vector<double> item(static_cast<std::size_t>(k));
      double sum = 0.0;
      for (double& v : item) sum += v = testing::uniform(rng, 0.0, 1.0);
      for (double& v : item) v /= sum;
      p.items.push_back(item);
    }
    const auto same = apply_lapse(p, 0.0);
    o.require(same.items == p.items, "eps=0 changed the profile");
    const auto flat = apply_lapse(p, 1.0);
    for (const auto& item : flat.items)
      for (double v : item) o.require(std::abs(v - 1.0 / k) <= 1e-15, "eps=1 not uniform");
    const double a = testing::uniform(rng, 0.0, 1.0), b = testing::uniform(rng, 0.0, 1.0);
    const auto twice = apply_lapse(apply_lapse(p, a), b);
    const auto once = apply_lapse(p, 1.0 - (1.0 - a) * (1.0 - b));
    for (std::size_t i = 0; i < p.items.size(); ++i)
      for (int c = 0; c < k; ++c) worst_comp = std::max(worst_comp, std::abs(twice.items[i][c] - once.items[i][c]));
  }
  o.require(worst_comp <= 1e-12, "composition gap " + std::to_string(worst_comp));

  const auto cfg = default_run_config();
  const auto pool = enumerate_designs(cfg.space, cfg.seed_pool_budget);
  const auto prior = uniform_posterior(cfg.theories);
  int zero = 0;
  for (const auto& d : pool) zero += expected_information_gain(prior, cfg.theories, d, 1.0).value == 0.0;
  o.require(zero == static_cast<int>(pool.size()), std::to_string(zero) + "/" + std::to_string(pool.size()) + " pooled designs with EIG(eps=1)=0");
  if (o.pass) {
    std::ostringstream s;
    s << "identity, uniform and composition (max gap " << worst_comp << ") hold; EIG(eps=1)=0 for " << zero << "/"
      << pool.size() << " pooled designs";
    o.detail = s.str();
  }
  return o;
}

}  // namespace

int main() {
  int failed = 0;
  auto report = [&](int id, const std::string& name, const Outcome& o) {
    std::cout << (o.pass ? "PASS" : "FAIL") << "  criterion " << id << " (" << name << "): " << o.detail << std::endl;
    failed += o.pass ? 0 : 1;
  };
  auto guarded = [](const std::function<Outcome()>& f) {
    try {
      return f();
    } catch (const std::exception& e) {
      return Outcome{false, std::string("exception: ") + e.what()};
    }
  };

  StudyRun study;
  bool study_ok = true;
  std::string study_error;
  try {
    study = main_study();
  } catch (const std::exception& e) {
    study_ok = false;
    study_error = e.what();
  }
  auto from_study = [&](const std::function<Outcome(const StudyRun&)>& f) {
    return study_ok ? guarded([&] { return f(study); }) : Outcome{false, "study failed: " + study_error};
  };

  report(1, "noiseless recovery", from_study(criterion1));
  report(2, "noise-robust GCM", from_study(criterion2));
  report(3, "margin degradation direction", from_study(criterion3));
  report(4, "EIG Monte Carlo vs exact", guarded(criterion4));
  report(5, "Bayes brute-force equivalence", guarded(criterion5));
  report(6, "model unit suites", guarded(criterion6));
  report(7, "study determinism across thread counts", guarded(criterion7));
  report(8, "lapse identities", guarded(criterion8));

  if (study_ok) {
    std::cout << "\nrecovery table (truth, eps, rate, mean margin)\n";
    for (const auto& c : study.table.cells)
      std::cout << "  " << c.truth << " " << fmt(c.epsilon, 1) << " " << fmt(c.recovery_rate, 2) << " "
                << fmt(c.mean_margin, 3) << "\n";
  }
  std::cout << (failed == 0 ? "all criteria passed" : std::to_string(failed) + " criterion/criteria failed") << std::endl;
  return failed == 0 ? 0 : 1;
}
