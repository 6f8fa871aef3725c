#include "arena/loop.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <limits>
#include <set>
#include <thread>

#include "arena/error.hpp"

namespace arena {

namespace {

using arena::to_json;

[[noreturn]] void config_error(const std::string& field, const std::string& why) {
  throw ArenaError(ErrorCode::ConfigError, field + ": " + why);
}

const TheoryFamily* find_theory(const std::vector<TheoryFamily>& theories, const std::string& id) {
  for (const auto& t : theories)
    if (t.id == id) return &t;
  return nullptr;
}

Json to_json(const EigEstimate& e) {
  Json j;
  j["design_id"] = e.design_id;
  j["value"] = e.value;
  j["method"] = std::string(to_string(e.method));
  j["mc_samples"] = e.mc_samples;
  return j;
}

Json to_json(const CritiqueRecord& c) {
  Json j;
  j["agent_id"] = c.agent_id;
  j["cycle"] = c.cycle;
  j["text"] = c.text;
  Json claims = Json::array();
  for (const auto& cl : c.claims) claims.push_back(Json{{"rival", cl.rival}, {"code", std::string(to_string(cl.code))}});
  j["claims"] = std::move(claims);
  return j;
}

Json to_json(const CycleRecord& r) {
  Json j;
  j["cycle"] = r.cycle;
  j["pool_size"] = r.pool_size;
  Json summary = Json::array();
  for (const auto& s : r.divergence_summary) {
    Json top = Json::array();
    for (const auto& e : s.top) top.push_back(Json{{"design_id", e.design_id}, {"value", e.value}});
    summary.push_back(Json{{"theories", {s.theory_a, s.theory_b}}, {"top", std::move(top)}});
  }
  j["divergence_summary"] = std::move(summary);
  Json proposals = Json::array();
  for (const auto& p : r.proposals) {
    Json rejected = Json::array();
    for (const auto& [id, why] : p.rejected) rejected.push_back(Json{{"design_id", id}, {"reason", why}});
    Json item;
    item["agent_id"] = p.agent_id;
    item["accepted"] = p.accepted;
    item["rejected"] = std::move(rejected);
    if (!p.error.empty()) item["error"] = p.error;
    proposals.push_back(std::move(item));
  }
  j["proposals"] = std::move(proposals);
  Json eig = Json::array();
  for (const auto& e : r.eig_table) eig.push_back(to_json(e));
  j["eig_table"] = std::move(eig);
  j["selected"] = to_json(r.selected);
  j["selected_eig"] = to_json(r.selected_eig);
  Json predictions = Json::array();
  for (std::size_t t = 0; t < r.predictions.size(); ++t) {
    Json p = to_json(r.predictions[t]);
    p["theory_id"] = t < r.theories.size() ? r.theories[t].id : std::string{};
    predictions.push_back(std::move(p));
  }
  j["predictions"] = std::move(predictions);
  j["responses"] = to_json(r.responses);
  Json theories = Json::array();
  for (const auto& t : r.theories) theories.push_back(to_json(t));
  j["theories"] = std::move(theories);
  j["posterior_before"] = to_json(r.posterior_before);
  j["posterior_after"] = to_json(r.posterior_after);
  j["degenerate_evidence"] = r.degenerate_evidence;
  Json critiques = Json::array();
  for (const auto& c : r.critiques) critiques.push_back(to_json(c));
  j["critiques"] = std::move(critiques);
  Json revisions = Json::array();
  for (const auto& v : r.revisions)
    revisions.push_back(Json{{"agent_id", v.agent_id},
                             {"particles_before", v.particles_before},
                             {"particles_after", v.particles_after}});
  j["revisions"] = std::move(revisions);
  j["agent_errors"] = r.agent_errors;
  return j;
}

struct AgentSlot {
  AgentDescriptor descriptor;
  std::unique_ptr<TheoryAgent> agent;
  std::string startup_error;
};

}  // namespace

void RunConfig::check() const {
  try {
    space.check();
  } catch (const ArenaError& e) {
    throw ArenaError(ErrorCode::ConfigError, e.what());
  }
  if (cycles < 1) config_error("cycles", "must be at least 1");
  if (seed_pool_budget < 1) config_error("seed_pool_budget", "must be at least 1");
  if (proposals_per_agent < 0) config_error("proposals_per_agent", "must be non-negative");
  if (!(stop_threshold > 0.5 && stop_threshold <= 1.0)) config_error("stop_threshold", "must lie in (0.5, 1]");
  if (divergence_top_n < 1) config_error("divergence_top_n", "must be at least 1");
  if (mc_samples < 1) config_error("eig.mc_samples", "must be at least 1");
  if (!(exact_cutoff >= 1)) config_error("eig.exact_cutoff", "must be at least 1");
  if (theories.empty()) config_error("theories", "at least one theory is required");

  std::set<std::string> theory_ids;
  for (std::size_t i = 0; i < theories.size(); ++i) {
    const auto& t = theories[i];
    const std::string at = "theories[" + std::to_string(i) + "]";
    if (t.id.empty()) config_error(at + ".id", "must be non-empty");
    if (!theory_ids.insert(t.id).second) config_error(at + ".id", "duplicate theory id '" + t.id + "'");
    if (t.particles.empty()) config_error(at + ".particles", "at least one particle is required");
    double total = 0.0;
    for (std::size_t p = 0; p < t.particles.size(); ++p) {
      const auto& particle = t.particles[p];
      const std::string pat = at + ".particles[" + std::to_string(p) + "]";
      if (kind_of(particle.params) != t.kind) config_error(pat + ".params", "kind differs from the theory kind");
      if (auto why = bounds_violation(particle.params); !why.empty()) config_error(pat + ".params", why);
      if (const auto* g = std::get_if<GcmParams>(&particle.params);
          g && static_cast<int>(g->attention.size()) != space.dims)
        config_error(pat + ".params.attention", "length must equal space.dims");
      if (!(particle.weight >= 0.0) || !std::isfinite(particle.weight)) config_error(pat + ".weight", "must be >= 0");
      total += particle.weight;
    }
    if (!(total > 0.0)) config_error(at + ".particles", "weights sum to zero");
  }

  std::set<std::string> agent_ids;
  std::set<std::string> covered;
  for (std::size_t i = 0; i < agents.size(); ++i) {
    const auto& a = agents[i];
    const std::string at = "agents[" + std::to_string(i) + "]";
    if (a.agent_id.empty()) config_error(at + ".id", "must be non-empty");
    if (!agent_ids.insert(a.agent_id).second) config_error(at + ".id", "duplicate agent id '" + a.agent_id + "'");
    if (!theory_ids.count(a.theory_id)) config_error(at + ".theory", "unregistered theory '" + a.theory_id + "'");
    if (!covered.insert(a.theory_id).second)
      config_error(at + ".theory", "theory '" + a.theory_id + "' already has an agent");
    if (a.revision.top_k < 1) config_error(at + ".top_k", "must be at least 1");
    if (!(a.revision.perturbation_scale >= 0.0)) config_error(at + ".perturbation_scale", "must be >= 0");
    if (a.kind == AgentKind::External) {
      if (a.external.argv.empty()) config_error(at + ".command", "external agents need a command");
      if (a.external.timeout_ms < 1) config_error(at + ".timeout_ms", "must be at least 1");
    }
  }
  if (covered.size() != theory_ids.size()) {
    for (const auto& id : theory_ids)
      if (!covered.count(id)) config_error("agents", "theory '" + id + "' has no agent");
  }

  const auto* truth_theory = find_theory(theories, truth.theory_id);
  if (!truth_theory) config_error("truth.theory", "unregistered theory '" + truth.theory_id + "'");
  if (!(truth.epsilon >= 0.0 && truth.epsilon <= 1.0)) config_error("truth.epsilon", "must lie in [0, 1]");
  if (kind_of(truth.params) != truth_theory->kind) config_error("truth.params", "kind differs from the truth theory");
  if (auto why = bounds_violation(truth.params); !why.empty()) config_error("truth.params", why);
  if (const auto* g = std::get_if<GcmParams>(&truth.params); g && static_cast<int>(g->attention.size()) != space.dims)
    config_error("truth.params.attention", "length must equal space.dims");
}

RunConfig default_run_config(ModelKind truth, double epsilon) {
  RunConfig c;
  for (auto kind : {ModelKind::Gcm, ModelKind::Rulex, ModelKind::Sustain}) {
    TheoryFamily t;
    t.id = std::string(to_string(kind));
    t.kind = kind;
    t.particles = default_particle_grid(kind, c.space.dims);
    c.theories.push_back(std::move(t));

    AgentDescriptor a;
    a.theory_id = std::string(to_string(kind));
    a.agent_id = a.theory_id + "-agent";
    a.kind = AgentKind::ScriptedMaxDiv;
    c.agents.push_back(std::move(a));
  }
  c.truth.theory_id = std::string(to_string(truth));
  c.truth.params = fiducial_parameters(truth, c.space.dims);
  c.truth.epsilon = epsilon;
  return c;
}

DebateTrace run_adjudication(const RunConfig& config) {
  config.check();

  DebateTrace trace;
  trace.truth = config.truth.theory_id;
  trace.epsilon = config.truth.epsilon;
  trace.master_seed = config.master_seed;

  std::vector<TheoryFamily> theories = config.theories;
  for (auto& t : theories) t.normalize();

  // Agents in registration order.
  std::vector<AgentSlot> slots;
  for (const auto& d : config.agents) {
    AgentSlot slot{d, nullptr, {}};
    try {
      slot.agent = make_agent(d);
    } catch (const ArenaError& e) {
      slot.startup_error = e.what();
    }
    slots.push_back(std::move(slot));
  }

  std::vector<ExperimentDesign> pool = enumerate_designs(config.space, config.seed_pool_budget);
  std::set<std::string> executed;
  Posterior posterior = uniform_posterior(theories);

  EigOptions eig;
  eig.mc_samples = config.mc_samples;
  eig.exact_cutoff = config.exact_cutoff;
  eig.seed = config.master_seed;
  const std::uint64_t oracle_seed = derive_key(config.master_seed, "oracle");

  trace.stop_reason = "cycles";
  for (int cycle = 1; cycle <= config.cycles; ++cycle) {
    if (pool.empty()) {
      if (cycle == 1) throw ArenaError(ErrorCode::EmptyPool, "seed pool is empty before the first cycle");
      trace.stop_reason = "pool_exhausted";
      break;
    }
    CycleRecord rec;
    rec.cycle = cycle;
    rec.pool_size = pool.size();

    std::vector<TheoryProfiles> profiles;
    profiles.reserve(pool.size());
    for (const auto& d : pool) profiles.push_back(theory_profiles(theories, d));
    const DivergenceMap dmap = divergence_map(theories, pool, profiles, config.divergence_top_n);
    rec.divergence_summary = dmap.summary;

    // Proposals see the pool as it stood when the map was computed.
    const std::vector<ExperimentDesign> snapshot = pool;
    std::set<std::string> in_pool;
    for (const auto& d : pool) in_pool.insert(d.id);
    for (auto& slot : slots) {
      ProposalRecord pr;
      pr.agent_id = slot.descriptor.agent_id;
      if (config.proposals_per_agent == 0) {
        rec.proposals.push_back(std::move(pr));
        continue;
      }
      if (!slot.agent) {
        pr.error = slot.startup_error;
        rec.agent_errors.push_back(slot.descriptor.agent_id + ": " + slot.startup_error);
        rec.proposals.push_back(std::move(pr));
        continue;
      }
      std::vector<ExperimentDesign> proposed;
      try {
        ProposalRequest req{dmap, snapshot, config.space, config.proposals_per_agent,
                            derive_key(config.master_seed, "propose", slot.descriptor.agent_id,
                                       static_cast<std::uint64_t>(cycle))};
        proposed = slot.agent->propose_experiments(req);
      } catch (const ArenaError& e) {
        if (e.code() != ErrorCode::AgentUnavailable) throw;
        pr.error = e.what();
        rec.agent_errors.push_back(slot.descriptor.agent_id + ": " + e.what());
      }
      for (auto& d : proposed) {
        const auto report = validate_design(d, config.space);
        if (!report.valid) {
          std::string why = "invalid:";
          for (auto v : report.violations) why += " " + std::string(to_string(v));
          pr.rejected.emplace_back(d.id, why);
        } else if (executed.count(d.id)) {
          pr.rejected.emplace_back(d.id, "already executed");
        } else if (in_pool.count(d.id)) {
          pr.rejected.emplace_back(d.id, "already in pool");
        } else {
          in_pool.insert(d.id);
          pr.accepted.push_back(d.id);
          profiles.push_back(theory_profiles(theories, d));
          pool.push_back(std::move(d));
        }
      }
      rec.proposals.push_back(std::move(pr));
    }

    Selection sel = select_experiment(pool, profiles, posterior, theories, config.truth.epsilon, eig);
    rec.eig_table = std::move(sel.table);
    rec.selected = sel.design;
    rec.selected_eig = sel.estimate;

    std::size_t chosen = 0;
    while (pool[chosen].id != sel.design.id) ++chosen;
    rec.predictions = profiles[chosen];
    pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(chosen));
    executed.insert(sel.design.id);

    rec.responses = generate_responses(config.truth, sel.design, oracle_seed);

    rec.theories = theories;
    rec.posterior_before = posterior;
    PosteriorUpdate upd = update_posterior(posterior, theories, sel.design, rec.responses, config.truth.epsilon);
    rec.posterior_after = upd.posterior;
    rec.degenerate_evidence = upd.degenerate_evidence;
    posterior = upd.posterior;
    theories = std::move(upd.theories);

    CycleEvidence evidence{cycle, rec.posterior_before, rec.posterior_after, rec.responses};
    for (auto& slot : slots) {
      if (!slot.agent) continue;
      try {
        rec.critiques.push_back(slot.agent->critique(evidence));
      } catch (const ArenaError& e) {
        if (e.code() != ErrorCode::AgentUnavailable) throw;
        rec.agent_errors.push_back(slot.descriptor.agent_id + ": " + e.what());
      }
    }

    // Revision is local computation, so it runs even for unreachable agents.
    for (const auto& slot : slots) {
      for (auto& t : theories) {
        if (t.id != slot.descriptor.theory_id) continue;
        RevisionSummary rs;
        rs.agent_id = slot.descriptor.agent_id;
        rs.particles_before = t.particles.size();
        t = revise_particles(slot.descriptor, t,
                             derive_key(config.master_seed, "revise", slot.descriptor.agent_id,
                                        static_cast<std::uint64_t>(cycle)));
        rs.particles_after = t.particles.size();
        rec.revisions.push_back(rs);
      }
    }

    trace.cycles.push_back(std::move(rec));

    double top = 0.0;
    for (const auto& [id, p] : posterior) top = std::max(top, p);
    if (top >= config.stop_threshold) {
      trace.stop_reason = "threshold";
      break;
    }
  }

  trace.final_posterior = posterior;
  trace.verdict = verdict(posterior, config.truth.theory_id);
  return trace;
}

Json to_json(const DebateTrace& trace) {
  Json j;
  j["truth"] = trace.truth;
  j["epsilon"] = trace.epsilon;
  j["master_seed"] = trace.master_seed;
  Json cycles = Json::array();
  for (const auto& c : trace.cycles) cycles.push_back(to_json(c));
  j["cycles"] = std::move(cycles);
  j["cycles_executed"] = trace.cycles.size();
  j["stop_reason"] = trace.stop_reason;
  j["final_posterior"] = to_json(trace.final_posterior);
  j["verdict"] = Json{{"winner", trace.verdict.winner},
                      {"margin", trace.verdict.margin},
                      {"recovered", trace.verdict.recovered}};
  return j;
}

std::vector<Posterior> replay_posteriors(const Json& trace) {
  if (!trace.is_object() || !trace.contains("cycles") || !trace["cycles"].is_array())
    throw ArenaError(ErrorCode::SchemaError, "trace.cycles: missing");
  double epsilon = 0.0;
  try {
    epsilon = trace.at("epsilon").get<double>();
  } catch (const nlohmann::json::exception&) {
    throw ArenaError(ErrorCode::SchemaError, "trace.epsilon: missing or not a number");
  }
  std::vector<Posterior> out;
  Posterior current;
  const auto& cycles = trace["cycles"];
  for (std::size_t c = 0; c < cycles.size(); ++c) {
    const std::string at = "trace.cycles[" + std::to_string(c) + "]";
    const auto& rec = cycles[c];
    if (!rec.contains("theories") || !rec.contains("selected") || !rec.contains("responses"))
      throw ArenaError(ErrorCode::SchemaError, at + ": missing theories, selected or responses");
    std::vector<TheoryFamily> theories;
    for (std::size_t t = 0; t < rec["theories"].size(); ++t)
      theories.push_back(theory_from_json(rec["theories"][t], at + ".theories[" + std::to_string(t) + "]"));
    if (c == 0) current = uniform_posterior(theories);
    const auto design = design_from_json(rec["selected"], at + ".selected");
    const auto data = dataset_from_json(rec["responses"], at + ".responses");
    current = update_posterior(current, theories, design, data, epsilon).posterior;
    out.push_back(current);
  }
  return out;
}

std::uint64_t run_seed(std::uint64_t master_seed, const std::string& truth, double epsilon, int replication) {
  return derive_key(master_seed, "run", std::string_view(truth), std::bit_cast<std::uint64_t>(epsilon),
                    static_cast<std::uint64_t>(replication));
}

std::vector<RecoveryCell> aggregate_rows(const std::vector<RecoveryRow>& rows) {
  std::vector<RecoveryCell> cells;
  std::vector<int> ok_runs;
  for (const auto& r : rows) {
    std::size_t i = 0;
    while (i < cells.size() && !(cells[i].truth == r.truth && cells[i].epsilon == r.epsilon)) ++i;
    if (i == cells.size()) {
      cells.push_back({r.truth, r.epsilon, 0, 0.0, 0.0});
      ok_runs.push_back(0);
    }
    auto& cell = cells[i];
    ++cell.runs;
    cell.recovery_rate += r.recovered ? 1.0 : 0.0;
    if (r.error.empty()) {
      cell.mean_margin += r.margin;
      ++ok_runs[i];
    }
  }
  for (std::size_t i = 0; i < cells.size(); ++i) {
    cells[i].recovery_rate /= cells[i].runs;
    cells[i].mean_margin = ok_runs[i] > 0 ? cells[i].mean_margin / ok_runs[i] : std::numeric_limits<double>::quiet_NaN();
  }
  return cells;
}

RecoveryTable run_recovery_study(const StudySpec& spec, const RunConfig& base,
                                 const std::map<std::string, ParameterVector>& fiducials, std::uint64_t master_seed,
                                 int threads, std::vector<DebateTrace>* traces) {
  if (spec.truths.empty()) config_error("study.truths", "at least one truth is required");
  if (spec.epsilons.empty()) config_error("study.epsilons", "at least one epsilon is required");
  if (spec.replications < 1) config_error("study.replications", "must be at least 1");
  for (const auto& truth : spec.truths)
    if (!find_theory(base.theories, truth)) config_error("study.truths", "unregistered theory '" + truth + "'");
  for (double e : spec.epsilons)
    if (!(e >= 0.0 && e <= 1.0)) config_error("study.epsilons", "values must lie in [0, 1]");

  struct Job {
    std::string truth;
    double epsilon;
    int rep;
  };
  std::vector<Job> jobs;
  for (const auto& truth : spec.truths)
    for (double e : spec.epsilons)
      for (int r = 0; r < spec.replications; ++r) jobs.push_back({truth, e, r});

  RecoveryTable table;
  table.rows.resize(jobs.size());
  std::vector<DebateTrace> local_traces(traces ? jobs.size() : 0);

  auto run_one = [&](std::size_t i) {
    const auto& job = jobs[i];
    RecoveryRow& row = table.rows[i];
    row.truth = job.truth;
    row.epsilon = job.epsilon;
    row.replication = job.rep;
    try {
      RunConfig cfg = base;
      const auto* theory = find_theory(cfg.theories, job.truth);
      cfg.truth.theory_id = job.truth;
      auto it = fiducials.find(job.truth);
      cfg.truth.params = it != fiducials.end() ? it->second : fiducial_parameters(theory->kind, cfg.space.dims);
      cfg.truth.epsilon = job.epsilon;
      cfg.master_seed = run_seed(master_seed, job.truth, job.epsilon, job.rep);
      DebateTrace trace = run_adjudication(cfg);
      row.recovered = trace.verdict.recovered;
      row.margin = trace.verdict.margin;
      row.winner = trace.verdict.winner;
      row.cycles_used = static_cast<int>(trace.cycles.size());
      row.final_posterior = trace.final_posterior;
      if (traces) local_traces[i] = std::move(trace);
    } catch (const std::exception& e) {
      row.recovered = false;
      row.margin = std::numeric_limits<double>::quiet_NaN();
      row.error = e.what();
    }
  };

  std::size_t workers = threads > 0 ? static_cast<std::size_t>(threads) : std::thread::hardware_concurrency();
  workers = std::clamp<std::size_t>(workers, 1, std::max<std::size_t>(jobs.size(), 1));
  if (workers == 1) {
    for (std::size_t i = 0; i < jobs.size(); ++i) run_one(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < jobs.size(); i = next++) run_one(i);
      });
  }

  table.cells = aggregate_rows(table.rows);
  if (traces) *traces = std::move(local_traces);
  return table;
}

}  // namespace arena
