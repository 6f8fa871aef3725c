#include "arena/agents.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "arena/error.hpp"

namespace arena {

std::string_view to_string(AgentKind kind) {
  switch (kind) {
    case AgentKind::ScriptedMaxDiv: return "SCRIPTED_MAXDIV";
    case AgentKind::ScriptedRandom: return "SCRIPTED_RANDOM";
    case AgentKind::External: return "EXTERNAL";
  }
  return "UNKNOWN";
}

std::optional<AgentKind> parse_agent_kind(std::string_view name) {
  if (name == "SCRIPTED_MAXDIV") return AgentKind::ScriptedMaxDiv;
  if (name == "SCRIPTED_RANDOM") return AgentKind::ScriptedRandom;
  if (name == "EXTERNAL") return AgentKind::External;
  return std::nullopt;
}

std::string_view to_string(ClaimCode code) {
  switch (code) {
    case ClaimCode::Overfit: return "OVERFIT";
    case ClaimCode::Underpredicted: return "UNDERPREDICTED";
    case ClaimCode::Consistent: return "CONSISTENT";
  }
  return "UNKNOWN";
}

std::optional<ClaimCode> parse_claim_code(std::string_view name) {
  if (name == "OVERFIT") return ClaimCode::Overfit;
  if (name == "UNDERPREDICTED") return ClaimCode::Underpredicted;
  if (name == "CONSISTENT") return ClaimCode::Consistent;
  return std::nullopt;
}

ExperimentDesign mutate_design(const ExperimentDesign& design, const StimulusSpace& space, CounterRng& rng,
                               const std::string& proposer) {
  ExperimentDesign out = design;
  out.proposer = proposer;
  if (out.training.empty()) return out;
  auto& item = out.training[rng.below(out.training.size())];
  if (rng.below(2) == 0 && space.categories > 1) {
    const auto shift = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(space.categories - 1)));
    item.label = (item.label + shift) % space.categories;
  } else if (!item.stimulus.features.empty()) {
    item.stimulus.features[rng.below(item.stimulus.features.size())] ^= 1;
  }
  out.id = design_fingerprint(out);
  return out;
}

ExperimentDesign sample_design(const StimulusSpace& space, CounterRng& rng, const std::string& proposer) {
  const int n = space.size();
  const int k = space.categories;

  // Weight each training-set size by how many valid designs it contributes:
  // C(n, s) subsets times the surjective labelings (inclusion-exclusion).
  std::vector<double> weight;
  for (int s = k; s <= space.max_train_items; ++s) {
    double surjective = 0.0;
    for (int j = 0; j <= k; ++j) {
      const double choose_kj = std::round(std::exp(std::lgamma(k + 1.0) - std::lgamma(j + 1.0) - std::lgamma(k - j + 1.0)));
      surjective += ((j % 2) ? -1.0 : 1.0) * choose_kj * std::pow(static_cast<double>(k - j), s);
    }
    const double subsets = std::exp(std::lgamma(n + 1.0) - std::lgamma(s + 1.0) - std::lgamma(n - s + 1.0));
    weight.push_back(subsets * surjective);
  }
  const double total = std::accumulate(weight.begin(), weight.end(), 0.0);
  double u = rng.uniform() * total;
  int size = space.max_train_items;
  for (std::size_t i = 0; i < weight.size(); ++i) {
    if (u < weight[i]) {
      size = k + static_cast<int>(i);
      break;
    }
    u -= weight[i];
  }

  // Uniform subset by partial Fisher-Yates.
  std::vector<int> ranks(static_cast<std::size_t>(n));
  std::iota(ranks.begin(), ranks.end(), 0);
  for (int i = 0; i < size; ++i) {
    const auto j = static_cast<std::size_t>(i) + rng.below(static_cast<std::uint64_t>(n - i));
    std::swap(ranks[static_cast<std::size_t>(i)], ranks[j]);
  }
  std::vector<int> chosen(ranks.begin(), ranks.begin() + size);
  std::sort(chosen.begin(), chosen.end());

  // Uniform surjective labeling by rejection.
  std::vector<int> labels(chosen.size());
  for (;;) {
    std::vector<bool> used(static_cast<std::size_t>(k), false);
    for (auto& l : labels) {
      l = static_cast<int>(rng.below(static_cast<std::uint64_t>(k)));
      used[static_cast<std::size_t>(l)] = true;
    }
    if (std::find(used.begin(), used.end(), false) == used.end()) break;
  }

  std::vector<TrainingItem> training;
  for (std::size_t i = 0; i < chosen.size(); ++i) training.push_back({Stimulus::from_rank(chosen[i], space.dims), labels[i]});
  std::vector<Stimulus> test;
  for (int r = 0; r < space.max_test_items; ++r) test.push_back(Stimulus::from_rank(r, space.dims));
  return make_design(proposer, std::move(training), std::move(test), space.trials_per_test_item, space.categories);
}

TheoryFamily revise_particles(const AgentDescriptor& agent, const TheoryFamily& theory, std::uint64_t rng_key) {
  if (theory.id != agent.theory_id) {
    throw ArenaError(ErrorCode::TheoryMismatch, "agent '" + agent.agent_id + "' cannot revise theory '" + theory.id + "'");
  }
  std::vector<std::size_t> order(theory.particles.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return theory.particles[a].weight > theory.particles[b].weight;
  });
  const std::size_t keep = std::min(order.size(), static_cast<std::size_t>(std::max(agent.revision.top_k, 1)));
  const double scale = agent.revision.perturbation_scale;

  TheoryFamily out{theory.id, theory.kind, {}};
  for (std::size_t i = 0; i < keep; ++i) {
    const auto& parent = theory.particles[order[i]].params;
    out.particles.push_back({parent, 0.0});

    CounterRng rng(derive_key(rng_key, static_cast<std::uint64_t>(i)));
    auto jitter = [&](double x) { return x * std::exp(scale * rng.normal()); };
    ParameterVector child = parent;
    if (auto* g = std::get_if<GcmParams>(&child)) {
      g->sensitivity = jitter(g->sensitivity);
      for (double& w : g->attention) w = jitter(w);
    } else if (auto* r = std::get_if<RulexParams>(&child)) {
      r->rule_adherence = jitter(r->rule_adherence);
      r->exception_retrieval = jitter(r->exception_retrieval);
    } else {
      auto& s = std::get<SustainParams>(child);
      s.attention_focus = jitter(s.attention_focus);
      s.cluster_competition = jitter(s.cluster_competition);
      s.decision_consistency = jitter(s.decision_consistency);
      s.learning_rate = jitter(s.learning_rate);
    }
    out.particles.push_back({clamp_to_bounds(std::move(child)), 0.0});
  }
  for (auto& p : out.particles) p.weight = 1.0 / static_cast<double>(out.particles.size());
  return out;
}

CritiqueRecord scripted_critique(const AgentDescriptor& agent, const CycleEvidence& evidence) {
  CritiqueRecord record{agent.agent_id, evidence.cycle, {}, {}};
  auto own_before = evidence.before.find(agent.theory_id);
  auto own_after = evidence.after.find(agent.theory_id);
  record.text = agent.agent_id + " (" + agent.theory_id + ") cycle " + std::to_string(evidence.cycle) + ": own posterior " +
                format_double(own_before != evidence.before.end() ? own_before->second : 0.0) + " -> " +
                format_double(own_after != evidence.after.end() ? own_after->second : 0.0);
  for (const auto& [rival, before] : evidence.before) {
    if (rival == agent.theory_id) continue;
    auto it = evidence.after.find(rival);
    const double after = it != evidence.after.end() ? it->second : 0.0;
    record.claims.push_back({rival, after < before ? ClaimCode::Consistent : ClaimCode::Underpredicted});
  }
  return record;
}

namespace {

class MaxDivergenceAgent final : public TheoryAgent {
 public:
  using TheoryAgent::TheoryAgent;

  std::vector<ExperimentDesign> propose_experiments(const ProposalRequest& req) override {
    // Summed divergence between this agent's theory and every rival.
    std::map<std::string, double> score;
    for (const auto& e : req.divergence.entries) {
      if (e.theory_a == descriptor_.theory_id || e.theory_b == descriptor_.theory_id) score[e.design_id] += e.value;
    }
    std::vector<const ExperimentDesign*> ranked;
    for (const auto& d : req.pool) ranked.push_back(&d);
    std::stable_sort(ranked.begin(), ranked.end(), [&](const ExperimentDesign* a, const ExperimentDesign* b) {
      const double sa = score[a->id], sb = score[b->id];
      return sa != sb ? sa > sb : a->id < b->id;
    });

    std::vector<ExperimentDesign> out;
    for (std::size_t i = 0; i < ranked.size() && static_cast<int>(out.size()) < req.count; ++i) {
      CounterRng rng(derive_key(req.rng_key, static_cast<std::uint64_t>(i)));
      auto mutated = mutate_design(*ranked[i], req.space, rng, descriptor_.agent_id);
      out.push_back(validate_design(mutated, req.space).valid ? std::move(mutated) : *ranked[i]);
    }
    return out;
  }

  CritiqueRecord critique(const CycleEvidence& evidence) override { return scripted_critique(descriptor_, evidence); }
};

class RandomAgent final : public TheoryAgent {
 public:
  using TheoryAgent::TheoryAgent;

  std::vector<ExperimentDesign> propose_experiments(const ProposalRequest& req) override {
    std::vector<ExperimentDesign> out;
    for (int i = 0; i < req.count; ++i) {
      CounterRng rng(derive_key(req.rng_key, static_cast<std::uint64_t>(i)));
      out.push_back(sample_design(req.space, rng, descriptor_.agent_id));
    }
    return out;
  }

  CritiqueRecord critique(const CycleEvidence& evidence) override { return scripted_critique(descriptor_, evidence); }
};

class ExternalAgent final : public TheoryAgent {
 public:
  ExternalAgent(AgentDescriptor descriptor, std::unique_ptr<AgentChannel> channel)
      : TheoryAgent(std::move(descriptor)), channel_(std::move(channel)) {}

  std::vector<ExperimentDesign> propose_experiments(const ProposalRequest& req) override {
    Json payload;
    payload["agent_id"] = descriptor_.agent_id;
    payload["theory_id"] = descriptor_.theory_id;
    payload["count"] = req.count;
    payload["space"] = to_json(req.space);
    Json summary = Json::array();
    std::vector<std::string> referenced;
    for (const auto& pair : req.divergence.summary) {
      Json s;
      s["theories"] = Json::array({pair.theory_a, pair.theory_b});
      Json top = Json::array();
      for (const auto& e : pair.top) {
        Json entry;
        entry["design_id"] = e.design_id;
        entry["value"] = e.value;
        top.push_back(std::move(entry));
        if (std::find(referenced.begin(), referenced.end(), e.design_id) == referenced.end()) referenced.push_back(e.design_id);
      }
      s["top"] = std::move(top);
      summary.push_back(std::move(s));
    }
    payload["divergence_summary"] = std::move(summary);
    Json candidates = Json::array();
    for (const auto& d : req.pool) {
      if (std::find(referenced.begin(), referenced.end(), d.id) != referenced.end()) candidates.push_back(to_json(d));
    }
    payload["candidates"] = std::move(candidates);

    const Json reply = call("propose", std::move(payload));
    std::vector<ExperimentDesign> out;
    if (!reply.contains("designs") || !reply["designs"].is_array()) return out;
    for (const auto& item : reply["designs"]) {
      try {
        auto d = design_from_json(item, "designs[]");
        d.proposer = descriptor_.agent_id;
        d.id = design_fingerprint(d);
        if (validate_design(d, req.space).valid) out.push_back(std::move(d));
      } catch (const ArenaError&) {
        // Malformed designs are dropped like invalid ones.
      }
    }
    return out;
  }

  CritiqueRecord critique(const CycleEvidence& evidence) override {
    Json payload;
    payload["agent_id"] = descriptor_.agent_id;
    payload["theory_id"] = descriptor_.theory_id;
    payload["cycle"] = evidence.cycle;
    payload["posterior_before"] = to_json(evidence.before);
    payload["posterior_after"] = to_json(evidence.after);
    payload["outcome"] = to_json(evidence.outcome);

    const Json reply = call("critique", std::move(payload));
    CritiqueRecord record{descriptor_.agent_id, evidence.cycle, {}, {}};
    if (reply.contains("text") && reply["text"].is_string()) record.text = reply["text"].get<std::string>();
    if (reply.contains("claims") && reply["claims"].is_array()) {
      for (const auto& c : reply["claims"]) {
        if (!c.is_object() || !c.contains("rival") || !c.contains("claim") || !c["rival"].is_string() ||
            !c["claim"].is_string()) {
          continue;
        }
        if (auto code = parse_claim_code(c["claim"].get<std::string>())) {
          record.claims.push_back({c["rival"].get<std::string>(), *code});
        }
      }
    }
    return record;
  }

 private:
  Json call(const char* type, Json payload) {
    Json request;
    request["version"] = kProtocolVersion;
    request["id"] = ++next_id_;
    request["type"] = type;
    request["payload"] = std::move(payload);
    Json reply = channel_->exchange(request, descriptor_.external.timeout_ms);
    if (!reply.is_object() || reply.value("version", std::string{}) != kProtocolVersion) {
      throw ArenaError(ErrorCode::AgentUnavailable, "agent '" + descriptor_.agent_id + "' replied without protocol v1");
    }
    return reply;
  }

  std::unique_ptr<AgentChannel> channel_;
  std::int64_t next_id_ = 0;
};

}  // namespace

std::unique_ptr<TheoryAgent> make_external_agent(const AgentDescriptor& descriptor, std::unique_ptr<AgentChannel> channel) {
  return std::make_unique<ExternalAgent>(descriptor, std::move(channel));
}

std::unique_ptr<TheoryAgent> make_agent(const AgentDescriptor& descriptor) {
  switch (descriptor.kind) {
    case AgentKind::ScriptedMaxDiv: return std::make_unique<MaxDivergenceAgent>(descriptor);
    case AgentKind::ScriptedRandom: return std::make_unique<RandomAgent>(descriptor);
    case AgentKind::External:
      return make_external_agent(descriptor, spawn_process_channel(descriptor.external.argv));
  }
  return nullptr;
}

}  // namespace arena
