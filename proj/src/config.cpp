#include "arena/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "arena/error.hpp"

namespace arena {

namespace {

class Reader {
 public:
  explicit Reader(std::string source) : source_(std::move(source)) {}

  [[noreturn]] void fail(const std::string& field, const std::string& why) const {
    throw ArenaError(ErrorCode::ConfigError, source_ + ": " + field + ": " + why);
  }

  void only(const Json& j, const std::string& where, std::initializer_list<const char*> keys) const {
    if (!j.is_object()) fail(where.empty() ? "(root)" : where, "expected an object");
    std::set<std::string> allowed(keys.begin(), keys.end());
    for (const auto& [k, v] : j.items())
      if (!allowed.count(k)) fail(join(where, k), "unknown key");
  }

  template <typename T>
  void opt(const Json& j, const std::string& where, const char* key, T& target) const {
    auto it = j.find(key);
    if (it == j.end()) return;
    try {
      if constexpr (std::is_same_v<T, int>) {
        if (!it->is_number_integer()) throw std::invalid_argument("int");
      } else if constexpr (std::is_same_v<T, std::uint64_t>) {
        if (!it->is_number_unsigned()) throw std::invalid_argument("uint");
      } else if constexpr (std::is_same_v<T, double>) {
        if (!it->is_number()) throw std::invalid_argument("number");
      }
      target = it->get<T>();
    } catch (const std::exception&) {
      fail(join(where, key), "wrong type");
    }
  }

  static std::string join(const std::string& where, const std::string& key) {
    return where.empty() ? key : where + "." + key;
  }

  // Re-labels schema errors from the shared readers as config errors.
  template <typename F>
  auto wrap(F&& f) const {
    try {
      return f();
    } catch (const ArenaError& e) {
      if (e.code() != ErrorCode::SchemaError) throw;
      std::string msg = e.what();
      const std::string prefix = "SCHEMA_ERROR: ";
      if (msg.rfind(prefix, 0) == 0) msg = msg.substr(prefix.size());
      throw ArenaError(ErrorCode::ConfigError, source_ + ": " + msg);
    }
  }

 private:
  std::string source_;
};

}  // namespace

ArenaConfig default_config() {
  ArenaConfig c;
  c.run = default_run_config();
  for (const auto& t : c.run.theories) c.fiducials[t.id] = fiducial_parameters(t.kind, c.run.space.dims);
  c.study.truths = {"GCM", "RULEX", "SUSTAIN"};
  c.study.epsilons = {0.0, 0.1, 0.2, 0.4};
  c.study.replications = 10;
  return c;
}

ArenaConfig config_from_json(const Json& j, const std::string& source) {
  const Reader rd(source);
  rd.only(j, "",
          {"space", "theories", "agents", "truth", "cycles", "seed_pool_budget", "proposals_per_agent",
           "stop_threshold", "master_seed", "divergence_top_n", "eig", "fiducials", "study"});

  ArenaConfig c = default_config();
  RunConfig& run = c.run;

  if (j.contains("space")) {
    rd.only(j["space"], "space",
            {"dims", "categories", "max_train_items", "max_test_items", "trials_per_test_item"});
    run.space = rd.wrap([&] { return space_from_json(j["space"], "space"); });
  }
  const int dims = run.space.dims;

  if (j.contains("theories")) {
    const auto& arr = j["theories"];
    if (!arr.is_array()) rd.fail("theories", "expected an array");
    run.theories.clear();
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const std::string at = "theories[" + std::to_string(i) + "]";
      rd.only(arr[i], at, {"id", "kind", "particles"});
      TheoryFamily t;
      std::string kind_name;
      rd.opt(arr[i], at, "kind", kind_name);
      try {
        t.kind = parse_model_kind(kind_name);
      } catch (const ArenaError&) {
        rd.fail(at + ".kind", "unknown model kind '" + kind_name + "'");
      }
      t.id = std::string(to_string(t.kind));
      rd.opt(arr[i], at, "id", t.id);
      if (arr[i].contains("particles")) {
        Json full = arr[i];
        full["id"] = t.id;
        t = rd.wrap([&] { return theory_from_json(full, at); });
      } else {
        t.particles = default_particle_grid(t.kind, dims);
      }
      run.theories.push_back(std::move(t));
    }
  } else {
    for (auto& t : run.theories) t.particles = default_particle_grid(t.kind, dims);
  }

  // Default fiducials follow the registered theories and dims.
  c.fiducials.clear();
  for (const auto& t : run.theories) c.fiducials[t.id] = fiducial_parameters(t.kind, dims);
  if (j.contains("fiducials")) {
    const auto& f = j["fiducials"];
    if (!f.is_object()) rd.fail("fiducials", "expected an object");
    for (const auto& [id, v] : f.items())
      c.fiducials[id] = rd.wrap([&] { return params_from_json(v, "fiducials." + id); });
  }

  if (j.contains("agents")) {
    const auto& arr = j["agents"];
    if (!arr.is_array()) rd.fail("agents", "expected an array");
    run.agents.clear();
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const std::string at = "agents[" + std::to_string(i) + "]";
      rd.only(arr[i], at, {"id", "theory", "kind", "top_k", "perturbation_scale", "command", "timeout_ms"});
      AgentDescriptor a;
      rd.opt(arr[i], at, "theory", a.theory_id);
      a.agent_id = a.theory_id + "-agent";
      rd.opt(arr[i], at, "id", a.agent_id);
      std::string kind = "SCRIPTED_MAXDIV";
      rd.opt(arr[i], at, "kind", kind);
      auto parsed = parse_agent_kind(kind);
      if (!parsed) rd.fail(at + ".kind", "unknown agent kind '" + kind + "'");
      a.kind = *parsed;
      rd.opt(arr[i], at, "top_k", a.revision.top_k);
      rd.opt(arr[i], at, "perturbation_scale", a.revision.perturbation_scale);
      rd.opt(arr[i], at, "command", a.external.argv);
      rd.opt(arr[i], at, "timeout_ms", a.external.timeout_ms);
      run.agents.push_back(std::move(a));
    }
  } else {
    run.agents.clear();
    for (const auto& t : run.theories) {
      AgentDescriptor a;
      a.theory_id = t.id;
      a.agent_id = t.id + "-agent";
      run.agents.push_back(std::move(a));
    }
  }

  std::string truth_id = run.theories.empty() ? std::string{} : run.theories.front().id;
  if (j.contains("truth")) {
    rd.only(j["truth"], "truth", {"theory", "epsilon", "params"});
    rd.opt(j["truth"], "truth", "theory", truth_id);
    rd.opt(j["truth"], "truth", "epsilon", run.truth.epsilon);
  } else {
    run.truth.epsilon = 0.0;
  }
  run.truth.theory_id = truth_id;
  if (j.contains("truth") && j["truth"].contains("params")) {
    run.truth.params = rd.wrap([&] { return params_from_json(j["truth"]["params"], "truth.params"); });
  } else if (auto it = c.fiducials.find(truth_id); it != c.fiducials.end()) {
    run.truth.params = it->second;
  }

  rd.opt(j, "", "cycles", run.cycles);
  rd.opt(j, "", "seed_pool_budget", run.seed_pool_budget);
  rd.opt(j, "", "proposals_per_agent", run.proposals_per_agent);
  rd.opt(j, "", "stop_threshold", run.stop_threshold);
  rd.opt(j, "", "master_seed", run.master_seed);
  rd.opt(j, "", "divergence_top_n", run.divergence_top_n);
  if (j.contains("eig")) {
    rd.only(j["eig"], "eig", {"mc_samples", "exact_cutoff"});
    rd.opt(j["eig"], "eig", "mc_samples", run.mc_samples);
    rd.opt(j["eig"], "eig", "exact_cutoff", run.exact_cutoff);
  }

  c.study.truths.clear();
  for (const auto& t : run.theories) c.study.truths.push_back(t.id);
  if (j.contains("study")) {
    rd.only(j["study"], "study", {"truths", "epsilons", "replications"});
    rd.opt(j["study"], "study", "truths", c.study.truths);
    rd.opt(j["study"], "study", "epsilons", c.study.epsilons);
    rd.opt(j["study"], "study", "replications", c.study.replications);
  }

  try {
    run.check();
  } catch (const ArenaError& e) {
    std::string msg = e.what();
    const std::string prefix = "CONFIG_ERROR: ";
    if (msg.rfind(prefix, 0) == 0) msg = msg.substr(prefix.size());
    throw ArenaError(ErrorCode::ConfigError, source + ": " + msg);
  }
  for (const auto& [id, params] : c.fiducials) {
    const TheoryFamily* theory = nullptr;
    for (const auto& t : run.theories)
      if (t.id == id) theory = &t;
    if (!theory) rd.fail("fiducials." + id, "unregistered theory");
    if (kind_of(params) != theory->kind) rd.fail("fiducials." + id, "kind differs from the theory kind");
    if (const auto* g = std::get_if<GcmParams>(&params); g && static_cast<int>(g->attention.size()) != dims)
      rd.fail("fiducials." + id + ".attention", "length must equal space.dims");
  }
  if (c.study.replications < 1) rd.fail("study.replications", "must be at least 1");
  if (c.study.truths.empty()) rd.fail("study.truths", "at least one truth is required");
  if (c.study.epsilons.empty()) rd.fail("study.epsilons", "at least one epsilon is required");
  for (const auto& t : c.study.truths)
    if (!c.fiducials.count(t)) rd.fail("study.truths", "unregistered theory '" + t + "'");
  for (double e : c.study.epsilons)
    if (!(e >= 0.0 && e <= 1.0)) rd.fail("study.epsilons", "values must lie in [0, 1]");
  return c;
}

ArenaConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ArenaError(ErrorCode::ConfigError, path + ": cannot open file");
  std::stringstream buf;
  buf << in.rdbuf();
  Json j;
  try {
    j = Json::parse(buf.str());
  } catch (const nlohmann::json::parse_error& e) {
    throw ArenaError(ErrorCode::ConfigError, path + ": parse error: " + e.what());
  }
  return config_from_json(j, path);
}

Json to_json(const ArenaConfig& config) {
  const RunConfig& run = config.run;
  Json j;
  j["space"] = to_json(run.space);
  Json theories = Json::array();
  for (const auto& t : run.theories) theories.push_back(to_json(t));
  j["theories"] = std::move(theories);
  Json agents = Json::array();
  for (const auto& a : run.agents) {
    Json item;
    item["id"] = a.agent_id;
    item["theory"] = a.theory_id;
    item["kind"] = std::string(to_string(a.kind));
    item["top_k"] = a.revision.top_k;
    item["perturbation_scale"] = a.revision.perturbation_scale;
    if (a.kind == AgentKind::External) {
      item["command"] = a.external.argv;
      item["timeout_ms"] = a.external.timeout_ms;
    }
    agents.push_back(std::move(item));
  }
  j["agents"] = std::move(agents);
  j["truth"] = Json{{"theory", run.truth.theory_id}, {"epsilon", run.truth.epsilon}, {"params", to_json(run.truth.params)}};
  j["cycles"] = run.cycles;
  j["seed_pool_budget"] = run.seed_pool_budget;
  j["proposals_per_agent"] = run.proposals_per_agent;
  j["stop_threshold"] = run.stop_threshold;
  j["master_seed"] = run.master_seed;
  j["divergence_top_n"] = run.divergence_top_n;
  j["eig"] = Json{{"mc_samples", run.mc_samples}, {"exact_cutoff", run.exact_cutoff}};
  Json fiducials = Json::object();
  for (const auto& [id, p] : config.fiducials) fiducials[id] = to_json(p);
  j["fiducials"] = std::move(fiducials);
  j["study"] = Json{{"truths", config.study.truths},
                    {"epsilons", config.study.epsilons},
                    {"replications", config.study.replications}};
  return j;
}

}  // namespace arena
