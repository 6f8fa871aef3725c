#include "arena/serialize.hpp"

#include <array>
#include <charconv>

#include "arena/error.hpp"

namespace arena {

namespace {

[[noreturn]] void schema_error(const std::string& where, const std::string& why) {
  throw ArenaError(ErrorCode::SchemaError, where + ": " + why);
}

const Json& field(const Json& j, const char* name, const std::string& where) {
  if (!j.is_object()) schema_error(where, "expected an object");
  auto it = j.find(name);
  if (it == j.end()) schema_error(where + "." + name, "missing");
  return *it;
}

template <typename T>
T get(const Json& j, const char* name, const std::string& where) {
  const auto& v = field(j, name, where);
  try {
    return v.get<T>();
  } catch (const nlohmann::json::exception&) {
    schema_error(where + "." + name, "wrong type");
  }
}

Json features_json(const Stimulus& s) {
  Json arr = Json::array();
  for (auto f : s.features) arr.push_back(static_cast<int>(f));
  return arr;
}

Stimulus stimulus_from(const Json& j, const std::string& where) {
  if (!j.is_array()) schema_error(where, "expected an array of 0/1 features");
  Stimulus s;
  for (const auto& v : j) {
    if (!v.is_number_integer() || v.get<int>() < 0 || v.get<int>() > 1) schema_error(where, "features must be 0 or 1");
    s.features.push_back(static_cast<std::uint8_t>(v.get<int>()));
  }
  return s;
}

}  // namespace

std::string format_double(double value) {
  std::array<char, 32> buf{};
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  return std::string(buf.data(), end);
}

Json to_json(const StimulusSpace& space) {
  Json j;
  j["dims"] = space.dims;
  j["categories"] = space.categories;
  j["max_train_items"] = space.max_train_items;
  j["max_test_items"] = space.max_test_items;
  j["trials_per_test_item"] = space.trials_per_test_item;
  return j;
}

StimulusSpace space_from_json(const Json& j, const std::string& where) {
  if (!j.is_object()) schema_error(where, "expected an object");
  StimulusSpace s;
  auto opt = [&](const char* name, int& target) {
    if (j.contains(name)) target = get<int>(j, name, where);
  };
  opt("dims", s.dims);
  opt("categories", s.categories);
  // Sizes default to the full space when dims is overridden.
  s.max_train_items = s.size();
  s.max_test_items = s.size();
  opt("max_train_items", s.max_train_items);
  opt("max_test_items", s.max_test_items);
  opt("trials_per_test_item", s.trials_per_test_item);
  return s;
}

Json to_json(const ExperimentDesign& design) {
  Json j;
  j["id"] = design.id;
  j["proposer"] = design.proposer;
  Json training = Json::array();
  for (const auto& t : design.training) {
    Json item;
    item["features"] = features_json(t.stimulus);
    item["label"] = t.label;
    training.push_back(std::move(item));
  }
  j["training"] = std::move(training);
  Json test = Json::array();
  for (const auto& s : design.test_items) {
    Json item;
    item["features"] = features_json(s);
    test.push_back(std::move(item));
  }
  j["test"] = std::move(test);
  j["trials_per_item"] = design.trials_per_item;
  j["categories"] = design.categories;
  return j;
}

ExperimentDesign design_from_json(const Json& j, const std::string& where) {
  ExperimentDesign d;
  d.id = j.contains("id") ? get<std::string>(j, "id", where) : std::string{};
  d.proposer = j.contains("proposer") ? get<std::string>(j, "proposer", where) : std::string{};
  const auto& training = field(j, "training", where);
  if (!training.is_array()) schema_error(where + ".training", "expected an array");
  for (std::size_t i = 0; i < training.size(); ++i) {
    const std::string at = where + ".training[" + std::to_string(i) + "]";
    d.training.push_back({stimulus_from(field(training[i], "features", at), at + ".features"),
                          get<int>(training[i], "label", at)});
  }
  const auto& test = field(j, "test", where);
  if (!test.is_array()) schema_error(where + ".test", "expected an array");
  for (std::size_t i = 0; i < test.size(); ++i) {
    const std::string at = where + ".test[" + std::to_string(i) + "]";
    d.test_items.push_back(stimulus_from(field(test[i], "features", at), at + ".features"));
  }
  d.trials_per_item = get<int>(j, "trials_per_item", where);
  if (j.contains("categories")) d.categories = get<int>(j, "categories", where);
  if (d.id.empty()) d.id = design_fingerprint(d);
  return d;
}

Json to_json(const ResponseDataset& data) {
  Json j;
  j["design_id"] = data.design_id;
  Json items = Json::array();
  for (std::size_t i = 0; i < data.counts.size(); ++i) {
    Json item;
    item["features"] = i < data.items.size() ? features_json(data.items[i]) : Json::array();
    item["counts"] = data.counts[i];
    items.push_back(std::move(item));
  }
  j["items"] = std::move(items);
  return j;
}

ResponseDataset dataset_from_json(const Json& j, const std::string& where) {
  ResponseDataset d;
  d.design_id = get<std::string>(j, "design_id", where);
  const auto& items = field(j, "items", where);
  if (!items.is_array()) schema_error(where + ".items", "expected an array");
  for (std::size_t i = 0; i < items.size(); ++i) {
    const std::string at = where + ".items[" + std::to_string(i) + "]";
    d.items.push_back(stimulus_from(field(items[i], "features", at), at + ".features"));
    d.counts.push_back(get<std::vector<int>>(items[i], "counts", at));
  }
  return d;
}

Json to_json(const PredictiveProfile& profile) {
  Json j;
  j["design_id"] = profile.design_id;
  j["items"] = profile.items;
  return j;
}

Json to_json(const ParameterVector& params) {
  Json j;
  j["kind"] = std::string(to_string(kind_of(params)));
  if (const auto* g = std::get_if<GcmParams>(&params)) {
    j["sensitivity"] = g->sensitivity;
    j["attention"] = g->attention;
  } else if (const auto* r = std::get_if<RulexParams>(&params)) {
    j["rule_adherence"] = r->rule_adherence;
    j["exception_retrieval"] = r->exception_retrieval;
  } else {
    const auto& s = std::get<SustainParams>(params);
    j["attention_focus"] = s.attention_focus;
    j["cluster_competition"] = s.cluster_competition;
    j["decision_consistency"] = s.decision_consistency;
    j["learning_rate"] = s.learning_rate;
  }
  return j;
}

ParameterVector params_from_json(const Json& j, const std::string& where) {
  const auto kind_name = get<std::string>(j, "kind", where);
  ModelKind kind;
  try {
    kind = parse_model_kind(kind_name);
  } catch (const ArenaError&) {
    schema_error(where + ".kind", "unknown model kind '" + kind_name + "'");
  }
  ParameterVector params;
  switch (kind) {
    case ModelKind::Gcm:
      params = GcmParams{get<double>(j, "sensitivity", where), get<std::vector<double>>(j, "attention", where)};
      break;
    case ModelKind::Rulex:
      params = RulexParams{get<double>(j, "rule_adherence", where), get<double>(j, "exception_retrieval", where)};
      break;
    case ModelKind::Sustain:
      params = SustainParams{get<double>(j, "attention_focus", where), get<double>(j, "cluster_competition", where),
                             get<double>(j, "decision_consistency", where), get<double>(j, "learning_rate", where)};
      break;
  }
  if (auto why = bounds_violation(params); !why.empty()) schema_error(where, why);
  return params;
}

Json to_json(const TheoryFamily& theory) {
  Json j;
  j["id"] = theory.id;
  j["kind"] = std::string(to_string(theory.kind));
  Json particles = Json::array();
  for (const auto& p : theory.particles) {
    Json item;
    item["params"] = to_json(p.params);
    item["weight"] = p.weight;
    particles.push_back(std::move(item));
  }
  j["particles"] = std::move(particles);
  return j;
}

TheoryFamily theory_from_json(const Json& j, const std::string& where) {
  TheoryFamily t;
  t.id = get<std::string>(j, "id", where);
  const auto kind_name = get<std::string>(j, "kind", where);
  try {
    t.kind = parse_model_kind(kind_name);
  } catch (const ArenaError&) {
    schema_error(where + ".kind", "unknown model kind '" + kind_name + "'");
  }
  const auto& particles = field(j, "particles", where);
  if (!particles.is_array()) schema_error(where + ".particles", "expected an array");
  for (std::size_t i = 0; i < particles.size(); ++i) {
    const std::string at = where + ".particles[" + std::to_string(i) + "]";
    t.particles.push_back({params_from_json(field(particles[i], "params", at), at + ".params"),
                           get<double>(particles[i], "weight", at)});
  }
  return t;
}

Json to_json(const Posterior& posterior) {
  Json j = Json::object();
  for (const auto& [id, p] : posterior) j[id] = p;
  return j;
}

Posterior posterior_from_json(const Json& j, const std::string& where) {
  if (!j.is_object()) schema_error(where, "expected an object");
  Posterior p;
  for (const auto& [id, v] : j.items()) {
    if (!v.is_number()) schema_error(where + "." + id, "expected a number");
    p[id] = v.get<double>();
  }
  return p;
}

}  // namespace arena
