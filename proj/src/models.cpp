#include "arena/models.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "arena/error.hpp"

namespace arena {

std::string_view to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::Gcm: return "GCM";
    case ModelKind::Rulex: return "RULEX";
    case ModelKind::Sustain: return "SUSTAIN";
  }
  return "UNKNOWN";
}

ModelKind parse_model_kind(std::string_view name) {
  if (name == "GCM") return ModelKind::Gcm;
  if (name == "RULEX") return ModelKind::Rulex;
  if (name == "SUSTAIN") return ModelKind::Sustain;
  throw ArenaError(ErrorCode::UnknownTheory, "unknown model kind '" + std::string(name) + "'");
}

ModelKind kind_of(const ParameterVector& params) noexcept {
  switch (params.index()) {
    case 0: return ModelKind::Gcm;
    case 1: return ModelKind::Rulex;
    default: return ModelKind::Sustain;
  }
}

namespace {

constexpr double kMaxSensitivity = 20.0;
constexpr double kMinSensitivity = 1e-6;
constexpr double kMaxSustain = 20.0;
constexpr double kMinPositive = 1e-6;

bool in(double x, double lo, double hi) { return x >= lo && x <= hi; }

}  // namespace

std::string bounds_violation(const ParameterVector& params) {
  if (const auto* g = std::get_if<GcmParams>(&params)) {
    if (!(g->sensitivity > 0.0 && g->sensitivity <= kMaxSensitivity)) return "sensitivity outside (0, 20]";
    if (g->attention.empty()) return "attention weights empty";
    double sum = 0.0;
    for (double w : g->attention) {
      if (!(w >= 0.0)) return "negative attention weight";
      sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-9) return "attention weights do not sum to 1";
    return {};
  }
  if (const auto* r = std::get_if<RulexParams>(&params)) {
    if (!in(r->rule_adherence, 0.5, 1.0)) return "rule_adherence outside [0.5, 1]";
    if (!in(r->exception_retrieval, 0.5, 1.0)) return "exception_retrieval outside [0.5, 1]";
    return {};
  }
  const auto& s = std::get<SustainParams>(params);
  if (!in(s.attention_focus, 0.0, kMaxSustain)) return "attention_focus outside [0, 20]";
  if (!in(s.cluster_competition, 0.0, kMaxSustain)) return "cluster_competition outside [0, 20]";
  if (!(s.decision_consistency > 0.0 && s.decision_consistency <= kMaxSustain))
    return "decision_consistency outside (0, 20]";
  if (!(s.learning_rate > 0.0 && s.learning_rate <= 1.0)) return "learning_rate outside (0, 1]";
  return {};
}

ParameterVector clamp_to_bounds(ParameterVector params) {
  if (auto* g = std::get_if<GcmParams>(&params)) {
    g->sensitivity = std::clamp(g->sensitivity, kMinSensitivity, kMaxSensitivity);
    double sum = 0.0;
    for (double& w : g->attention) {
      w = std::max(w, 0.0);
      sum += w;
    }
    if (sum > 0.0) {
      for (double& w : g->attention) w /= sum;
    } else if (!g->attention.empty()) {
      std::fill(g->attention.begin(), g->attention.end(), 1.0 / static_cast<double>(g->attention.size()));
    }
  } else if (auto* r = std::get_if<RulexParams>(&params)) {
    r->rule_adherence = std::clamp(r->rule_adherence, 0.5, 1.0);
    r->exception_retrieval = std::clamp(r->exception_retrieval, 0.5, 1.0);
  } else {
    auto& s = std::get<SustainParams>(params);
    s.attention_focus = std::clamp(s.attention_focus, 0.0, kMaxSustain);
    s.cluster_competition = std::clamp(s.cluster_competition, 0.0, kMaxSustain);
    s.decision_consistency = std::clamp(s.decision_consistency, kMinPositive, kMaxSustain);
    s.learning_rate = std::clamp(s.learning_rate, kMinPositive, 1.0);
  }
  return params;
}

namespace {

template <typename T>
const T& expect(const ParameterVector& params, ModelKind kind) {
  const auto* p = std::get_if<T>(&params);
  if (p == nullptr) {
    throw ArenaError(ErrorCode::TheoryMismatch, "expected " + std::string(to_string(kind)) + " parameters, got " +
                                                    std::string(to_string(kind_of(params))));
  }
  return *p;
}

PredictiveProfile empty_profile(const ExperimentDesign& design) {
  PredictiveProfile profile;
  profile.design_id = design.id;
  profile.items.reserve(design.test_items.size());
  return profile;
}

}  // namespace

PredictiveProfile gcm_predict(const ParameterVector& params, const ExperimentDesign& design) {
  const auto& gcm = expect<GcmParams>(params, ModelKind::Gcm);
  const int k = design.categories;
  auto profile = empty_profile(design);

  for (const auto& x : design.test_items) {
    std::vector<double> summed(static_cast<std::size_t>(k), 0.0);
    for (const auto& ex : design.training) {
      double distance = 0.0;
      for (std::size_t d = 0; d < x.features.size(); ++d) {
        distance += gcm.attention[d] * std::abs(static_cast<double>(x.features[d]) - ex.stimulus.features[d]);
      }
      summed[static_cast<std::size_t>(ex.label)] += std::exp(-gcm.sensitivity * distance);
    }
    const double total = std::accumulate(summed.begin(), summed.end(), 0.0);
    for (double& s : summed) s /= total;
    profile.items.push_back(std::move(summed));
  }
  return profile;
}

namespace {

// Single-dimension rule: stimuli with feature `dim` = 0 get label_if_zero,
// = 1 get label_if_one.
struct Rule {
  std::size_t dim;
  Label label_if_zero;
  Label label_if_one;

  Label apply(const Stimulus& s) const { return s.features[dim] == 0 ? label_if_zero : label_if_one; }
};

std::vector<double> peaked(int k, Label favoured, double mass) {
  std::vector<double> p(static_cast<std::size_t>(k), (1.0 - mass) / static_cast<double>(k - 1));
  p[static_cast<std::size_t>(favoured)] = mass;
  return p;
}

}  // namespace

PredictiveProfile rulex_predict(const ParameterVector& params, const ExperimentDesign& design) {
  const auto& rulex = expect<RulexParams>(params, ModelKind::Rulex);
  const int k = design.categories;
  const std::size_t dims = design.training.empty() ? 0 : design.training.front().stimulus.features.size();

  std::vector<Rule> rules;
  for (std::size_t d = 0; d < dims; ++d) {
    for (Label a = 0; a < k; ++a) {
      for (Label b = 0; b < k; ++b) {
        if (a != b) rules.push_back({d, a, b});
      }
    }
  }

  std::vector<int> scores;
  scores.reserve(rules.size());
  for (const auto& rule : rules) {
    int correct = 0;
    for (const auto& item : design.training) correct += rule.apply(item.stimulus) == item.label ? 1 : 0;
    scores.push_back(correct);
  }
  const int best = scores.empty() ? 0 : *std::max_element(scores.begin(), scores.end());

  struct Hypothesis {
    Rule rule;
    std::vector<const TrainingItem*> exceptions;
  };
  std::vector<Hypothesis> top;
  for (std::size_t i = 0; i < rules.size(); ++i) {
    if (scores[i] != best) continue;
    Hypothesis h{rules[i], {}};
    for (const auto& item : design.training) {
      if (rules[i].apply(item.stimulus) != item.label) h.exceptions.push_back(&item);
    }
    top.push_back(std::move(h));
  }

  auto profile = empty_profile(design);
  for (const auto& x : design.test_items) {
    std::vector<double> avg(static_cast<std::size_t>(k), 0.0);
    for (const auto& h : top) {
      auto match = std::find_if(h.exceptions.begin(), h.exceptions.end(),
                                [&](const TrainingItem* e) { return e->stimulus == x; });
      const auto p = match != h.exceptions.end() ? peaked(k, (*match)->label, rulex.exception_retrieval)
                                                 : peaked(k, h.rule.apply(x), rulex.rule_adherence);
      for (std::size_t c = 0; c < avg.size(); ++c) avg[c] += p[c];
    }
    for (double& v : avg) v /= static_cast<double>(top.size());
    profile.items.push_back(std::move(avg));
  }
  return profile;
}

namespace {

// Supervised clustering network over binary dimensions. Each cluster's
// position on dimension k is the coordinate of the value-1 unit of the
// dimension's one-hot code, so the distance to an input is |x_k - h_k|.
class ClusterNetwork {
 public:
  ClusterNetwork(const SustainParams& params, std::size_t dims, int categories)
      : params_(params), attention_(dims, 1.0), categories_(categories) {}

  struct Response {
    std::size_t winner = 0;
    double winner_output = 0.0;  // competition-scaled winner activation
    std::vector<double> outputs;  // category output units
  };

  void train(const TrainingItem& item) {
    const auto& x = item.stimulus;
    Response response;
    if (clusters_.empty()) {
      recruit(x);
      response = respond(x, 0);
    } else {
      response = respond(x);
      if (!predicts(response, item.label)) {
        recruit(x);
        response = respond(x, clusters_.size() - 1);
      }
    }
    learn(x, item.label, response);
  }

  std::vector<double> choice_probabilities(const Stimulus& x) const {
    std::vector<double> p(static_cast<std::size_t>(categories_), 1.0 / categories_);
    if (clusters_.empty()) return p;
    const auto response = respond(x);
    const double peak = *std::max_element(response.outputs.begin(), response.outputs.end());
    double total = 0.0;
    for (std::size_t c = 0; c < p.size(); ++c) {
      p[c] = std::exp(params_.decision_consistency * (response.outputs[c] - peak));
      total += p[c];
    }
    for (double& v : p) v /= total;
    return p;
  }

  std::size_t cluster_count() const noexcept { return clusters_.size(); }

 private:
  struct Cluster {
    std::vector<double> position;
    std::vector<double> weights;
  };

  void recruit(const Stimulus& x) {
    Cluster c;
    c.position.assign(x.features.begin(), x.features.end());
    c.weights.assign(static_cast<std::size_t>(categories_), 0.0);
    clusters_.push_back(std::move(c));
  }

  double activation(const Cluster& c, const Stimulus& x) const {
    const double peak = *std::max_element(attention_.begin(), attention_.end());
    double num = 0.0, den = 0.0;
    for (std::size_t k = 0; k < attention_.size(); ++k) {
      // Tuning weights lambda^r, scaled by the largest lambda to stay finite.
      const double tuning = peak > 0.0 ? std::pow(attention_[k] / peak, params_.attention_focus) : 1.0;
      const double mu = std::abs(static_cast<double>(x.features[k]) - c.position[k]);
      num += tuning * std::exp(-attention_[k] * mu);
      den += tuning;
    }
    return den > 0.0 ? num / den : 0.0;
  }

  // forced_winner overrides the max-activation choice (used right after a
  // recruitment, when the new cluster takes the item).
  Response respond(const Stimulus& x, std::size_t forced_winner = static_cast<std::size_t>(-1)) const {
    std::vector<double> act(clusters_.size());
    for (std::size_t j = 0; j < clusters_.size(); ++j) act[j] = activation(clusters_[j], x);

    Response r;
    if (forced_winner < clusters_.size()) {
      r.winner = forced_winner;
    } else {
      r.winner = static_cast<std::size_t>(std::max_element(act.begin(), act.end()) - act.begin());
    }
    const double top = act[r.winner];
    if (top > 0.0) {
      double competition = 0.0;
      for (double a : act) competition += std::pow(a / top, params_.cluster_competition);
      r.winner_output = top / competition;
    }
    r.outputs.resize(static_cast<std::size_t>(categories_));
    for (std::size_t c = 0; c < r.outputs.size(); ++c) r.outputs[c] = clusters_[r.winner].weights[c] * r.winner_output;
    return r;
  }

  static bool predicts(const Response& r, Label label) {
    const double target = r.outputs[static_cast<std::size_t>(label)];
    for (std::size_t c = 0; c < r.outputs.size(); ++c) {
      if (static_cast<Label>(c) != label && r.outputs[c] >= target) return false;
    }
    return true;
  }

  void learn(const Stimulus& x, Label label, const Response& r) {
    auto& win = clusters_[r.winner];
    const double eta = params_.learning_rate;

    // Attention moves toward dimensions on which the winner sits close to the input.
    for (std::size_t k = 0; k < attention_.size(); ++k) {
      const double mu = std::abs(static_cast<double>(x.features[k]) - win.position[k]);
      const double lm = attention_[k] * mu;
      attention_[k] = std::max(0.0, attention_[k] + eta * std::exp(-lm) * (1.0 - lm));
    }
    for (std::size_t k = 0; k < win.position.size(); ++k) {
      win.position[k] += eta * (static_cast<double>(x.features[k]) - win.position[k]);
    }
    // Delta rule with humble-teacher targets.
    for (std::size_t c = 0; c < win.weights.size(); ++c) {
      const double out = r.outputs[c];
      const double target = static_cast<Label>(c) == label ? std::max(out, 1.0) : std::min(out, 0.0);
      win.weights[c] += eta * (target - out) * r.winner_output;
    }
  }

  SustainParams params_;
  std::vector<double> attention_;
  int categories_;
  std::vector<Cluster> clusters_;
};

}  // namespace

PredictiveProfile sustain_train_predict(const ParameterVector& params, const ExperimentDesign& design) {
  const auto& sustain = expect<SustainParams>(params, ModelKind::Sustain);
  const int k = design.categories;
  const std::size_t dims = design.test_items.empty() ? 0 : design.test_items.front().features.size();

  ClusterNetwork net(sustain, dims, k);
  const auto order = canonical_training_order(design);
  for (int epoch = 0; epoch < design.trials_per_item; ++epoch) {
    for (const auto& item : order) net.train(item);
  }

  auto profile = empty_profile(design);
  for (const auto& x : design.test_items) profile.items.push_back(net.choice_probabilities(x));
  return profile;
}

std::size_t sustain_cluster_count(const ParameterVector& params, const ExperimentDesign& design) {
  const auto& sustain = expect<SustainParams>(params, ModelKind::Sustain);
  const std::size_t dims = design.training.empty() ? 0 : design.training.front().stimulus.features.size();
  ClusterNetwork net(sustain, dims, design.categories);
  const auto order = canonical_training_order(design);
  for (int epoch = 0; epoch < design.trials_per_item; ++epoch) {
    for (const auto& item : order) net.train(item);
  }
  return net.cluster_count();
}

PredictiveProfile predict(const ParameterVector& params, const ExperimentDesign& design) {
  switch (kind_of(params)) {
    case ModelKind::Gcm: return gcm_predict(params, design);
    case ModelKind::Rulex: return rulex_predict(params, design);
    case ModelKind::Sustain: return sustain_train_predict(params, design);
  }
  return {};
}

PredictiveProfile apply_lapse(const PredictiveProfile& profile, double epsilon) {
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) {
    throw ArenaError(ErrorCode::InvalidLapse, "lapse rate must lie in [0, 1]");
  }
  PredictiveProfile out = profile;
  for (auto& item : out.items) {
    const double floor = epsilon / static_cast<double>(item.size());
    for (double& p : item) p = (1.0 - epsilon) * p + floor;
  }
  return out;
}

void TheoryFamily::normalize() {
  double total = 0.0;
  for (const auto& p : particles) total += p.weight;
  if (!(total > 0.0)) throw ArenaError(ErrorCode::DegenerateParticles, "theory '" + id + "' has no particle mass");
  for (auto& p : particles) p.weight /= total;
}

PredictiveProfile theory_predict(const TheoryFamily& theory, const ExperimentDesign& design) {
  double total = 0.0;
  for (const auto& p : theory.particles) {
    if (kind_of(p.params) != theory.kind) {
      throw ArenaError(ErrorCode::TheoryMismatch, "particle kind differs from theory '" + theory.id + "'");
    }
    total += p.weight;
  }
  if (!(total > 0.0)) throw ArenaError(ErrorCode::DegenerateParticles, "theory '" + theory.id + "' has no particle mass");

  PredictiveProfile mixture;
  for (const auto& particle : theory.particles) {
    if (particle.weight <= 0.0) continue;
    const double w = particle.weight / total;
    auto profile = predict(particle.params, design);
    if (mixture.items.empty()) {
      mixture.design_id = profile.design_id;
      mixture.items.assign(profile.items.size(), std::vector<double>{});
      for (std::size_t i = 0; i < profile.items.size(); ++i) mixture.items[i].assign(profile.items[i].size(), 0.0);
    }
    for (std::size_t i = 0; i < profile.items.size(); ++i) {
      for (std::size_t c = 0; c < profile.items[i].size(); ++c) mixture.items[i][c] += w * profile.items[i][c];
    }
  }
  return mixture;
}

std::vector<Particle> default_particle_grid(ModelKind kind, int dims) {
  std::vector<ParameterVector> grid;
  switch (kind) {
    case ModelKind::Gcm: {
      std::vector<std::vector<double>> attention;
      attention.emplace_back(static_cast<std::size_t>(dims), 1.0 / dims);
      if (dims > 1) {
        for (int focus = 0; focus < dims; ++focus) {
          std::vector<double> w(static_cast<std::size_t>(dims), 0.4 / (dims - 1));
          w[static_cast<std::size_t>(focus)] = 0.6;
          attention.push_back(std::move(w));
        }
      }
      for (double c : {0.25, 1.0, 4.0, 16.0}) {
        for (const auto& w : attention) grid.emplace_back(GcmParams{c, w});
      }
      break;
    }
    case ModelKind::Rulex:
      for (double rule : {0.55, 0.75, 0.95}) {
        for (double exc : {0.55, 0.75, 0.95}) grid.emplace_back(RulexParams{rule, exc});
      }
      break;
    case ModelKind::Sustain:
      for (double r : {1.0, 6.0}) {
        for (double beta : {1.0, 4.0}) {
          for (double d : {2.0, 8.0}) {
            for (double eta : {0.1, 0.4}) grid.emplace_back(SustainParams{r, beta, d, eta});
          }
        }
      }
      break;
  }
  std::vector<Particle> particles;
  particles.reserve(grid.size());
  for (auto& p : grid) particles.push_back({std::move(p), 1.0 / static_cast<double>(grid.size())});
  return particles;
}

ParameterVector fiducial_parameters(ModelKind kind, int dims) {
  switch (kind) {
    case ModelKind::Gcm: return GcmParams{4.0, std::vector<double>(static_cast<std::size_t>(dims), 1.0 / dims)};
    case ModelKind::Rulex: return RulexParams{0.95, 0.95};
    case ModelKind::Sustain: return SustainParams{6.0, 4.0, 8.0, 0.1};
  }
  return GcmParams{};
}

}  // namespace arena
