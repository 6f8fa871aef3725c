#pragma once

#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "arena/stimulus_space.hpp"

namespace arena {

enum class ModelKind { Gcm, Rulex, Sustain };

std::string_view to_string(ModelKind kind);
// Accepts "GCM", "RULEX", "SUSTAIN". Throws ArenaError(UnknownTheory).
ModelKind parse_model_kind(std::string_view name);

// Exemplar model. sensitivity in (0, 20]; attention weights nonnegative and
// summing to one, one per stimulus dimension.
struct GcmParams {
  double sensitivity = 4.0;
  std::vector<double> attention;

  friend bool operator==(const GcmParams&, const GcmParams&) = default;
};

// Rule-plus-exception model. Both probabilities in [0.5, 1].
struct RulexParams {
  double rule_adherence = 0.95;
  double exception_retrieval = 0.95;

  friend bool operator==(const RulexParams&, const RulexParams&) = default;
};

// Supervised adaptive clustering model.
//   attention_focus      r   in [0, 20]
//   cluster_competition  beta in [0, 20]
//   decision_consistency d   in (0, 20]
//   learning_rate        eta in (0, 1]
struct SustainParams {
  double attention_focus = 6.0;
  double cluster_competition = 4.0;
  double decision_consistency = 8.0;
  double learning_rate = 0.1;

  friend bool operator==(const SustainParams&, const SustainParams&) = default;
};

using ParameterVector = std::variant<GcmParams, RulexParams, SustainParams>;

ModelKind kind_of(const ParameterVector& params) noexcept;

// Empty string when the vector satisfies its bounds, else a description of
// the first violated bound.
std::string bounds_violation(const ParameterVector& params);
inline bool within_bounds(const ParameterVector& params) { return bounds_violation(params).empty(); }

// Projects every parameter into its bounds (GCM attention re-normalized).
ParameterVector clamp_to_bounds(ParameterVector params);

// Per test item, a categorical distribution over the K categories.
struct PredictiveProfile {
  std::string design_id;
  std::vector<std::vector<double>> items;

  friend bool operator==(const PredictiveProfile&, const PredictiveProfile&) = default;
};

PredictiveProfile gcm_predict(const ParameterVector& params, const ExperimentDesign& design);
PredictiveProfile rulex_predict(const ParameterVector& params, const ExperimentDesign& design);
PredictiveProfile sustain_train_predict(const ParameterVector& params, const ExperimentDesign& design);

// Clusters recruited by the end of training (diagnostic for tests and traces).
std::size_t sustain_cluster_count(const ParameterVector& params, const ExperimentDesign& design);

// Dispatches on the parameter vector's model kind.
PredictiveProfile predict(const ParameterVector& params, const ExperimentDesign& design);

// Mixes each item's distribution with the uniform response: (1-eps) p + eps/K.
PredictiveProfile apply_lapse(const PredictiveProfile& profile, double epsilon);

struct Particle {
  ParameterVector params;
  double weight = 1.0;
};

// A theory and the weighted parameter particles instantiating it. The id is
// the name the theory is registered under; kind selects the model equations.
struct TheoryFamily {
  std::string id;
  ModelKind kind = ModelKind::Gcm;
  std::vector<Particle> particles;

  // Rescales weights to sum to one. Throws DegenerateParticles if they sum to zero.
  void normalize();
};

// Particle-weighted mixture of the family's model predictions.
PredictiveProfile theory_predict(const TheoryFamily& theory, const ExperimentDesign& design);

// Coarse starting lattice over the parameter bounds, uniform weights.
std::vector<Particle> default_particle_grid(ModelKind kind, int dims);

// Ground-truth parameters used by the recovery study when none are configured.
ParameterVector fiducial_parameters(ModelKind kind, int dims);

}  // namespace arena
