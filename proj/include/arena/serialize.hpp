#pragma once

// Structured-text (JSON) records for designs, datasets, particles and
// posteriors. Field order is fixed so written files are byte-stable.

#include <json.hpp>
#include <string>

#include "arena/adjudication.hpp"
#include "arena/models.hpp"
#include "arena/oracle.hpp"
#include "arena/stimulus_space.hpp"

namespace arena {

using Json = nlohmann::ordered_json;

Json to_json(const StimulusSpace& space);
Json to_json(const ExperimentDesign& design);
Json to_json(const ResponseDataset& data);
Json to_json(const PredictiveProfile& profile);
Json to_json(const ParameterVector& params);
Json to_json(const TheoryFamily& theory);
Json to_json(const Posterior& posterior);

// Readers throw ArenaError(SchemaError) naming the offending field path,
// prefixed by `where`.
StimulusSpace space_from_json(const Json& j, const std::string& where = "space");
ExperimentDesign design_from_json(const Json& j, const std::string& where = "design");
ResponseDataset dataset_from_json(const Json& j, const std::string& where = "responses");
ParameterVector params_from_json(const Json& j, const std::string& where = "params");
TheoryFamily theory_from_json(const Json& j, const std::string& where = "theory");
Posterior posterior_from_json(const Json& j, const std::string& where = "posterior");

// Shortest round-trip decimal text for a double.
std::string format_double(double value);

}  // namespace arena
