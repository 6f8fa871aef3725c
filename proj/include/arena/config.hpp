#pragma once

#include <map>
#include <string>

#include "arena/loop.hpp"

namespace arena {

// Everything a config file can hold: one run plus the recovery-study grid.
struct ArenaConfig {
  RunConfig run;
  std::map<std::string, ParameterVector> fiducials;  // per theory id
  StudySpec study;
};

// Defaults: three theories on their default grids with one max-divergence
// agent each, truth GCM at epsilon 0, study over all three theories and
// epsilon {0, 0.1, 0.2, 0.4} with 10 replications.
ArenaConfig default_config();

// Every key is optional. Unknown keys are rejected. Errors are
// ArenaError(ConfigError) whose message starts with "<source>: <field>".
ArenaConfig config_from_json(const Json& j, const std::string& source = "config");
ArenaConfig load_config(const std::string& path);

Json to_json(const ArenaConfig& config);

}  // namespace arena
