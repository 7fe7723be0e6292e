#pragma once

#include <string>
#include <vector>

#include "fedlab/calibration.hpp"
#include "fedlab/federation.hpp"
#include "fedlab/selection.hpp"
#include "fedlab/synthgen.hpp"

namespace fedlab::expcli {

struct ExperimentConfig {
    synthgen::PopulationSpec population;
    selection::SelectionSpec selection;
    federation::TrainingConfig training;   // method field unused; see methods list
    federation::MethodConfig method_config;
    std::vector<federation::Method> methods;
    int replications = 10;
    std::string sweep_param;
    std::vector<double> sweep_values;
    std::uint64_t master_seed = 42;
};

// All documented defaults; an empty config file yields exactly this.
ExperimentConfig default_config();

// key = value sections; '#' comments; unknown keys rejected with the
// offending name, parse errors carry the line number.
ExperimentConfig load_config(const std::string& path);
ExperimentConfig parse_config(const std::string& text);

std::string serialize_config(const ExperimentConfig& cfg);

// Override a named numeric parameter (the sweepable subset).
void apply_override(ExperimentConfig& cfg, const std::string& name, double value);

}  // namespace fedlab::expcli
