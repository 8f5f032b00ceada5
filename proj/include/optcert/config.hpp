/*
 Copyright 2026 The OptCert Authors

 Licensed under the Apache License, Version 2.0 (the "License");
 you may not use this file except in compliance with the License.
 You may obtain a copy of the License at

      https://www.apache.org/licenses/LICENSE-2.0

 Unless required by applicable law or agreed to in writing, software
 distributed under the License is distributed on an "AS IS" BASIS,
 WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 See the License for the specific language governing permissions and
 limitations under the License.
*/

#pragma once

#include <cstdint>
#include <string>

#include "optcert/scenario.hpp"

namespace optcert {

struct RunOptions {
    std::string command;
    std::uint64_t seed = 0;
    double tol = 1e-6;
    std::size_t n_paths = 10000;
    std::size_t check_paths = 128;
    int angular_grid = 360;
    int workers = 2;
    std::string out_dir;
    int sense = -1;
    Vec psi0;
    std::vector<double> multipliers;
    std::vector<double> epsilons;
    Vec q0_diag;
    Vec q_slope_diag;
    bool strict = false;
};

struct ScenarioConfig {
    std::string name;
    ScenarioParams params;
    RunOptions run;
};

/// Parses the sectioned key-value format:
///   # comment
///   [scenario]
///   name = nonholonomic
///   epsilon = 0.1
///   [run]
///   seed = 42
/// Unknown keys, duplicate keys (both lines named), syntax errors (line and
/// column), and out-of-range values are all collected and reported together.
ScenarioConfig load_scenario(const std::string& path);

ScenarioConfig parse_scenario_text(const std::string& text, const std::string& origin);

void save_scenario(const ScenarioConfig& cfg, const std::string& path);

/// Applies one "key=value" override (the CLI --set flag); the section is
/// inferred from the key registry.
void apply_override(ScenarioConfig& cfg, const std::string& key_value);

bool is_known_builtin(const std::string& name);

}  // namespace optcert
