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

#include "optcert/scenario.hpp"

namespace optcert {

struct ConvergenceRow {
    double epsilon = 0.0;
    double omega = 0.0;
    double c0 = 0.0;
    double c1 = 0.0;
    double terminal_defect = 0.0;  // x3(horizon - eps^2) - horizon target
    bool rootfind_attained = false;
    double rootfind_omega = 0.0;
    double rootfind_residual = 0.0;
};

struct ConvergenceStudy {
    std::vector<ConvergenceRow> rows;
    double slope_c0 = 0.0;
    double r2_c0 = 0.0;
    double slope_c1 = 0.0;
    double r2_c1 = 0.0;
    bool clean_rate_c0 = false;  // R^2 >= 0.99
    bool clean_rate_c1 = false;
};

/// Oscillating-control study for the planar drift system: per epsilon (omega
/// defaulting to 2*epsilon) it integrates the oscillating control, measures
/// C0/C1 distances against (0,0,t), evaluates the terminal x3 defect at
/// horizon - eps^2, and probes attainability of x3 = horizon by a bracketed
/// omega root-find over (0.05, 50). Requires >= 4 epsilons spanning a decade.
ConvergenceStudy run_convergence_study(const std::vector<double>& epsilons,
                                       const ScenarioParams& params);

}  // namespace optcert
