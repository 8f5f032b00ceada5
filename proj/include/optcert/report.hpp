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

#include <string>
#include <utility>

#include "optcert/dynamics.hpp"

namespace optcert {

struct RunReport {
    std::string scenario;
    std::string command;
    std::vector<std::pair<std::string, std::string>> metrics;
    std::vector<std::string> artifacts;
    double wall_seconds = 0.0;

    void add(const std::string& key, const std::string& value) { metrics.emplace_back(key, value); }
    void add(const std::string& key, double value);
};

/// Full-precision decimal rendering (17 significant digits).
std::string format_full(double v);

/// Header "t,x0,...,x{n-1},mode,u0,..."; LF endings; %.17g values. A missing
/// controls pointer drops the u columns. Empty trajectories produce a
/// header-only file.
void write_trajectory_csv(const std::string& path, const Trajectory& traj,
                          const std::vector<Vec>* controls = nullptr, std::size_t state_dim = 0);

struct CsvTrajectory {
    Trajectory traj;
    std::vector<Vec> controls;
};

CsvTrajectory read_trajectory_csv(const std::string& path);

void write_report(const RunReport& report, const std::string& path);

}  // namespace optcert
