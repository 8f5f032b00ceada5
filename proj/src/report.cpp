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

#include "optcert/report.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace optcert {

std::string format_full(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void RunReport::add(const std::string& key, double value) {
    metrics.emplace_back(key, format_full(value));
}

void write_trajectory_csv(const std::string& path, const Trajectory& traj,
                          const std::vector<Vec>* controls, std::size_t state_dim) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write CSV '" + path + "'");
    const std::size_t n = traj.states.empty() ? state_dim : traj.states.front().size();
    const std::size_t r =
        (controls && !controls->empty()) ? controls->front().size() : 0;
    out << "t";
    for (std::size_t i = 0; i < n; ++i) out << ",x" << i;
    out << ",mode";
    for (std::size_t j = 0; j < r; ++j) out << ",u" << j;
    out << "\n";
    for (std::size_t k = 0; k < traj.times.size(); ++k) {
        out << format_full(traj.times[k]);
        for (std::size_t i = 0; i < n; ++i) out << "," << format_full(traj.states[k][i]);
        out << "," << (traj.modes.empty() ? 0 : traj.modes[k]);
        if (r) {
            const Vec& u = (*controls)[k];
            for (std::size_t j = 0; j < r; ++j) out << "," << format_full(u[j]);
        }
        out << "\n";
    }
    if (!out) throw IoError("short write to CSV '" + path + "'");
}

CsvTrajectory read_trajectory_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read CSV '" + path + "'");
    std::string header;
    if (!std::getline(in, header)) throw IoError("empty CSV '" + path + "'");
    while (!header.empty() && (header.back() == '\n' || header.back() == '\r'))
        header.pop_back();

    std::vector<std::string> cols;
    {
        std::stringstream ss(header);
        std::string c;
        while (std::getline(ss, c, ',')) cols.push_back(c);
    }
    std::size_t n = 0, r = 0;
    std::ptrdiff_t mode_col = -1;
    for (std::size_t i = 0; i < cols.size(); ++i) {
        if (cols[i] == "mode") mode_col = static_cast<std::ptrdiff_t>(i);
        else if (!cols[i].empty() && cols[i][0] == 'x') ++n;
        else if (!cols[i].empty() && cols[i][0] == 'u') ++r;
    }
    if (cols.empty() || cols[0] != "t" || mode_col < 0)
        throw IoError("CSV '" + path + "' lacks the t/mode header layout");

    CsvTrajectory out;
    std::string line;
    while (std::getline(in, line)) {
        while (!line.empty() && (line.back() == '\n' || line.back() == '\r')) line.pop_back();
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::vector<std::string> cells;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (cells.size() != cols.size())
            throw IoError("CSV '" + path + "': ragged row of " + std::to_string(cells.size()) +
                          " cells");
        out.traj.times.push_back(std::stod(cells[0]));
        Vec x(n);
        for (std::size_t i = 0; i < n; ++i) x[i] = std::stod(cells[1 + i]);
        out.traj.states.push_back(std::move(x));
        out.traj.modes.push_back(std::stoi(cells[static_cast<std::size_t>(mode_col)]));
        if (r) {
            Vec u(r);
            for (std::size_t j = 0; j < r; ++j)
                u[j] = std::stod(cells[static_cast<std::size_t>(mode_col) + 1 + j]);
            out.controls.push_back(std::move(u));
        }
    }
    return out;
}

void write_report(const RunReport& report, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write report '" + path + "'");
    out << "scenario = " << report.scenario << "\n";
    out << "command = " << report.command << "\n";
    for (const auto& [k, v] : report.metrics) out << k << " = " << v << "\n";
    for (const auto& a : report.artifacts) out << "artifact = " << a << "\n";
    out << "wall_seconds = " << format_full(report.wall_seconds) << "\n";
    if (!out) throw IoError("short write to report '" + path + "'");
}

}  // namespace optcert
