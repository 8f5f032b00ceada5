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

#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "optcert/cli.hpp"
#include "optcert/config.hpp"
#include "optcert/report.hpp"
#include "optcert/rng.hpp"
#include "optcert/study.hpp"

using namespace optcert;

namespace {

std::string temp_dir() {
    static int counter = 0;
    std::string dir =
        (std::filesystem::temp_directory_path() / ("optcert_test_" + std::to_string(counter++)))
            .string();
    std::filesystem::create_directories(dir);
    return dir;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("minimal scenario file parses with defaults applied") {
    ScenarioConfig cfg = parse_scenario_text("[scenario]\nname = nonholonomic\nepsilon = 0.1\n",
                                             "inline");
    CHECK(cfg.name == "nonholonomic");
    CHECK(cfg.params.epsilon == 0.1);
    CHECK(cfg.params.omega_or_default() == doctest::Approx(0.2));
}

TEST_CASE("out-of-range values name the offending key") {
    try {
        parse_scenario_text("[scenario]\nname = friction\ndt = -1\n", "inline");
        FAIL("expected a configuration error");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("dt") != std::string::npos);
    }
}

TEST_CASE("duplicate keys report both lines") {
    try {
        parse_scenario_text("[scenario]\nname = friction\ndelta = 0.1\ndelta = 0.2\n", "inline");
        FAIL("expected a configuration error");
    } catch (const ConfigError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("duplicate key 'delta'") != std::string::npos);
        CHECK(msg.find("line 3") != std::string::npos);
        CHECK(msg.find(":4:") != std::string::npos);
    }
}

TEST_CASE("every malformed line is reported, not just the first") {
    try {
        parse_scenario_text("[scenario]\nname = friction\nbogus_key = 1\njust words\n",
                            "inline");
        FAIL("expected a configuration error");
    } catch (const ConfigError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("unknown key 'bogus_key'") != std::string::npos);
        CHECK(msg.find("expected 'key = value'") != std::string::npos);
    }
}

TEST_CASE("missing scenario name is an error") {
    CHECK_THROWS_AS((void)parse_scenario_text("[run]\nseed = 1\n", "inline"), ConfigError);
}

TEST_CASE("scenario files round-trip through save and load") {
    ScenarioConfig cfg;
    cfg.name = "temperature";
    cfg.params.epsilon = 0.05;
    cfg.params.sigma1 = 0.25;
    cfg.params.terminal_nominal = 19.0;
    cfg.run.seed = 42;
    cfg.run.n_paths = 777;
    cfg.run.psi0 = {0.0, 0.0, -1.0};
    cfg.run.sense = 1;
    cfg.run.strict = true;

    const std::string path = temp_dir() + "/roundtrip.cfg";
    save_scenario(cfg, path);
    ScenarioConfig back = load_scenario(path);
    CHECK(back.name == cfg.name);
    CHECK(back.params.epsilon == cfg.params.epsilon);
    CHECK(back.params.sigma1 == cfg.params.sigma1);
    CHECK(back.params.terminal_nominal == cfg.params.terminal_nominal);
    CHECK(back.run.seed == cfg.run.seed);
    CHECK(back.run.n_paths == cfg.run.n_paths);
    CHECK(back.run.psi0 == cfg.run.psi0);
    CHECK(back.run.sense == cfg.run.sense);
    CHECK(back.run.strict == cfg.run.strict);
}

TEST_CASE("set overrides resolve keys across sections") {
    ScenarioConfig cfg;
    cfg.name = "friction";
    apply_override(cfg, "delta=0.01");
    apply_override(cfg, "psi0=1,0");
    CHECK(cfg.params.delta == 0.01);
    CHECK(cfg.run.psi0 == Vec{1.0, 0.0});
    CHECK_THROWS_AS(apply_override(cfg, "nonsense=3"), ConfigError);
    CHECK_THROWS_AS(apply_override(cfg, "no_equals"), ConfigError);
}

TEST_CASE("trajectory CSV round-trips to distance zero") {
    Trajectory traj;
    SplitMix64 rng(55);
    for (int i = 0; i <= 40; ++i) {
        traj.times.push_back(i * 0.025);
        traj.states.push_back(
            {rng.uniform(-3.0, 3.0), rng.uniform(-3.0, 3.0), rng.uniform(-3.0, 3.0)});
        traj.modes.push_back(i % 2);
    }
    std::vector<Vec> controls(traj.times.size(), Vec{0.5, -0.25});
    const std::string dir = temp_dir();
    const std::string path = dir + "/traj.csv";
    write_trajectory_csv(path, traj, &controls);

    CsvTrajectory back = read_trajectory_csv(path);
    CHECK(trajectory_distance(traj, back.traj, TrajNorm::C0) == 0.0);
    CHECK(trajectory_distance(traj, back.traj, TrajNorm::C1) == 0.0);
    CHECK(back.traj.modes == traj.modes);
    CHECK(back.controls.size() == controls.size());

    // Header shape: t, three states, mode, two controls.
    std::ifstream in(path);
    std::string header;
    std::getline(in, header);
    CHECK(header == "t,x0,x1,x2,mode,u0,u1");

    // Emission is byte-stable.
    const std::string again = dir + "/traj2.csv";
    write_trajectory_csv(again, traj, &controls);
    CHECK(slurp(path) == slurp(again));
}

TEST_CASE("empty trajectories produce a header-only CSV") {
    Trajectory empty;
    const std::string path = temp_dir() + "/empty.csv";
    write_trajectory_csv(path, empty, nullptr, 3);
    CHECK(slurp(path) == "t,x0,x1,x2,mode\n");
}

TEST_CASE("reports render every metric line") {
    RunReport report;
    report.scenario = "friction";
    report.command = "simulate";
    report.add("final_state_norm", 0.25);
    report.artifacts.push_back("somewhere/trajectory.csv");
    const std::string path = temp_dir() + "/report.txt";
    write_report(report, path);
    const std::string text = slurp(path);
    CHECK(text.find("scenario = friction") != std::string::npos);
    CHECK(text.find("final_state_norm = 0.25") != std::string::npos);
    CHECK(text.find("artifact = somewhere/trajectory.csv") != std::string::npos);
}

TEST_CASE("terminal cost derivatives of the thermostat check against finite differences") {
    TemperatureBuild tb = build_temperature(ScenarioParams{});
    CHECK(cost_probe_defect(tb.cost, {{18.5}, {20.0}, {21.5}}) <= 1e-5);
}

TEST_CASE("reset jacobians of the bouncing ball are well conditioned") {
    BouncingBallBuild bb = build_bouncing_ball(ScenarioParams{});
    const double cond = bb.automaton.reset_condition_estimate(0, {{0.0, -2.0}, {0.0, -4.0}});
    CHECK(cond >= 1.0);
    CHECK(cond <= 100.0);
}

TEST_CASE("convergence studies demand enough epsilons across a decade") {
    ScenarioParams p;
    CHECK_THROWS_AS((void)run_convergence_study({0.1, 0.05, 0.02}, p), ConfigError);
    CHECK_THROWS_AS((void)run_convergence_study({0.1, 0.09, 0.08, 0.07}, p), ConfigError);
}

TEST_CASE("convergence study rows match the closed-form expansion") {
    ScenarioParams p;
    p.dt = 1e-4;
    ConvergenceStudy study = run_convergence_study({0.2, 0.1, 0.05, 0.02}, p);
    const ConvergenceRow* row = nullptr;
    for (const auto& r : study.rows)
        if (r.epsilon == 0.1) row = &r;
    REQUIRE(row != nullptr);
    // x3(1 - eps^2) = 1 - eps^2 - sin(2 - 2 eps^2)/4 ~ 0.76064 at eps = 0.1.
    CHECK(row->terminal_defect == doctest::Approx(0.76064 - 1.0).epsilon(0).scale(1).epsilon(1e-4));
    // No omega in (0.05, 50) attains x3 = 1; the best residual sits near 0.19.
    CHECK_FALSE(row->rootfind_attained);
    CHECK(row->rootfind_residual == doctest::Approx(0.193).epsilon(0.05));
    // omega = 2 eps keeps the distances flat, so no clean rate is claimed.
    CHECK_FALSE(study.clean_rate_c0);
    CHECK(std::abs(study.slope_c0) <= 0.05);
}

TEST_CASE("cli loads scenario files and applies overrides on top") {
    const std::string dir = temp_dir();
    ScenarioConfig cfg;
    cfg.name = "friction";
    cfg.params.delta = 0.02;
    const std::string path = dir + "/pulse.cfg";
    save_scenario(cfg, path);

    std::ostringstream out, err;
    const int code = run_cli({"simulate", "--scenario", path, "--out", dir + "/run"}, out, err);
    CHECK(code == 0);
    CHECK(out.str().find("delta = 0.02") != std::string::npos);
    CHECK(std::filesystem::exists(dir + "/run/trajectory.csv"));
}

TEST_CASE("runtime failures exit with code 3") {
    // A huge volatility makes every thermostat path diverge.
    std::ostringstream out, err;
    const int code = run_cli({"montecarlo", "--builtin", "temperature", "--set", "sigma1=80",
                              "--set", "sigma2=80", "--set", "n_paths=4", "--out",
                              temp_dir() + "/boom"},
                             out, err);
    CHECK(code == 3);
    CHECK(err.str().find("runtime error") != std::string::npos);
}

TEST_CASE("cli rejects unknown subcommands with usage text") {
    std::ostringstream out, err;
    const int code = run_cli({"frobnicate"}, out, err);
    CHECK(code == 2);
    CHECK(err.str().find("simulate") != std::string::npos);
}

TEST_CASE("cli surfaces configuration problems as exit 2") {
    std::ostringstream out, err;
    CHECK(run_cli({"simulate"}, out, err) == 2);
    CHECK(run_cli({"simulate", "--builtin", "nope"}, out, err) == 2);
    CHECK(run_cli({"check", "first", "--builtin", "nonholonomic"}, out, err) == 2);
}

TEST_CASE("cli help exits zero") {
    std::ostringstream out, err;
    CHECK(run_cli({"--help"}, out, err) == 0);
    CHECK(out.str().find("simulate") != std::string::npos);
}
