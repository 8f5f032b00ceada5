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

#include "optcert/cli.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <ostream>

#include "optcert/config.hpp"
#include "optcert/report.hpp"
#include "optcert/study.hpp"

namespace optcert {

namespace {

namespace fs = std::filesystem;

struct CommonFlags {
    std::string scenario_file;
    std::string builtin;
    std::vector<std::string> sets;
    std::string out_dir;
    std::uint64_t seed = 0;
    bool seed_given = false;
    double tol = 0.0;
    bool tol_given = false;
    bool strict = false;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
    cmd->add_option("--scenario", flags.scenario_file, "scenario file (sectioned key=value)");
    cmd->add_option("--builtin", flags.builtin,
                    "builtin scenario: nonholonomic|friction|bouncing-ball|temperature");
    cmd->add_option("--set", flags.sets, "override key=value (repeatable)");
    cmd->add_option("--out", flags.out_dir, "output directory");
    cmd->add_option("--seed", flags.seed, "random seed")->each([&](const std::string&) {
        flags.seed_given = true;
    });
    cmd->add_option("--tol", flags.tol, "acceptance tolerance")->each([&](const std::string&) {
        flags.tol_given = true;
    });
    cmd->add_flag("--strict", flags.strict, "promote soft warnings to exit 1");
}

ScenarioConfig resolve_config(const CommonFlags& flags) {
    ScenarioConfig cfg;
    if (!flags.scenario_file.empty()) {
        cfg = load_scenario(flags.scenario_file);
    }
    if (!flags.builtin.empty()) {
        if (!is_known_builtin(flags.builtin))
            throw ConfigError("unknown builtin '" + flags.builtin + "'");
        cfg.name = flags.builtin;
    }
    for (const auto& kv : flags.sets) apply_override(cfg, kv);
    if (cfg.name.empty())
        throw ConfigError("no scenario selected; pass --builtin NAME or --scenario FILE");
    if (flags.seed_given) cfg.run.seed = flags.seed;
    if (flags.tol_given) cfg.run.tol = flags.tol;
    if (!flags.out_dir.empty()) cfg.run.out_dir = flags.out_dir;
    if (cfg.run.out_dir.empty()) {
        if (const char* env = std::getenv("OPTCERT_OUT_DIR")) cfg.run.out_dir = env;
        else cfg.run.out_dir = "optcert-out";
    }
    if (flags.strict) cfg.run.strict = true;
    return cfg;
}

std::string ensure_out_dir(const ScenarioConfig& cfg) {
    fs::create_directories(cfg.run.out_dir);
    return cfg.run.out_dir;
}

SimConfig sim_config(const ScenarioConfig& cfg) {
    SimConfig sim;
    sim.dt = cfg.params.dt;
    sim.event_tol = std::min(cfg.params.event_tol, cfg.params.dt);
    return sim;
}

EnsembleConfig ensemble_config(const ScenarioConfig& cfg, std::size_t paths) {
    EnsembleConfig ens;
    ens.seed = cfg.run.seed;
    ens.n_paths = paths;
    ens.dt = cfg.params.em_dt;
    ens.workers = cfg.run.workers;
    return ens;
}

void finish_report(RunReport& report, const std::string& dir,
                   std::ostream& out,
                   std::chrono::steady_clock::time_point start) {
    report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const std::string path = dir + "/report.txt";
    write_report(report, path);
    out << "scenario = " << report.scenario << "\n";
    out << "command = " << report.command << "\n";
    for (const auto& [k, v] : report.metrics) out << k << " = " << v << "\n";
    out << "report = " << path << "\n";
}

void add_certificate_metrics(RunReport& report, const CertificateReport& rep) {
    report.add("adjoint_residual", rep.adjoint_residual);
    report.add("max_gap", rep.max_gap);
    report.add("transversality_excess", rep.transversality_excess);
    report.add("nontriviality_slack", rep.nontriviality_slack);
    report.add("admissibility_defect", rep.admissibility_defect);
    report.add("violation", rep.violation);
    report.add("verdict", std::string(rep.accept ? "ACCEPT" : "REJECT"));
}

// ============================================================================
// simulate
// ============================================================================

int cmd_simulate(const ScenarioConfig& cfg, std::ostream& out) {
    const auto start = std::chrono::steady_clock::now();
    const std::string dir = ensure_out_dir(cfg);
    RunReport report;
    report.scenario = cfg.name;
    report.command = "simulate";
    int warnings = 0;

    if (cfg.name == "nonholonomic") {
        NonholonomicBuild nb = build_nonholonomic(cfg.params);
        const double eps = cfg.params.epsilon;
        const double omega = cfg.params.omega_or_default();
        ControlSignal u = nonholonomic_oscillating_control(eps, omega);
        auto rhs = [&](double t, const Vec& x) { return nb.system.modes[0].f(t, x, u(t)); };
        Trajectory traj =
            integrate_ode(rhs, {0.0, 0.0, 0.0}, 0.0, cfg.params.horizon, sim_config(cfg));
        std::vector<Vec> controls;
        controls.reserve(traj.times.size());
        for (double t : traj.times) controls.push_back(u(t));
        double gap = 0.0;
        for (std::size_t i = 0; i < traj.times.size(); ++i)
            gap = std::max(gap, norm_inf(sub(traj.states[i],
                                             nonholonomic_closed_form(eps, omega,
                                                                      traj.times[i]))));
        const std::string csv = dir + "/trajectory.csv";
        write_trajectory_csv(csv, traj, &controls);
        report.artifacts.push_back(csv);
        report.add("epsilon", eps);
        report.add("omega", omega);
        report.add("closed_form_gap", gap);
        report.add("terminal_x3", traj.back_state()[2]);
    } else if (cfg.name == "friction") {
        FrictionBuild fb = build_friction(cfg.params);
        SimConfig sim = sim_config(cfg);
        sim.dt = std::min(sim.dt, cfg.params.delta / 50.0);
        sim.event_tol = std::min(sim.event_tol, sim.dt);
        Trajectory traj = simulate_filippov(fb.filippov, fb.pulse_control, {0.0, 0.0}, 0.0,
                                            fb.pulse_end, sim, fb.pulse_schedule);
        std::vector<Vec> controls;
        controls.reserve(traj.times.size());
        for (double t : traj.times) controls.push_back(fb.pulse_control(t));
        const std::string csv = dir + "/trajectory.csv";
        write_trajectory_csv(csv, traj, &controls);
        report.artifacts.push_back(csv);
        report.add("delta", cfg.params.delta);
        report.add("final_state_norm", norm2(traj.back_state()));
    } else if (cfg.name == "bouncing-ball") {
        BouncingBallBuild bb = build_bouncing_ball(cfg.params);
        std::vector<Vec> controls;
        controls.reserve(bb.reference.times.size());
        for (std::size_t i = 0; i < bb.reference.times.size(); ++i)
            controls.push_back(bb.reference_control(bb.reference.modes[i],
                                                    bb.reference.times[i]));
        const std::string csv = dir + "/trajectory.csv";
        write_trajectory_csv(csv, bb.reference, &controls);
        report.artifacts.push_back(csv);
        report.add("impact_time", bb.impact_time);
        report.add("t_end", bb.t_end);
        double restitution_defect = 0.0;
        for (const auto& ev : bb.reference.events)
            if (ev.kind == EventKind::Impact)
                restitution_defect =
                    std::max(restitution_defect,
                             std::abs(ev.state_after[1] + cfg.params.e1 * ev.state_before[1]));
        report.add("restitution_defect", restitution_defect);
    } else if (cfg.name == "temperature") {
        TemperatureBuild tb = build_temperature(cfg.params);
        StochasticCandidate cand = reduced_adjoint_propagate(tb.system, tb.reduced_cfg, tb.cost);
        StochasticControl control = temperature_feedback(tb, cand);
        EnsembleConfig ens = ensemble_config(cfg, cfg.run.n_paths);
        PathEnsemble ensemble =
            simulate_paths(tb.system, control, tb.x0, tb.q0, 0.0, cfg.params.t_final, ens);
        double mean = 0.0, mn = 1e300, mx = -1e300;
        std::size_t used = 0;
        for (const auto& p : ensemble.paths) {
            if (p.diverged) continue;
            const double xt = p.states.back()[0];
            mean += xt;
            mn = std::min(mn, xt);
            mx = std::max(mx, xt);
            ++used;
        }
        if (used == 0) throw DomainError("all paths diverged");
        mean /= static_cast<double>(used);
        const PathSim& p0 = ensemble.paths.front();
        Trajectory t0;
        t0.times = p0.times;
        t0.states = p0.states;
        t0.modes = p0.modes;
        const std::string csv = dir + "/trajectory.csv";
        write_trajectory_csv(csv, t0, &p0.controls);
        report.artifacts.push_back(csv);
        report.add("n_paths", static_cast<double>(ensemble.n_paths));
        report.add("n_diverged", static_cast<double>(ensemble.n_diverged));
        report.add("terminal_mean", mean);
        report.add("terminal_min", mn);
        report.add("terminal_max", mx);
        if (ensemble.n_diverged > 0) ++warnings;
    } else {
        throw ConfigError("simulate does not support scenario '" + cfg.name + "'");
    }

    finish_report(report, dir, out, start);
    return (cfg.run.strict && warnings) ? 1 : 0;
}

// ============================================================================
// check
// ============================================================================

Vec require_psi0(const ScenarioConfig& cfg, std::size_t dim) {
    if (cfg.run.psi0.size() != dim)
        throw ConfigError("this check needs --set psi0=v1,...,v" + std::to_string(dim));
    return cfg.run.psi0;
}

int cmd_check(const ScenarioConfig& cfg, const std::string& kind, std::ostream& out) {
    const auto start = std::chrono::steady_clock::now();
    const std::string dir = ensure_out_dir(cfg);
    RunReport report;
    report.scenario = cfg.name;
    report.command = "check " + kind;
    bool accept = false;

    if (kind == "first") {
        ControlSystem system;
        Reference reference;
        if (cfg.name == "nonholonomic") {
            NonholonomicBuild nb = build_nonholonomic(cfg.params);
            system = nb.system;
            reference = nb.reference;
        } else if (cfg.name == "friction") {
            FrictionBuild fb = build_friction(cfg.params);
            system = fb.surface_system;
            reference = fb.reference;
        } else {
            throw ConfigError("check first supports nonholonomic and friction");
        }
        FirstOrderCandidate cand{require_psi0(cfg, system.state_dim), cfg.run.sense};
        CertificateReport rep = check_first_order_candidate(system, reference, cand, cfg.run.tol);
        add_certificate_metrics(report, rep);
        accept = rep.accept;
    } else if (kind == "second") {
        if (cfg.name != "nonholonomic")
            throw ConfigError("check second supports the nonholonomic scenario");
        NonholonomicBuild nb = build_nonholonomic(cfg.params);
        SecondOrderCandidate cand;
        cand.psi0 = require_psi0(cfg, nb.system.state_dim);
        cand.sense = cfg.run.sense;
        cand.q0 = Mat(nb.system.state_dim, nb.system.state_dim);
        if (!cfg.run.q0_diag.empty()) {
            if (cfg.run.q0_diag.size() != nb.system.state_dim)
                throw ConfigError("q0_diag needs state_dim entries");
            cand.q0 = Mat::diag(cfg.run.q0_diag);
        }
        if (!cfg.run.q_slope_diag.empty()) {
            if (cfg.run.q_slope_diag.size() != nb.system.state_dim)
                throw ConfigError("q_slope_diag needs state_dim entries");
            cand.q_slope = Mat::diag(cfg.run.q_slope_diag);
        }
        SecondOrderReport rep =
            check_second_order_candidate(nb.system, nb.reference, cand, cfg.run.tol);
        add_certificate_metrics(report, rep);
        report.add("riccati_excess", rep.riccati_excess);
        report.add("second_max_gap", rep.second_max_gap);
        report.add("psi_scalar_defect", rep.psi_scalar_defect);
        report.add("second_transversality_excess", rep.second_transversality_excess);
        accept = rep.accept;
    } else if (kind == "filippov") {
        if (cfg.name != "friction")
            throw ConfigError("check filippov supports the friction scenario");
        FrictionBuild fb = build_friction(cfg.params);
        NonsmoothReport rep =
            check_filippov_candidate(fb.filippov, fb.reference, require_psi0(cfg, 2),
                                     cfg.run.multipliers, cfg.run.sense, cfg.run.tol);
        report.add("max_gap", rep.max_gap);
        report.add("transversality_excess", rep.transversality_excess);
        report.add("nontriviality_slack", rep.nontriviality_slack);
        report.add("violation", rep.violation);
        report.add("verdict", std::string(rep.accept ? "ACCEPT" : "REJECT"));
        accept = rep.accept;
    } else if (kind == "hybrid") {
        if (cfg.name != "bouncing-ball")
            throw ConfigError("check hybrid supports the bouncing-ball scenario");
        BouncingBallBuild bb = build_bouncing_ball(cfg.params);
        std::size_t n_jumps = 0;
        for (const auto& ev : bb.reference.events)
            if (ev.kind == EventKind::Impact || ev.kind == EventKind::ModeSwitch) ++n_jumps;
        std::vector<double> nus = cfg.run.multipliers;
        if (nus.empty()) nus.assign(n_jumps, 0.0);
        NonsmoothReport rep =
            check_hybrid_candidate(bb.automaton, bb.reference, bb.reference_control,
                                   require_psi0(cfg, 2), nus, cfg.run.sense, cfg.run.tol);
        report.add("max_gap", rep.max_gap);
        report.add("transversality_excess", rep.transversality_excess);
        report.add("switching_transversality_excess", rep.switching_transversality_excess);
        for (std::size_t j = 0; j < rep.jump_residuals.size(); ++j)
            report.add("jump_residual_" + std::to_string(j), rep.jump_residuals[j]);
        report.add("violation", rep.violation);
        report.add("verdict", std::string(rep.accept ? "ACCEPT" : "REJECT"));
        accept = rep.accept;
    } else if (kind == "stochastic") {
        if (cfg.name != "temperature")
            throw ConfigError("check stochastic supports the temperature scenario");
        TemperatureBuild tb = build_temperature(cfg.params);
        StochasticCandidate cand = reduced_adjoint_propagate(tb.system, tb.reduced_cfg, tb.cost);
        StochasticControl control = temperature_feedback(tb, cand);
        EnsembleConfig ens = ensemble_config(cfg, cfg.run.check_paths);
        PathEnsemble ensemble =
            simulate_paths(tb.system, control, tb.x0, tb.q0, 0.0, cfg.params.t_final, ens);
        StochasticReport rep =
            check_stochastic_candidate(tb.system, ensemble, control, cand, tb.cost, cfg.run.tol);
        report.add("terminal_psi_residual", rep.terminal_psi_residual);
        report.add("terminal_psi_matrix_residual", rep.terminal_psi_matrix_residual);
        report.add("max_gap", rep.max_gap);
        report.add("n_jump_residuals", static_cast<double>(rep.jump_residuals.size()));
        report.add("violation", rep.violation);
        report.add("verdict", std::string(rep.accept ? "ACCEPT" : "REJECT"));
        accept = rep.accept;
    } else {
        throw ConfigError("unknown check kind '" + kind + "'");
    }

    finish_report(report, dir, out, start);
    return accept ? 0 : 1;
}

// ============================================================================
// search
// ============================================================================

int cmd_search(const ScenarioConfig& cfg, const std::string& kind, std::ostream& out) {
    const auto start = std::chrono::steady_clock::now();
    const std::string dir = ensure_out_dir(cfg);
    RunReport report;
    report.scenario = cfg.name;
    report.command = "search " + kind;
    double min_violation = 0.0;

    if (kind == "first") {
        if (cfg.name == "nonholonomic" || cfg.name == "friction") {
            ControlSystem system;
            Reference reference;
            if (cfg.name == "nonholonomic") {
                NonholonomicBuild nb = build_nonholonomic(cfg.params);
                system = nb.system;
                reference = nb.reference;
            } else {
                FrictionBuild fb = build_friction(cfg.params);
                system = fb.surface_system;
                reference = fb.reference;
            }
            FirstOrderSearchGrid grid;
            grid.angular_samples = cfg.run.angular_grid;
            grid.workers = cfg.run.workers;
            FirstOrderSearchResult res =
                search_first_order(system, reference, cfg.run.sense, grid, cfg.run.tol);
            min_violation = res.min_violation;
            report.add("min_violation", res.min_violation);
            report.add("grid_modulus", res.grid_modulus);
            for (std::size_t i = 0; i < res.argmin.psi0.size(); ++i)
                report.add("argmin_psi0_" + std::to_string(i), res.argmin.psi0[i]);
        } else if (cfg.name == "bouncing-ball") {
            BouncingBallBuild bb = build_bouncing_ball(cfg.params);
            HybridSearchResult res =
                search_hybrid_candidates(bb.automaton, bb.reference, bb.reference_control,
                                         cfg.run.sense, cfg.run.angular_grid, cfg.run.tol);
            min_violation = res.min_violation;
            report.add("min_violation", res.min_violation);
            for (std::size_t i = 0; i < res.argmin_psi0.size(); ++i)
                report.add("argmin_psi0_" + std::to_string(i), res.argmin_psi0[i]);
        } else {
            throw ConfigError("search first does not support scenario '" + cfg.name + "'");
        }
    } else if (kind == "second") {
        if (cfg.name != "nonholonomic")
            throw ConfigError("search second supports the nonholonomic scenario");
        NonholonomicBuild nb = build_nonholonomic(cfg.params);
        SecondOrderSearchGrid grid;
        grid.angular_samples = std::min(cfg.run.angular_grid, 24);
        grid.workers = cfg.run.workers;
        MeasureVariation shift1;
        shift1.pieces = {{0.0, cfg.params.horizon,
                          {{{1.0, 0.0}, 0.1}, {{-1.0, 0.0}, -0.1}}}};
        MeasureVariation shift2;
        shift2.pieces = {{0.0, cfg.params.horizon,
                          {{{0.0, 1.0}, 0.1}, {{0.0, -1.0}, -0.1}}}};
        grid.variations = {MeasureVariation{}, shift1, shift2};
        SecondOrderSearchResult res =
            search_second_order(nb.system, nb.reference, cfg.run.sense, grid, cfg.run.tol);
        min_violation = res.min_violation;
        report.add("min_violation", res.min_violation);
        for (std::size_t i = 0; i < res.argmin.psi0.size(); ++i)
            report.add("argmin_psi0_" + std::to_string(i), res.argmin.psi0[i]);
    } else {
        throw ConfigError("unknown search kind '" + kind + "'");
    }

    finish_report(report, dir, out, start);
    return min_violation <= cfg.run.tol ? 0 : 1;
}

// ============================================================================
// converge / montecarlo / variation-test
// ============================================================================

int cmd_converge(const ScenarioConfig& cfg, std::ostream& out) {
    const auto start = std::chrono::steady_clock::now();
    if (cfg.name != "nonholonomic")
        throw ConfigError("converge supports the nonholonomic scenario");
    const std::string dir = ensure_out_dir(cfg);
    std::vector<double> epsilons = cfg.run.epsilons;
    if (epsilons.empty()) epsilons = {0.2, 0.1, 0.05, 0.02, 0.01};
    ConvergenceStudy study = run_convergence_study(epsilons, cfg.params);

    RunReport report;
    report.scenario = cfg.name;
    report.command = "converge";
    const std::string csv = dir + "/convergence.csv";
    {
        std::ofstream table(csv, std::ios::binary);
        if (!table) throw IoError("cannot write '" + csv + "'");
        table << "epsilon,omega,c0,c1,terminal_defect,rootfind_attained,rootfind_omega,"
                 "rootfind_residual\n";
        for (const auto& r : study.rows)
            table << format_full(r.epsilon) << "," << format_full(r.omega) << ","
                  << format_full(r.c0) << "," << format_full(r.c1) << ","
                  << format_full(r.terminal_defect) << "," << (r.rootfind_attained ? 1 : 0)
                  << "," << format_full(r.rootfind_omega) << ","
                  << format_full(r.rootfind_residual) << "\n";
    }
    report.artifacts.push_back(csv);
    report.add("slope_c0", study.slope_c0);
    report.add("r2_c0", study.r2_c0);
    report.add("slope_c1", study.slope_c1);
    report.add("r2_c1", study.r2_c1);
    report.add("clean_rate_c0", std::string(study.clean_rate_c0 ? "yes" : "no"));
    report.add("clean_rate_c1", std::string(study.clean_rate_c1 ? "yes" : "no"));
    int warnings = 0;
    for (const auto& r : study.rows)
        if (!r.rootfind_attained) ++warnings;
    report.add("rootfind_failures", static_cast<double>(warnings));

    finish_report(report, dir, out, start);
    return (cfg.run.strict && warnings) ? 1 : 0;
}

int cmd_montecarlo(const ScenarioConfig& cfg, std::ostream& out) {
    const auto start = std::chrono::steady_clock::now();
    if (cfg.name != "temperature")
        throw ConfigError("montecarlo supports the temperature scenario");
    const std::string dir = ensure_out_dir(cfg);
    TemperatureBuild tb = build_temperature(cfg.params);
    StochasticCandidate cand = reduced_adjoint_propagate(tb.system, tb.reduced_cfg, tb.cost);
    StochasticControl control = temperature_feedback(tb, cand);
    EnsembleConfig ens = ensemble_config(cfg, cfg.run.n_paths);
    MonteCarloResult mc =
        monte_carlo_cost(tb.system, control, tb.x0, tb.q0, 0.0, cfg.params.t_final, tb.cost, ens);

    RunReport report;
    report.scenario = cfg.name;
    report.command = "montecarlo";
    report.add("seed", static_cast<double>(cfg.run.seed));
    report.add("n_paths", static_cast<double>(cfg.run.n_paths));
    report.add("estimate", mc.estimate);
    report.add("std_error", mc.std_error);
    report.add("n_diverged", static_cast<double>(mc.n_diverged));
    finish_report(report, dir, out, start);
    return (cfg.run.strict && mc.n_diverged) ? 1 : 0;
}

int cmd_variation_test(const ScenarioConfig& cfg, std::ostream& out) {
    const auto start = std::chrono::steady_clock::now();
    if (cfg.name != "temperature")
        throw ConfigError("variation-test supports the temperature scenario");
    const std::string dir = ensure_out_dir(cfg);
    TemperatureBuild tb = build_temperature(cfg.params);
    StochasticCandidate cand = reduced_adjoint_propagate(tb.system, tb.reduced_cfg, tb.cost);
    StochasticControl base = temperature_feedback(tb, cand);

    // Direction of the cost-reducing construction: push off the active lower
    // bound by the clamped magnitude of the unconstrained law, zero elsewhere.
    const double alpha = tb.alpha_of_mode[0];
    const double lw = tb.lambda_weight;
    const double u_max = tb.u_max;
    ControlSignal delta_u = [cand, alpha, lw, u_max](double t) {
        const double psi = cand.psi_at(t);
        FeedbackResult fb = feedback_control_law(alpha, lw, psi, 0.0, u_max);
        if (fb.clamped && fb.value == 0.0) return Vec{alpha * psi / (2.0 * lw)};
        return Vec{0.0};
    };

    std::vector<double> epsilons = cfg.run.epsilons;
    if (epsilons.empty()) epsilons = {0.05, 0.1, 0.2};
    EnsembleConfig ens = ensemble_config(cfg, cfg.run.n_paths);
    std::vector<VariationRow> rows =
        variation_cost_test(tb.system, base, delta_u, epsilons, tb.x0, tb.q0, 0.0,
                            cfg.params.t_final, tb.cost, ens);

    RunReport report;
    report.scenario = cfg.name;
    report.command = "variation-test";
    const std::string csv = dir + "/variation.csv";
    {
        std::ofstream table(csv, std::ios::binary);
        if (!table) throw IoError("cannot write '" + csv + "'");
        table << "epsilon,delta_j,std_error\n";
        for (const auto& r : rows)
            table << format_full(r.epsilon) << "," << format_full(r.delta_j) << ","
                  << format_full(r.std_error) << "\n";
    }
    report.artifacts.push_back(csv);
    for (const auto& r : rows) {
        report.add("delta_j@" + format_full(r.epsilon), r.delta_j);
        report.add("se@" + format_full(r.epsilon), r.std_error);
    }
    finish_report(report, dir, out, start);
    return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"optcert: simulation and optimality-certificate checks for smooth, relaxed, "
                 "Filippov, hybrid, and stochastic-hybrid control systems"};
    app.require_subcommand(1);

    CommonFlags flags;
    std::string check_kind, search_kind;

    CLI::App* simulate = app.add_subcommand("simulate", "integrate a scenario and emit CSV");
    add_common(simulate, flags);
    CLI::App* check = app.add_subcommand("check", "check one certificate candidate");
    check->add_option("kind", check_kind, "first|second|filippov|hybrid|stochastic")
        ->required();
    add_common(check, flags);
    CLI::App* search = app.add_subcommand("search", "grid-search candidates");
    search->add_option("kind", search_kind, "first|second")->required();
    add_common(search, flags);
    CLI::App* converge = app.add_subcommand("converge", "oscillating-control convergence study");
    add_common(converge, flags);
    CLI::App* montecarlo = app.add_subcommand("montecarlo", "Monte Carlo cost estimate");
    add_common(montecarlo, flags);
    CLI::App* variation =
        app.add_subcommand("variation-test", "paired cost-variation study");
    add_common(variation, flags);

    std::vector<std::string> argv_reversed(args.rbegin(), args.rend());
    try {
        app.parse(argv_reversed);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        err << e.what() << "\n" << app.help();
        return 2;
    }

    try {
        const ScenarioConfig cfg = resolve_config(flags);
        if (simulate->parsed()) return cmd_simulate(cfg, out);
        if (check->parsed()) return cmd_check(cfg, check_kind, out);
        if (search->parsed()) return cmd_search(cfg, search_kind, out);
        if (converge->parsed()) return cmd_converge(cfg, out);
        if (montecarlo->parsed()) return cmd_montecarlo(cfg, out);
        if (variation->parsed()) return cmd_variation_test(cfg, out);
        err << "no subcommand\n" << app.help();
        return 2;
    } catch (const ConfigError& e) {
        err << "configuration error: " << e.what() << "\n";
        return 2;
    } catch (const CapabilityError& e) {
        err << "configuration error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        err << "runtime error: " << e.what() << "\n";
        return 3;
    }
}

}  // namespace optcert
