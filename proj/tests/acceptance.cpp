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

// Acceptance suite: one criterion per case, one pass/fail line each, every
// tolerance pinned in code. Criterion 14 compares against the checked-in
// derived fixtures bit for bit; set OPTCERT_REGEN_FIXTURES=1 to rewrite them.

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "optcert/cli.hpp"
#include "optcert/config.hpp"
#include "optcert/report.hpp"
#include "optcert/rng.hpp"
#include "optcert/study.hpp"

using namespace optcert;

namespace {

struct Outcome {
    bool pass = false;
    std::string note;
};

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

std::string hex(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%a", v);
    return buf;
}

// ---------------------------------------------------------------------------
// fixtures
// ---------------------------------------------------------------------------

const char* kFixturePath = OPTCERT_FIXTURE_DIR "/derived.txt";

std::map<std::string, double> load_fixtures() {
    std::map<std::string, double> out;
    std::ifstream in(kFixturePath);
    std::string line;
    while (std::getline(in, line)) {
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        const auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        std::string key = line.substr(0, eq);
        while (!key.empty() && std::isspace(static_cast<unsigned char>(key.back())))
            key.pop_back();
        std::size_t b = 0;
        while (b < key.size() && std::isspace(static_cast<unsigned char>(key[b]))) ++b;
        key = key.substr(b);
        out[key] = std::strtod(line.c_str() + eq + 1, nullptr);
    }
    return out;
}

void write_fixtures(const std::map<std::string, std::pair<double, std::string>>& values) {
    std::ofstream out(kFixturePath, std::ios::binary);
    out << "# Derived regression values, stored as hexfloats so comparisons are\n"
           "# bit-exact. Regenerate with OPTCERT_REGEN_FIXTURES=1 tests/acceptance.\n";
    for (const auto& [key, entry] : values)
        out << key << " = " << hex(entry.first) << "  # " << entry.second << "\n";
}

// ---------------------------------------------------------------------------
// criteria
// ---------------------------------------------------------------------------

Outcome criterion_integrator_order() {
    auto rhs = [](double, const Vec& x) { return Vec{x[0]}; };
    std::vector<double> dts{1e-2, 5e-3, 2.5e-3, 1.25e-3};
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (double dt : dts) {
        SimConfig cfg;
        cfg.dt = dt;
        cfg.event_tol = dt * 1e-3;
        Trajectory t = integrate_ode(rhs, {1.0}, 0.0, 1.0, cfg);
        const double lx = std::log(dt);
        const double ly = std::log(std::abs(t.back_state()[0] - std::exp(1.0)));
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    const double n = 4.0;
    const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    return {slope >= 3.9 && slope <= 4.1, "fitted order " + fmt(slope)};
}

Outcome criterion_closed_forms() {
    ScenarioParams p;
    p.dt = 1e-4;
    NonholonomicBuild nb = build_nonholonomic(p);
    ControlSignal u = nonholonomic_oscillating_control(0.1, 0.2);
    SimConfig sim;
    sim.dt = 1e-4;
    sim.event_tol = 1e-7;
    auto rhs = [&](double t, const Vec& x) { return nb.system.modes[0].f(t, x, u(t)); };
    Trajectory traj = integrate_ode(rhs, {0.0, 0.0, 0.0}, 0.0, 1.0, sim);
    double sup = 0.0;
    for (std::size_t i = 0; i < traj.times.size(); ++i)
        sup = std::max(sup, norm_inf(sub(traj.states[i],
                                         nonholonomic_closed_form(0.1, 0.2, traj.times[i]))));
    return {sup <= 1e-6, "sup gap " + fmt(sup)};
}

Outcome criterion_reference_admissibility() {
    NonholonomicBuild nb = build_nonholonomic(ScenarioParams{});
    FrictionBuild fb = build_friction(ScenarioParams{});
    SplitMix64 rng(314159);
    double worst_nh = 0.0;
    Vec sample_drift;
    for (int i = 0; i < 100; ++i) {
        const double t = rng.uniform(0.0, 1.0);
        Vec drift = eval_convexified_drift(nb.system, 0, nb.reference.mu, t, {0.0, 0.0, t});
        sample_drift = drift;
        worst_nh = std::max(worst_nh, norm_inf(sub(drift, {0.0, 0.0, 1.0})));
    }
    double worst_fr = 0.0;
    for (int i = 0; i < 100; ++i) {
        const double t = rng.uniform(0.0, 1.0);
        Vec drift = eval_convexified_drift(fb.surface_system, 0, fb.reference.mu, t, {0.0, 0.0});
        worst_fr = std::max(worst_fr, norm_inf(drift));
    }
    const bool pass = worst_nh <= 1e-12 && worst_fr <= 1e-12;
    std::string note = "friction defect " + fmt(worst_fr) + "; planar-drift defect " +
                       fmt(worst_nh) + " (measured drift (" + fmt(sample_drift[0]) + ", " +
                       fmt(sample_drift[1]) + ", " + fmt(sample_drift[2]) +
                       ") vs pinned (0,0,1): the four-atom measure cannot average the "
                       "half-quadratic term to 1; known defect, see README)";
    return {pass, note};
}

Outcome criterion_first_order_oracle() {
    NonholonomicBuild nb = build_nonholonomic(ScenarioParams{});
    CertificateReport rep =
        check_first_order_candidate(nb.system, nb.reference, {{0.0, 0.0, -1.0}, -1}, 1e-6);
    const bool pass = rep.adjoint_residual <= 1e-12 && std::abs(rep.max_gap - 0.5) <= 1e-12 &&
                      rep.transversality_excess <= 1e-12;
    return {pass, "(adjoint, max_gap, transversality) = (" + fmt(rep.adjoint_residual) + ", " +
                      fmt(rep.max_gap) + ", " + fmt(rep.transversality_excess) + ")"};
}

Outcome criterion_search_floors() {
    NonholonomicBuild nb = build_nonholonomic(ScenarioParams{});
    FirstOrderSearchGrid sphere;
    sphere.angular_samples = 360;  // one-degree grid
    FirstOrderSearchResult nh = search_first_order(nb.system, nb.reference, -1, sphere);

    FrictionBuild fb = build_friction(ScenarioParams{});
    FirstOrderSearchGrid circle;
    circle.angular_samples = 360;
    FirstOrderSearchResult fr = search_first_order(fb.surface_system, fb.reference, -1, circle);

    const double fr_target = 2.0 / std::sqrt(5.0);
    const bool pass = std::abs(nh.min_violation - 0.5) <= 0.02 &&
                      std::abs(fr.min_violation - fr_target) <= 0.02;
    return {pass, "planar-drift min " + fmt(nh.min_violation) + " (target 0.5 +- 0.02), friction min " +
                      fmt(fr.min_violation) + " (target " + fmt(fr_target) +
                      " +- 0.02); emptiness evidence at grid modulus " +
                      fmt(std::max(nh.grid_modulus, fr.grid_modulus))};
}

Outcome criterion_riccati_reduction() {
    NonholonomicBuild nb = build_nonholonomic(ScenarioParams{});
    double coeff = 0.0;
    SplitMix64 rng(8);
    for (int i = 0; i < 25; ++i) {
        const double t = rng.uniform(0.0, 1.0);
        Mat a = averaged_jacobian(nb.system, 0, nb.reference.mu, t, {0.0, 0.0, t});
        Mat b = averaged_hessian(nb.system, 0, nb.reference.mu, t, {0.0, 0.0, t});
        for (double v : a.data()) coeff = std::max(coeff, std::abs(v));
        for (double v : b.data()) coeff = std::max(coeff, std::abs(v));
    }
    const auto& times = nb.reference.traj.times;
    RiccatiMatrix down, up;
    down.times = up.times = times;
    for (double t : times) {
        Mat q = Mat::identity(3);
        q *= -t;
        down.q.push_back(q);
        q = Mat::identity(3);
        q *= t;
        up.q.push_back(q);
    }
    const double e_down = riccati_residual(nb.system, nb.reference, down).sup;
    const double e_up = riccati_residual(nb.system, nb.reference, up).sup;
    const bool pass = coeff <= 1e-12 && std::abs(e_down + 1.0) <= 1e-9 &&
                      std::abs(e_up - 1.0) <= 1e-9;
    return {pass, "averaged coefficients " + fmt(coeff) + ", sup eigenvalues " + fmt(e_down) +
                      " / " + fmt(e_up)};
}

Outcome criterion_pulse_train() {
    const double d = 0.05;
    ScenarioParams p;
    p.delta = d;
    FrictionBuild fb = build_friction(p);
    SimConfig sim;
    sim.dt = d / 50.0;
    sim.event_tol = sim.dt * 1e-6;
    Trajectory traj = simulate_filippov(fb.filippov, fb.pulse_control, {0.0, 0.0}, 0.0,
                                        fb.pulse_end, sim, fb.pulse_schedule);
    const Vec at_d = traj.state_at(d);
    const Vec at_2d = traj.state_at(2.0 * d);
    const double final_norm = norm2(traj.back_state());
    const double cp1 = std::max(std::abs(at_d[0] + d * d), std::abs(at_d[1] + 2.0 * d));
    const double cp2 = std::max(std::abs(at_2d[0] + 2.0 * d * d), std::abs(at_2d[1]));
    const bool pass = final_norm <= 1e-8 && cp1 <= 1e-9 && cp2 <= 1e-9;
    return {pass, "|x(4d)| = " + fmt(final_norm) + ", checkpoint defects " + fmt(cp1) + ", " +
                      fmt(cp2)};
}

Outcome criterion_filippov_hull() {
    FrictionBuild fb = build_friction(ScenarioParams{});
    FilippovSetDescription fs = filippov_set_eval(fb.filippov, 0.0, {0.0, 0.0});
    double lo = 1e300, hi = -1e300, off = 0.0;
    for (const Vec& v : fs.generators) {
        off = std::max(off, std::abs(v[0]));
        lo = std::min(lo, v[1]);
        hi = std::max(hi, v[1]);
    }
    const bool pass =
        fs.on_surface && off <= 1e-12 && std::abs(lo + 2.0) <= 1e-12 && std::abs(hi - 2.0) <= 1e-12;
    return {pass, "hull = {" + fmt(off) + "} x [" + fmt(lo) + ", " + fmt(hi) + "]"};
}

Outcome criterion_impact_law() {
    ScenarioParams p;
    BouncingBallBuild bb = build_bouncing_ball(p);
    ModeControlSignal zero = [](int, double) { return Vec{0.0}; };
    SimConfig sim;
    sim.dt = 1e-3;
    sim.event_tol = 1e-9;
    Trajectory traj = simulate_hybrid(bb.automaton, zero, {1.0, 0.0}, 0, 0.0, 1.0, sim);
    std::size_t impacts = 0;
    double worst = 0.0;
    for (const auto& ev : traj.events) {
        if (ev.kind != EventKind::Impact) continue;
        ++impacts;
        worst = std::max(worst, std::abs(ev.state_after[1] + p.e1 * ev.state_before[1]));
    }

    std::size_t n_jumps = 0;
    for (const auto& ev : traj.events)
        if (ev.kind == EventKind::Impact || ev.kind == EventKind::ModeSwitch) ++n_jumps;
    JumpAdjoint ja = adjoint_with_jumps(bb.automaton, traj, zero, {0.0, 1.0},
                                        std::vector<double>(n_jumps, 0.0), sim);
    bool jump_exact = !ja.jumps.empty();
    if (jump_exact) {
        const JumpRecord& rec = ja.jumps.front();
        jump_exact = rec.psi_before[1] == 1.0 && rec.psi_after[1] == -2.0;
    }
    const bool pass = impacts >= 2 && worst == 0.0 && jump_exact;
    return {pass, std::to_string(impacts) + " impacts, restitution defect " + fmt(worst) +
                      ", psi2 1 -> " + (ja.jumps.empty() ? "none" : fmt(ja.jumps.front().psi_after[1]))};
}

Outcome criterion_stochastic_reduction() {
    TemperatureBuild tb = build_temperature(ScenarioParams{});
    StochasticCandidate cand = reduced_adjoint_propagate(tb.system, tb.reduced_cfg, tb.cost);
    double sup = 0.0;
    for (std::size_t i = 0; i < cand.times.size(); ++i)
        sup = std::max(sup, std::abs(cand.psi_matrix[i](0, 0) -
                                     2.0 * std::exp(0.04 * (10.0 - cand.times[i]))));

    TemperatureBuild flat = build_temperature(ScenarioParams{});
    flat.system.modes[0].sigma = [](double, const Vec&, const Vec&) { return Mat(1, 1); };
    StochasticCandidate cand0 = reduced_adjoint_propagate(flat.system, flat.reduced_cfg, flat.cost);
    double sup0 = 0.0;
    for (const Mat& m : cand0.psi_matrix) sup0 = std::max(sup0, std::abs(m(0, 0) - 2.0));

    const bool pass = sup <= 1e-9 && sup0 <= 1e-12;
    return {pass, "closed-form gap " + fmt(sup) + ", zero-noise gap " + fmt(sup0)};
}

Outcome criterion_monte_carlo_soundness() {
    StochasticHybridSystem gbm;
    gbm.state_dim = 1;
    gbm.noise_dim = 1;
    StochasticMode md;
    md.name = "gbm";
    md.f = [](double, const Vec& x, const Vec&) { return Vec{0.1 * x[0]}; };
    md.sigma = [](double, const Vec& x, const Vec&) {
        Mat m(1, 1);
        m(0, 0) = 0.2 * x[0];
        return m;
    };
    gbm.modes = {md};
    gbm.control_sets = {ControlSetSpec::interval(0.0, 1.0)};
    gbm.t_start = 0.0;
    gbm.t_end = 1.0;
    CostSpec cost;
    cost.terminal = [](const Vec& x) { return x[0]; };
    cost.terminal_grad = [](const Vec&) { return Vec{1.0}; };
    cost.terminal_hess = [](const Vec&) { return Mat(1, 1); };
    StochasticControl u0 = [](double, const Vec&, int) { return Vec{0.0}; };

    MonteCarloResult results[3];
    const int workers[3] = {1, 2, 8};
    for (int i = 0; i < 3; ++i) {
        EnsembleConfig ens;
        ens.seed = 1234;
        ens.n_paths = 10000;
        ens.dt = 1e-3;
        ens.workers = workers[i];
        results[i] = monte_carlo_cost(gbm, u0, {1.0}, 0, 0.0, 1.0, cost, ens);
    }
    const double target = std::exp(0.1);
    const bool mean_ok = std::abs(results[0].estimate - target) <= 3.0 * results[0].std_error;
    const bool bit_ok = results[0].estimate == results[1].estimate &&
                        results[0].estimate == results[2].estimate &&
                        results[0].std_error == results[1].std_error &&
                        results[0].std_error == results[2].std_error;
    return {mean_ok && bit_ok, "estimate " + fmt(results[0].estimate) + " vs e^0.1 = " +
                                   fmt(target) + " (3SE = " + fmt(3.0 * results[0].std_error) +
                                   "), worker-invariant: " + (bit_ok ? "yes" : "no")};
}

Outcome criterion_paired_null() {
    TemperatureBuild tb = build_temperature(ScenarioParams{});
    StochasticCandidate cand = reduced_adjoint_propagate(tb.system, tb.reduced_cfg, tb.cost);
    StochasticControl base = temperature_feedback(tb, cand);
    ControlSignal zero_dir = [](double) { return Vec{0.0}; };
    EnsembleConfig ens;
    ens.seed = 77;
    ens.n_paths = 128;
    ens.dt = 1e-2;
    std::vector<VariationRow> rows = variation_cost_test(
        tb.system, base, zero_dir, {1e-3, 0.1, 1.0, 10.0}, tb.x0, tb.q0, 0.0, 10.0, tb.cost, ens);
    bool pass = true;
    double worst = 0.0;
    for (const auto& r : rows) {
        worst = std::max({worst, std::abs(r.delta_j), r.std_error});
        if (r.delta_j != 0.0 || r.std_error != 0.0) pass = false;
    }
    return {pass, "max |dJ| and SE over epsilons: " + fmt(worst)};
}

Outcome criterion_clamped_mechanism() {
    ScenarioParams p;
    p.terminal_nominal = 19.0;
    TemperatureBuild tb = build_temperature(p);
    StochasticCandidate cand = reduced_adjoint_propagate(tb.system, tb.reduced_cfg, tb.cost);
    StochasticControl control = temperature_feedback(tb, cand);
    EnsembleConfig ens;
    ens.seed = 3;
    ens.n_paths = 64;
    ens.dt = 1e-2;
    PathEnsemble ensemble = simulate_paths(tb.system, control, tb.x0, tb.q0, 0.0, 10.0, ens);
    StochasticReport rep =
        check_stochastic_candidate(tb.system, ensemble, control, cand, tb.cost, 1e-6);

    double t_cross = -1.0;
    for (std::size_t i = 1; i < cand.times.size(); ++i)
        if (cand.psi[i - 1][0] > 0.0 && cand.psi[i][0] <= 0.0) t_cross = cand.times[i];
    if (t_cross < 0.0) return {false, "no clamp boundary found"};

    double min_clamped = 1e300, max_unclamped = 0.0;
    for (std::size_t k = 0; k < rep.gap_times.size(); ++k) {
        if (rep.gap_times[k] < t_cross - 0.2)
            min_clamped = std::min(min_clamped, rep.gap_series[k]);
        if (rep.gap_times[k] > t_cross + 0.2)
            max_unclamped = std::max(max_unclamped, rep.gap_series[k]);
    }
    const bool pass = min_clamped >= 1e-3 && max_unclamped <= 1e-9;
    return {pass, "clamp boundary at t = " + fmt(t_cross) + ", min clamped gap " +
                      fmt(min_clamped) + ", max unclamped gap " + fmt(max_unclamped)};
}

Outcome criterion_regression_freeze() {
    TemperatureBuild tb = build_temperature(ScenarioParams{});
    StochasticCandidate cand = reduced_adjoint_propagate(tb.system, tb.reduced_cfg, tb.cost);
    StochasticControl control = temperature_feedback(tb, cand);
    EnsembleConfig ens;
    ens.seed = 42;
    ens.n_paths = 10000;
    ens.dt = 1e-2;
    ens.workers = 2;
    MonteCarloResult mc =
        monte_carlo_cost(tb.system, control, tb.x0, tb.q0, 0.0, 10.0, tb.cost, ens);

    BouncingBallBuild bb = build_bouncing_ball(ScenarioParams{});
    HybridSearchResult search = search_hybrid_candidates(
        bb.automaton, bb.reference, bb.reference_control, -1, 360, 1e-6);

    if (std::getenv("OPTCERT_REGEN_FIXTURES")) {
        write_fixtures({{"temperature_mc_cost",
                         {mc.estimate, "temperature Monte Carlo cost, N = 10000, seed 42, "
                                       "Euler-Maruyama dt = 1e-2, reduced-candidate feedback"}},
                        {"temperature_mc_se", {mc.std_error, "paired standard error of the same run"}},
                        {"bouncing_ball_search_min",
                         {search.min_violation, "unit-circle psi0 search, 360 samples, zero "
                                                "multipliers, sense -1"}}});
        return {true, "fixtures regenerated"};
    }

    std::map<std::string, double> fixtures = load_fixtures();
    if (!fixtures.count("temperature_mc_cost") || !fixtures.count("temperature_mc_se") ||
        !fixtures.count("bouncing_ball_search_min"))
        return {false, "fixture file incomplete; regenerate with OPTCERT_REGEN_FIXTURES=1"};
    const bool pass = mc.estimate == fixtures["temperature_mc_cost"] &&
                      mc.std_error == fixtures["temperature_mc_se"] &&
                      search.min_violation == fixtures["bouncing_ball_search_min"];
    return {pass, "mc cost " + fmt(mc.estimate) + " (fixture " +
                      fmt(fixtures["temperature_mc_cost"]) + "), search min " +
                      fmt(search.min_violation) + " (fixture " +
                      fmt(fixtures["bouncing_ball_search_min"]) + "), bit-identical: " +
                      ((pass) ? "yes" : "no")};
}

Outcome criterion_reduction_properties() {
    // Zero-noise stochastic run against the deterministic integrator.
    TemperatureBuild tb = build_temperature(ScenarioParams{});
    StochasticHybridSystem frozen = tb.system;
    for (auto& md : frozen.modes)
        md.sigma = [](double, const Vec&, const Vec&) { return Mat(1, 1); };
    frozen.threshold_edges.clear();
    StochasticControl u0 = [](double, const Vec&, int) { return Vec{0.0}; };
    EnsembleConfig ens;
    ens.n_paths = 1;
    ens.dt = 1e-3;
    PathEnsemble em = simulate_paths(frozen, u0, {19.0}, 0, 0.0, 10.0, ens);
    SimConfig sim;
    sim.dt = 1e-3;
    auto rhs = [&](double t, const Vec& x) { return tb.system.modes[0].f(t, x, Vec{0.0}); };
    Trajectory rk = integrate_ode(rhs, {19.0}, 0.0, 10.0, sim);
    double gap = 0.0;
    for (std::size_t i = 0; i < em.paths[0].times.size(); ++i)
        gap = std::max(gap, std::abs(em.paths[0].states[i][0] -
                                     rk.state_at(em.paths[0].times[i])[0]));
    const bool euler_ok = gap <= 0.05 * ens.dt / 1e-3;  // frozen explicit-Euler envelope

    // Single-mode stochastic check: jump machinery must stay inert.
    StochasticHybridSystem gbm;
    gbm.state_dim = 1;
    gbm.noise_dim = 1;
    StochasticMode md;
    md.name = "gbm";
    md.f = [](double, const Vec& x, const Vec&) { return Vec{0.1 * x[0]}; };
    md.sigma = [](double, const Vec& x, const Vec&) {
        Mat m(1, 1);
        m(0, 0) = 0.2 * x[0];
        return m;
    };
    gbm.modes = {md};
    gbm.control_sets = {ControlSetSpec::interval(0.0, 1.0)};
    gbm.t_start = 0.0;
    gbm.t_end = 1.0;
    EnsembleConfig small;
    small.n_paths = 8;
    small.dt = 1e-2;
    PathEnsemble paths = simulate_paths(gbm, u0, {1.0}, 0, 0.0, 1.0, small);
    StochasticCandidate flat;
    flat.times = {0.0, 1.0};
    flat.psi = {{1.0}, {1.0}};
    flat.psi_matrix = {Mat(1, 1), Mat(1, 1)};
    flat.nominal_terminal = {1.0};
    CostSpec cost;
    cost.terminal = [](const Vec& x) { return x[0]; };
    cost.terminal_grad = [](const Vec&) { return Vec{1.0}; };
    cost.terminal_hess = [](const Vec&) { return Mat(1, 1); };
    StochasticReport rep = check_stochastic_candidate(gbm, paths, u0, flat, cost, 1.0);
    const bool inert = rep.jump_residuals.empty();

    return {euler_ok && inert, "zero-noise gap " + fmt(gap) + " (Euler envelope, dt = 1e-3), "
                               "single-mode jump residuals: " +
                                   std::to_string(rep.jump_residuals.size())};
}

Outcome criterion_cli_contract() {
    namespace fs = std::filesystem;
    const std::string dir = (fs::temp_directory_path() / "optcert_acceptance_cli").string();
    fs::remove_all(dir);
    fs::create_directories(dir);

    std::ostringstream out1, err1;
    const int code1 = run_cli({"check", "first", "--builtin", "nonholonomic", "--set",
                               "psi0=0,0,-1", "--out", dir + "/check"},
                              out1, err1);
    const bool check_ok = code1 == 1 && out1.str().find("max_gap = 0.5") != std::string::npos;

    std::ostringstream out2, err2;
    const int code2 = run_cli({"simulate", "--builtin", "friction", "--set", "delta=0.05",
                               "--out", dir + "/sim"},
                              out2, err2);
    double reported_norm = 1e300;
    {
        std::istringstream lines(out2.str());
        std::string line;
        while (std::getline(lines, line))
            if (line.rfind("final_state_norm = ", 0) == 0)
                reported_norm = std::strtod(line.c_str() + 19, nullptr);
    }
    const bool sim_ok = code2 == 0 && fs::exists(dir + "/sim/trajectory.csv") &&
                        reported_norm <= 1e-8;

    std::ostringstream out3, err3;
    const int code3 = run_cli({"frobnicate"}, out3, err3);
    const bool usage_ok = code3 == 2 && !err3.str().empty();

    // Emitted CSV re-ingests to distance zero against the in-memory run.
    bool csv_ok = false;
    if (sim_ok) {
        CsvTrajectory back = read_trajectory_csv(dir + "/sim/trajectory.csv");
        ScenarioParams p;
        p.delta = 0.05;
        FrictionBuild fb = build_friction(p);
        SimConfig sim;
        sim.dt = std::min(1e-3, p.delta / 50.0);
        sim.event_tol = std::min(1e-9, sim.dt);
        Trajectory traj = simulate_filippov(fb.filippov, fb.pulse_control, {0.0, 0.0}, 0.0,
                                            fb.pulse_end, sim, fb.pulse_schedule);
        csv_ok = trajectory_distance(traj, back.traj, TrajNorm::C0) == 0.0;
    }

    const bool pass = check_ok && sim_ok && usage_ok && csv_ok;
    return {pass, std::string("check exit ") + std::to_string(code1) + ", simulate exit " +
                      std::to_string(code2) + " (|x(4d)| = " + fmt(reported_norm) +
                      "), unknown-subcommand exit " + std::to_string(code3) +
                      ", csv re-ingest distance zero: " + (csv_ok ? "yes" : "no")};
}

}  // namespace

int main(int argc, char** argv) {
    struct Criterion {
        int id;
        std::string label;
        std::function<Outcome()> run;
    };
    const std::vector<Criterion> criteria = {
        {1, "integrator order", criterion_integrator_order},
        {2, "oscillating-control closed forms", criterion_closed_forms},
        {3, "convexified reference admissibility", criterion_reference_admissibility},
        {4, "first-order residual oracle", criterion_first_order_oracle},
        {5, "first-order search floors", criterion_search_floors},
        {6, "riccati reduction", criterion_riccati_reduction},
        {7, "friction pulse train", criterion_pulse_train},
        {8, "filippov hull", criterion_filippov_hull},
        {9, "hybrid impact law", criterion_impact_law},
        {10, "stochastic reduction", criterion_stochastic_reduction},
        {11, "monte carlo soundness", criterion_monte_carlo_soundness},
        {12, "paired variation null", criterion_paired_null},
        {13, "clamped-control violation mechanism", criterion_clamped_mechanism},
        {14, "regression freeze", criterion_regression_freeze},
        {15, "reduction properties", criterion_reduction_properties},
        {16, "cli contract", criterion_cli_contract},
    };

    // --only N,M...             run a subset
    // --expected-defects N,...  declared spec/paper defects: they still run
    //                           and print FAIL, but only an unexpected
    //                           outcome (them passing, others failing)
    //                           affects the exit code
    std::vector<int> only, expected;
    for (int i = 1; i < argc; ++i) {
        const std::string arg = argv[i];
        std::vector<int>* target = nullptr;
        if (arg == "--only") target = &only;
        if (arg == "--expected-defects") target = &expected;
        if (!target || i + 1 >= argc) {
            std::cerr << "usage: acceptance [--only N[,M...]] [--expected-defects N[,M...]]\n";
            return 2;
        }
        std::stringstream ss(argv[++i]);
        std::string item;
        while (std::getline(ss, item, ',')) target->push_back(std::atoi(item.c_str()));
    }
    auto contains = [](const std::vector<int>& v, int id) {
        for (int x : v)
            if (x == id) return true;
        return false;
    };

    int unexpected = 0;
    int ran = 0, passed = 0;
    for (const auto& c : criteria) {
        if (!only.empty() && !contains(only, c.id)) continue;
        ++ran;
        Outcome outcome;
        try {
            outcome = c.run();
        } catch (const std::exception& e) {
            outcome = {false, std::string("exception: ") + e.what()};
        }
        const bool declared_defect = contains(expected, c.id);
        if (outcome.pass) {
            ++passed;
            if (declared_defect) {
                ++unexpected;
                outcome.note += " [declared defect unexpectedly passed; update the declaration]";
            }
        } else if (!declared_defect) {
            ++unexpected;
        }
        std::cout << (outcome.pass ? "PASS" : "FAIL") << " criterion " << c.id << ": " << c.label
                  << " -- " << outcome.note << "\n";
    }
    std::cout << passed << "/" << ran << " criteria passed\n";
    return unexpected == 0 ? 0 : 1;
}
