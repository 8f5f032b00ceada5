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

#include "optcert/scenario.hpp"

#include <cmath>

namespace optcert {

namespace {

std::vector<Mat> zero_hessians(std::size_t n) { return std::vector<Mat>(n, Mat(n, n)); }

Trajectory constant_reference_grid(const Vec& base, double t0, double t1, double dt,
                                   bool third_is_time) {
    Trajectory traj;
    std::size_t n = static_cast<std::size_t>(std::ceil((t1 - t0) / dt - 1e-12));
    if (n == 0) n = 1;
    for (std::size_t k = 0; k <= n; ++k) {
        const double t = (k == n) ? t1 : t0 + static_cast<double>(k) * dt;
        Vec x = base;
        if (third_is_time) x.back() = t;
        traj.times.push_back(t);
        traj.states.push_back(x);
        traj.modes.push_back(0);
    }
    return traj;
}

}  // namespace

// ============================================================================
// Nonholonomic
// ============================================================================

NonholonomicBuild build_nonholonomic(const ScenarioParams& p) {
    NonholonomicBuild b;
    b.system.state_dim = 3;
    b.system.t_start = 0.0;
    b.system.t_end = p.horizon;

    ModeDynamics md;
    md.name = "planar-drift";
    md.f = [](double, const Vec& x, const Vec& u) {
        return Vec{u[0], u[1], x[0] * u[1] - x[1] * u[0] + 0.5 * (u[0] * u[0] + u[1] * u[1])};
    };
    md.f_x = [](double, const Vec&, const Vec& u) {
        Mat j(3, 3);
        j(2, 0) = u[1];
        j(2, 1) = -u[0];
        return j;
    };
    md.f_xx = [](double, const Vec&, const Vec&) { return zero_hessians(3); };
    b.system.modes.push_back(md);
    b.system.control_sets.push_back(ControlSetSpec::sphere(1.0, 2));
    b.system.validate();

    b.reference.traj = constant_reference_grid({0.0, 0.0, 0.0}, 0.0, p.horizon, p.dt, true);
    b.reference.mode = 0;
    GeneralizedControl::Piece piece;
    piece.t_begin = 0.0;
    piece.t_end = p.horizon;
    piece.atoms = {{{1.0, 0.0}, 0.25},
                   {{-1.0, 0.0}, 0.25},
                   {{0.0, 1.0}, 0.25},
                   {{0.0, -1.0}, 0.25}};
    b.reference.mu.pieces = {piece};
    b.reference.mu.validate(b.system.control_sets[0], 0.0, p.horizon);
    b.reference.velocity = [](double) { return Vec{0.0, 0.0, 1.0}; };
    // The nominal pair moves at unit x3-speed while the four-atom drift
    // averages to one half; checked against the measured defect, not forced.
    b.reference.admissibility_waived = true;
    return b;
}

ControlSignal nonholonomic_oscillating_control(double epsilon, double omega) {
    return [epsilon, omega](double t) {
        const double phase = omega * t / epsilon;
        return Vec{std::cos(phase), std::sin(phase)};
    };
}

Vec nonholonomic_closed_form(double epsilon, double omega, double t) {
    const double r = epsilon / omega;
    const double phase = omega * t / epsilon;
    return Vec{r * std::sin(phase), r * (1.0 - std::cos(phase)),
               (r + 0.5) * t - r * r * std::sin(phase)};
}

double nonholonomic_closed_x3(double epsilon, double omega, double t) {
    return nonholonomic_closed_form(epsilon, omega, t)[2];
}

// ============================================================================
// Friction
// ============================================================================

FrictionBuild build_friction(const ScenarioParams& p) {
    FrictionBuild b;

    auto branch_mode = [](double sigma_value, const char* name) {
        ModeDynamics md;
        md.name = name;
        md.f = [sigma_value](double, const Vec& x, const Vec& u) {
            return Vec{x[1], u[0] - sigma_value};
        };
        md.f_x = [](double, const Vec&, const Vec&) {
            Mat j(2, 2);
            j(0, 1) = 1.0;
            return j;
        };
        md.f_xx = [](double, const Vec&, const Vec&) { return zero_hessians(2); };
        return md;
    };

    b.filippov.base.state_dim = 2;
    b.filippov.base.t_start = 0.0;
    b.filippov.base.t_end = 1.0;
    b.filippov.base.modes = {branch_mode(1.0, "stick-up"), branch_mode(-1.0, "stick-down")};
    b.filippov.base.control_sets = {ControlSetSpec::interval(-1.0, 1.0),
                                    ControlSetSpec::interval(-1.0, 1.0)};
    b.filippov.surface.g = [](const Vec& x) { return x[1]; };
    b.filippov.surface.grad_g = [](const Vec&) { return Vec{0.0, 1.0}; };
    b.filippov.sliding_jacobian = [](double, const Vec&, const Vec&) {
        Mat j(2, 2);
        j(0, 1) = 1.0;
        return j;
    };
    b.filippov.validate();

    // Surface-restricted velocity parameterization w = u - sigma(0).
    ModeDynamics slide;
    slide.name = "surface";
    slide.f = [](double, const Vec& x, const Vec& w) { return Vec{x[1], w[0]}; };
    slide.f_x = [](double, const Vec&, const Vec&) {
        Mat j(2, 2);
        j(0, 1) = 1.0;
        return j;
    };
    slide.f_xx = [](double, const Vec&, const Vec&) { return zero_hessians(2); };
    b.surface_system.state_dim = 2;
    b.surface_system.t_start = 0.0;
    b.surface_system.t_end = 1.0;
    b.surface_system.modes = {slide};
    b.surface_system.control_sets = {ControlSetSpec::interval(-2.0, 2.0)};
    b.surface_system.validate();

    b.reference.traj = constant_reference_grid({0.0, 0.0}, 0.0, 1.0, p.dt, false);
    b.reference.mode = 0;
    GeneralizedControl::Piece piece;
    piece.t_begin = 0.0;
    piece.t_end = 1.0;
    piece.atoms = {{{-1.0}, 0.5}, {{1.0}, 0.5}};
    b.reference.mu.pieces = {piece};
    b.reference.mu.validate(b.surface_system.control_sets[0], 0.0, 1.0);
    b.reference.velocity = [](double) { return Vec{0.0, 0.0}; };

    const double d = p.delta;
    b.pulse_end = 4.0 * d;
    b.pulse_control = [d](double t) {
        if (t < d) return Vec{-1.0};
        if (t < 3.0 * d) return Vec{1.0};
        if (t < 4.0 * d) return Vec{-1.0};
        return Vec{0.0};
    };
    b.pulse_schedule = {{0.0, d, FilippovBranch::Upper},
                        {d, 2.0 * d, FilippovBranch::Lower},
                        {2.0 * d, 3.0 * d, FilippovBranch::Lower},
                        {3.0 * d, 4.0 * d, FilippovBranch::Upper}};
    return b;
}

// ============================================================================
// Bouncing ball
// ============================================================================

BouncingBallBuild build_bouncing_ball(const ScenarioParams& p) {
    if (!(p.u_max > p.gravity))
        throw ConfigError("bouncing ball requires u_max > gravity for the thrust arcs");
    if (!(p.e1 > 0.0 && p.e1 < 1.0 && p.e2 > 0.0 && p.e2 < 1.0))
        throw ConfigError("restitution coefficients must lie in (0, 1)");

    BouncingBallBuild b;
    auto ball_mode = [&](const char* name) {
        ModeDynamics md;
        md.name = name;
        const double g = p.gravity;
        md.f = [g](double, const Vec& x, const Vec& u) { return Vec{x[1], -g + u[0]}; };
        md.f_x = [](double, const Vec&, const Vec&) {
            Mat j(2, 2);
            j(0, 1) = 1.0;
            return j;
        };
        md.f_xx = [](double, const Vec&, const Vec&) { return zero_hessians(2); };
        return md;
    };
    b.automaton.state_dim = 2;
    b.automaton.t_start = 0.0;
    b.automaton.t_end = 2.0;
    b.automaton.modes = {ball_mode("soft-surface"), ball_mode("hard-surface")};
    b.automaton.control_sets = {ControlSetSpec::interval(0.0, p.u_max),
                                ControlSetSpec::interval(0.0, p.u_max)};

    auto impact_edge = [&](int mode, double e, const char* name) {
        HybridEdge edge;
        edge.from = mode;
        edge.to = mode;
        edge.name = name;
        edge.guard = [](const Vec& x) { return x[0]; };
        edge.grad_guard = [](const Vec&) { return Vec{1.0, 0.0}; };
        edge.reset = [e](const Vec& x) { return Vec{x[0], -e * x[1]}; };
        edge.reset_jacobian = [e](const Vec&) {
            Mat j(2, 2);
            j(0, 0) = 1.0;
            j(1, 1) = -e;
            return j;
        };
        edge.direction = GuardDirection::Down;
        return edge;
    };
    auto switch_edge = [&](int from, int to, GuardDirection dir, const char* name) {
        HybridEdge edge;
        edge.from = from;
        edge.to = to;
        edge.name = name;
        const double ys = p.y_switch;
        edge.guard = [ys](const Vec& x) { return x[0] - ys; };
        edge.grad_guard = [](const Vec&) { return Vec{1.0, 0.0}; };
        edge.reset = [](const Vec& x) { return x; };
        edge.reset_jacobian = [](const Vec&) { return Mat::identity(2); };
        edge.direction = dir;
        return edge;
    };
    b.automaton.edges = {impact_edge(0, p.e1, "impact-soft"), impact_edge(1, p.e2, "impact-hard"),
                         switch_edge(1, 0, GuardDirection::Down, "descend-to-soft"),
                         switch_edge(0, 1, GuardDirection::Up, "ascend-to-hard")};
    b.automaton.validate();

    b.x0 = {p.y0, p.v0};
    b.q0 = 1;

    // Stage one: full thrust until the first impact fixes the arc boundary.
    SimConfig sim;
    sim.dt = p.dt;
    sim.event_tol = p.event_tol;
    const double u_max = p.u_max;
    ModeControlSignal full_thrust = [u_max](int, double) { return Vec{u_max}; };
    Trajectory probe = simulate_hybrid(b.automaton, full_thrust, b.x0, b.q0, 0.0, 2.0, sim);
    double impact_time = -1.0;
    double v_after = 0.0;
    for (const auto& ev : probe.events) {
        if (ev.kind == EventKind::Impact) {
            impact_time = ev.time;
            v_after = ev.state_after[1];
            break;
        }
    }
    if (impact_time < 0.0) throw ConfigError("reference never impacts; check parameters");
    b.impact_time = impact_time;
    b.t_end = impact_time + v_after / p.gravity;

    const double tau = impact_time;
    b.reference_control = [u_max, tau](int, double t) {
        return Vec{t < tau ? u_max : 0.0};
    };
    b.reference = simulate_hybrid(b.automaton, b.reference_control, b.x0, b.q0, 0.0, b.t_end, sim);
    return b;
}

// ============================================================================
// Temperature
// ============================================================================

TemperatureBuild build_temperature(const ScenarioParams& p) {
    TemperatureBuild b;
    b.system.state_dim = 1;
    b.system.noise_dim = 1;
    b.system.t_start = 0.0;
    b.system.t_end = p.t_final;

    StochasticMode heat;
    heat.name = "heating";
    heat.f = [a = p.alpha1, c = p.beta1](double, const Vec& x, const Vec& u) {
        return Vec{a * (u[0] - x[0]) + c};
    };
    heat.sigma = [s = p.sigma1](double, const Vec& x, const Vec&) {
        Mat m(1, 1);
        m(0, 0) = s * x[0];
        return m;
    };
    StochasticMode cool;
    cool.name = "cooling";
    cool.f = [a = p.alpha2, c = p.beta2](double, const Vec& x, const Vec& u) {
        return Vec{a * (u[0] - x[0]) - c};
    };
    cool.sigma = [s = p.sigma2](double, const Vec& x, const Vec&) {
        Mat m(1, 1);
        m(0, 0) = s * x[0];
        return m;
    };
    b.system.modes = {heat, cool};
    b.system.control_sets = {ControlSetSpec::interval(0.0, p.temp_u_max),
                             ControlSetSpec::interval(0.0, p.temp_u_max)};

    ThresholdEdge up;
    up.from = 0;
    up.to = 1;
    up.guard = [th = p.t_high](const Vec& x) { return x[0] - th; };
    up.grad_guard = [](const Vec&) { return Vec{1.0}; };
    up.reset = [](const Vec& x) { return x; };
    up.direction = GuardDirection::Up;
    ThresholdEdge down;
    down.from = 1;
    down.to = 0;
    down.guard = [tl = p.t_low](const Vec& x) { return x[0] - tl; };
    down.grad_guard = [](const Vec&) { return Vec{1.0}; };
    down.reset = [](const Vec& x) { return x; };
    down.direction = GuardDirection::Down;
    b.system.threshold_edges = {up, down};
    b.system.validate();

    const double xd = p.x_target;
    const double lw = p.lambda_weight;
    b.cost.terminal = [xd](const Vec& x) { return (x[0] - xd) * (x[0] - xd); };
    b.cost.terminal_grad = [xd](const Vec& x) { return Vec{2.0 * (x[0] - xd)}; };
    b.cost.terminal_hess = [](const Vec&) {
        Mat m(1, 1);
        m(0, 0) = 2.0;
        return m;
    };
    b.cost.running = [lw](double, const Vec&, const Vec& u) { return lw * u[0] * u[0]; };
    b.cost.control_weight = lw;

    b.reduced_cfg.nominal_mode = 0;
    b.reduced_cfg.x_nominal = p.x_target;
    b.reduced_cfg.terminal_state = p.terminal_nominal_or_default();
    b.reduced_cfg.dt = 1e-3;

    b.alpha_of_mode[0] = p.alpha1;
    b.alpha_of_mode[1] = p.alpha2;
    b.lambda_weight = lw;
    b.u_max = p.temp_u_max;
    b.x0 = {p.x_init};
    b.q0 = p.x_init < p.x_target ? 0 : 1;
    return b;
}

StochasticControl temperature_feedback(const TemperatureBuild& build,
                                       const StochasticCandidate& cand) {
    const double a0 = build.alpha_of_mode[0];
    const double a1 = build.alpha_of_mode[1];
    const double lw = build.lambda_weight;
    const double hi = build.u_max;
    return [=](double t, const Vec&, int q) {
        const double psi = cand.psi_at(t);
        return Vec{feedback_control_law(q == 0 ? a0 : a1, lw, psi, 0.0, hi).value};
    };
}

// ============================================================================
// Hybrid candidate search
// ============================================================================

HybridSearchResult search_hybrid_candidates(const HybridAutomaton& aut, const Trajectory& ref,
                                            const ModeControlSignal& u, int sense,
                                            int angular_samples, double tol) {
    if (aut.state_dim != 2)
        throw CapabilityError("hybrid candidate search implemented for planar states");
    std::size_t n_jumps = 0;
    for (const auto& ev : ref.events)
        if (ev.kind == EventKind::Impact || ev.kind == EventKind::ModeSwitch ||
            ev.kind == EventKind::GuardCross)
            ++n_jumps;
    const std::vector<double> nus(n_jumps, 0.0);

    HybridSearchResult out;
    bool first = true;
    NonsmoothCheckConfig cfg;
    cfg.time_stride = std::max<std::size_t>(1, ref.times.size() / 512);
    for (int k = 0; k < angular_samples; ++k) {
        const double th = 2.0 * M_PI * k / angular_samples;
        const Vec psi0{std::cos(th), std::sin(th)};
        NonsmoothReport rep = check_hybrid_candidate(aut, ref, u, psi0, nus, sense, tol, cfg);
        if (first || rep.violation < out.min_violation ||
            (rep.violation == out.min_violation && lex_less(psi0, out.argmin_psi0))) {
            first = false;
            out.min_violation = rep.violation;
            out.argmin_psi0 = psi0;
            out.report = rep;
        }
    }
    return out;
}

}  // namespace optcert
