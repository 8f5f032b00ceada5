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

#include "optcert/second_order.hpp"
#include "optcert/stochastic.hpp"

namespace optcert {

/// Parameter block shared by the builtin scenarios; field defaults are the
/// worked-example values.
struct ScenarioParams {
    // grids
    double dt = 1e-3;      // deterministic integration step
    double em_dt = 1e-2;   // Euler-Maruyama step
    double event_tol = 1e-9;

    // planar drift system with a circle control set
    double epsilon = 0.1;
    double omega = 0.0;  // 0 means the 2*epsilon default
    double horizon = 1.0;

    // dry-friction particle
    double delta = 0.05;

    // bouncing ball with switchable surfaces
    double e1 = 0.5;
    double e2 = 0.8;
    double gravity = 9.8;
    double u_max = 12.0;
    double y0 = 1.0;
    double v0 = -3.0;
    double y_switch = 0.5;

    // stochastic thermostat
    double alpha1 = 0.5;
    double alpha2 = 0.6;
    double beta1 = 1.0;
    double beta2 = 0.8;
    double sigma1 = 0.2;
    double sigma2 = 0.25;
    double lambda_weight = 0.1;
    double t_low = 18.0;
    double t_high = 22.0;
    double x_target = 20.0;
    double x_init = 19.0;
    double t_final = 10.0;
    double temp_u_max = 5.0;
    double terminal_nominal = 0.0;  // 0 means the x_init default

    double omega_or_default() const { return omega > 0.0 ? omega : 2.0 * epsilon; }
    double terminal_nominal_or_default() const {
        return terminal_nominal > 0.0 ? terminal_nominal : x_init;
    }
};

// ============================================================================
// Planar nonholonomic drift system (circle control set)
// ============================================================================

struct NonholonomicBuild {
    ControlSystem system;
    Reference reference;  // x_hat = (0,0,t), four-atom relaxed control
};

NonholonomicBuild build_nonholonomic(const ScenarioParams& p);

/// u(t) = (cos(omega t / epsilon), sin(omega t / epsilon)).
ControlSignal nonholonomic_oscillating_control(double epsilon, double omega);

/// Closed-form trajectory of the oscillating control from the origin.
Vec nonholonomic_closed_form(double epsilon, double omega, double t);

/// Closed-form third coordinate at time t (used by the attainment probe).
double nonholonomic_closed_x3(double epsilon, double omega, double t);

// ============================================================================
// Dry-friction particle (Filippov)
// ============================================================================

struct FrictionBuild {
    FilippovSystem filippov;
    /// Surface-restricted system for first-order certificate work: velocity
    /// w = u - sigma(0) ranges over [-2, 2] on the surface.
    ControlSystem surface_system;
    Reference reference;  // x_hat = (0,0) with the two-atom relaxed control
    ControlSignal pulse_control;
    std::vector<BranchWindow> pulse_schedule;
    double pulse_end = 0.0;  // 4 * delta
};

FrictionBuild build_friction(const ScenarioParams& p);

// ============================================================================
// Bouncing ball with switchable surfaces (hybrid)
// ============================================================================

struct BouncingBallBuild {
    HybridAutomaton automaton;
    Vec x0;
    int q0 = 1;  // starts on the hard surface
    ModeControlSignal reference_control;
    Trajectory reference;
    double impact_time = 0.0;
    double t_end = 0.0;  // apex after the first impact
};

BouncingBallBuild build_bouncing_ball(const ScenarioParams& p);

// ============================================================================
// Stochastic thermostat
// ============================================================================

struct TemperatureBuild {
    StochasticHybridSystem system;
    CostSpec cost;
    ReducedAdjointConfig reduced_cfg;
    double alpha_of_mode[2] = {0.0, 0.0};
    double lambda_weight = 0.0;
    double u_max = 0.0;
    Vec x0;
    int q0 = 0;
};

TemperatureBuild build_temperature(const ScenarioParams& p);

/// Clamped feedback u(t,x,q) = clamp(-alpha_q psi(t) / (2 lambda), 0, u_max)
/// driven by the reduced candidate.
StochasticControl temperature_feedback(const TemperatureBuild& build,
                                       const StochasticCandidate& cand);

// ============================================================================
// Hybrid candidate search (unit-circle psi0, zero multipliers)
// ============================================================================

struct HybridSearchResult {
    double min_violation = 0.0;
    Vec argmin_psi0;
    NonsmoothReport report;
};

HybridSearchResult search_hybrid_candidates(const HybridAutomaton& aut, const Trajectory& ref,
                                            const ModeControlSignal& u, int sense,
                                            int angular_samples, double tol);

}  // namespace optcert
