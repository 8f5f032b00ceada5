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

#include "optcert/first_order.hpp"

namespace optcert {

// ============================================================================
// Filippov systems
// ============================================================================

struct DiscontinuitySurface {
    std::function<double(const Vec&)> g;
    std::function<Vec(const Vec&)> grad_g;
};

/// Max relative gap between grad_g and central differences of g on probes.
double surface_probe_defect(const DiscontinuitySurface& surface, const std::vector<Vec>& probes,
                            double fd_step = 1e-6);

/// Two one-sided branches around a discontinuity surface. Mode 0 is the g>0
/// branch, mode 1 the g<0 branch. `sliding_jacobian`, when set, supplies the
/// adjoint coefficient used on sliding arcs; there is no general rule for it,
/// so scenarios pin their own Clarke-gradient selection.
struct FilippovSystem {
    ControlSystem base;
    DiscontinuitySurface surface;
    double surface_tol = 1e-9;  // scaled by (1 + ||x||)
    StateJacobianFn sliding_jacobian;

    void validate() const;
    double band(const Vec& x) const;
};

struct FilippovSetDescription {
    bool on_surface = false;
    int active_branch = 0;                 // meaningful off surface
    std::vector<Vec> upper_generators;     // velocities of the g>0 branch over U
    std::vector<Vec> lower_generators;     // velocities of the g<0 branch over U
    /// All generators of F(t,x): one branch off surface, both on it.
    std::vector<Vec> generators;
};

FilippovSetDescription filippov_set_eval(const FilippovSystem& sys, double t, const Vec& x,
                                         int samples_per_branch = 5);

enum class FilippovBranch { Auto, Upper, Lower };

struct BranchWindow {
    double t_begin = 0.0;
    double t_end = 0.0;
    FilippovBranch branch = FilippovBranch::Auto;
};

using ControlSignal = std::function<Vec(double)>;

/// Integrates the active branch between events, detects surface crossings by
/// bisection, and switches to the convex sliding combination while both
/// one-sided fields push toward the surface. `schedule` forces a branch on
/// given windows (the friction pulse-train construction holds branches fixed
/// per pulse).
Trajectory simulate_filippov(const FilippovSystem& sys, const ControlSignal& u, const Vec& x0,
                             double ta, double tb, const SimConfig& cfg,
                             const std::vector<BranchWindow>& schedule = {});

// ============================================================================
// Hybrid automata
// ============================================================================

enum class GuardDirection { Down, Up, Any };

struct HybridEdge {
    int from = 0;
    int to = 0;
    std::function<double(const Vec&)> guard;        // h, fires near h = 0
    std::function<Vec(const Vec&)> grad_guard;      // grad h
    std::function<Vec(const Vec&)> reset;           // phi
    std::function<Mat(const Vec&)> reset_jacobian;  // d phi / dx
    GuardDirection direction = GuardDirection::Down;
    std::string name;
};

struct HybridAutomaton {
    std::size_t state_dim = 0;
    std::vector<ModeDynamics> modes;
    std::vector<ControlSetSpec> control_sets;
    std::vector<HybridEdge> edges;
    double t_start = 0.0;
    double t_end = 1.0;

    void validate() const;
    /// Reset-Jacobian health: worst condition estimate along the probes.
    double reset_condition_estimate(std::size_t edge, const std::vector<Vec>& probes) const;
};

using ModeControlSignal = std::function<Vec(int mode, double t)>;

/// Integrates the active mode, locates guard crossings by time bisection to
/// event_tol, applies resets, and records events. Simultaneous guards resolve
/// in edge declaration order; more than cfg.max_events crossings raises the
/// Zeno error. With one mode and no edges the output grid and states are
/// bit-identical to integrate_ode.
Trajectory simulate_hybrid(const HybridAutomaton& aut, const ModeControlSignal& u, const Vec& x0,
                           int q0, double ta, double tb, const SimConfig& cfg);

// ============================================================================
// Adjoints with jumps
// ============================================================================

struct JumpRecord {
    double time = 0.0;
    int edge = -1;
    int mode_from = 0;
    int mode_to = 0;
    double nu = 0.0;
    Vec psi_before;
    Vec psi_after;
};

struct JumpAdjoint {
    AdjointState adjoint;
    std::vector<JumpRecord> jumps;
};

/// Hybrid variant: within arcs propagates the mode adjoint; at each recorded
/// event applies psi+ = psi- * [d phi/dx]^{-1} + nu * grad h. One multiplier
/// per event is required.
JumpAdjoint adjoint_with_jumps(const HybridAutomaton& aut, const Trajectory& ref,
                               const ModeControlSignal& u, const Vec& psi0,
                               const std::vector<double>& multipliers, const SimConfig& cfg);

/// Filippov variant: arcs use the active branch Jacobian (the sliding
/// Jacobian on sliding arcs); crossings jump by psi+ = psi- + nu * grad g.
JumpAdjoint adjoint_with_jumps(const FilippovSystem& sys, const Trajectory& ref,
                               const ControlSignal& u, const Vec& psi0,
                               const std::vector<double>& multipliers, const SimConfig& cfg);

struct NonsmoothReport : CertificateReport {
    std::vector<double> jump_residuals;
    double switching_transversality_excess = 0.0;
};

struct NonsmoothCheckConfig {
    std::size_t time_stride = 1;
    MaximizeConfig max_cfg;
};

/// Hybrid candidate check: mode-wise maximum condition, jump-formula
/// self-consistency, the switching inequality
/// <psi-, f_before> >= <psi+, f_after>, and terminal transversality in the
/// final mode.
NonsmoothReport check_hybrid_candidate(const HybridAutomaton& aut, const Trajectory& ref,
                                       const ModeControlSignal& u, const Vec& psi0,
                                       const std::vector<double>& multipliers, int sense,
                                       double tol, const NonsmoothCheckConfig& cfg = {});

/// Filippov candidate check: maximizes <psi, v> over the hull generators along
/// the reference and compares with <psi, xdot_hat>.
NonsmoothReport check_filippov_candidate(const FilippovSystem& sys, const Reference& ref,
                                         const Vec& psi0, const std::vector<double>& multipliers,
                                         int sense, double tol,
                                         const NonsmoothCheckConfig& cfg = {});

}  // namespace optcert
