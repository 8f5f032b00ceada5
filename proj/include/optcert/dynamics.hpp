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

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "optcert/errors.hpp"
#include "optcert/linalg.hpp"

namespace optcert {

// ============================================================================
// System description
// ============================================================================

using DriftFn = std::function<Vec(double t, const Vec& x, const Vec& u)>;
using StateJacobianFn = std::function<Mat(double t, const Vec& x, const Vec& u)>;
/// One Hessian matrix per state component: result[k](i,j) = d2 f_k / dx_i dx_j.
using StateHessianFn = std::function<std::vector<Mat>(double t, const Vec& x, const Vec& u)>;

struct ModeDynamics {
    std::string name;
    DriftFn f;
    StateJacobianFn f_x;
    StateHessianFn f_xx;
};

struct ControlSetSpec {
    enum class Kind { FiniteSet, Interval, Box, Sphere };

    Kind kind = Kind::Interval;
    std::size_t dimension = 1;
    std::vector<Vec> points;  // FiniteSet
    double lo = 0.0;          // Interval
    double hi = 0.0;
    Vec lo_vec;               // Box
    Vec hi_vec;
    double radius = 1.0;      // Sphere

    static ControlSetSpec finite_set(std::vector<Vec> pts);
    static ControlSetSpec interval(double lo, double hi);
    static ControlSetSpec box(Vec lo, Vec hi);
    static ControlSetSpec sphere(double radius, std::size_t dimension = 2);

    void validate() const;
    bool contains(const Vec& u, double tol = 1e-9) const;
};

struct ControlSystem {
    std::size_t state_dim = 0;
    std::vector<ModeDynamics> modes;
    std::vector<ControlSetSpec> control_sets;  // one per mode
    double t_start = 0.0;
    double t_end = 1.0;

    void validate() const;
    const ModeDynamics& mode(std::size_t q) const;
    const ControlSetSpec& control_set(std::size_t q) const;
};

/// Self-test hook: max relative gap between the supplied Jacobian and central
/// finite differences of f over the given probe points.
double jacobian_probe_defect(const ControlSystem& sys, std::size_t mode,
                             const std::vector<std::tuple<double, Vec, Vec>>& probes,
                             double fd_step = 1e-6);

// ============================================================================
// Relaxed controls
// ============================================================================

struct GeneralizedControl {
    struct Atom {
        Vec point;
        double weight = 0.0;
    };
    struct Piece {
        double t_begin = 0.0;
        double t_end = 0.0;
        std::vector<Atom> atoms;
    };
    std::vector<Piece> pieces;

    /// Weights nonnegative and summing to one per piece; pieces partition
    /// [t_start, t_end]; atoms inside the control set.
    void validate(const ControlSetSpec& set, double span_begin, double span_end) const;
    const Piece& piece_at(double t) const;
};

/// Mass-preserving signed perturbation of a GeneralizedControl.
struct MeasureVariation {
    struct Atom {
        Vec point;
        double weight = 0.0;  // signed
    };
    struct Piece {
        double t_begin = 0.0;
        double t_end = 0.0;
        std::vector<Atom> atoms;
    };
    std::vector<Piece> pieces;

    bool empty() const;
    void validate(const ControlSetSpec& set) const;
    /// Atoms of the piece covering t (empty list when none).
    const std::vector<Atom>* atoms_at(double t) const;
};

// ============================================================================
// Trajectories
// ============================================================================

enum class EventKind { GuardCross, Impact, SlidingEnter, SlidingExit, ModeSwitch };

struct TrajectoryEvent {
    double time = 0.0;
    EventKind kind = EventKind::GuardCross;
    int mode_from = 0;
    int mode_to = 0;
    int edge = -1;
    Vec state_before;
    Vec state_after;
};

struct Trajectory {
    std::vector<double> times;
    std::vector<Vec> states;
    std::vector<int> modes;
    std::vector<TrajectoryEvent> events;

    void validate() const;
    const Vec& front_state() const { return states.front(); }
    const Vec& back_state() const { return states.back(); }
    /// Linear interpolation of the state at time t (clamped to the grid span).
    Vec state_at(double t) const;
    std::size_t index_at(double t) const;
};

struct SimConfig {
    double dt = 1e-3;
    double event_tol = 1e-9;
    bool dense_output = true;
    int max_events = 10000;

    void validate() const;
};

// ============================================================================
// Operations
// ============================================================================

Vec eval_vector_field(const ControlSystem& sys, std::size_t mode, double t, const Vec& x,
                      const Vec& u);

Vec eval_convexified_drift(const ControlSystem& sys, std::size_t mode,
                           const GeneralizedControl& mu, double t, const Vec& x);

/// mu-averaged state Jacobian of the active piece.
Mat averaged_jacobian(const ControlSystem& sys, std::size_t mode, const GeneralizedControl& mu,
                      double t, const Vec& x);

/// mu-average of the component-sum Hessian sum_k d2 f_k/dx dx.
Mat averaged_hessian(const ControlSystem& sys, std::size_t mode, const GeneralizedControl& mu,
                     double t, const Vec& x);

/// mu-averaged Hessian quadratic vector: component k is <mu, dx' (f_k)_xx dx>.
Vec averaged_hessian_quadratic(const ControlSystem& sys, std::size_t mode,
                               const GeneralizedControl& mu, double t, const Vec& x,
                               const Vec& dx);

using OdeRhs = std::function<Vec(double t, const Vec& x)>;

/// One classical Runge-Kutta step.
Vec rk4_step(const OdeRhs& rhs, double t, const Vec& x, double h);

/// Fixed-step 4th-order integration; the final grid point is exactly tb.
Trajectory integrate_ode(const OdeRhs& rhs, const Vec& x0, double ta, double tb,
                         const SimConfig& cfg, int mode_label = 0);

double hamiltonian_eval(const ControlSystem& sys, std::size_t mode, double t, const Vec& x,
                        const Vec& psi, const Vec& u);

struct MaximizeConfig {
    int sphere_samples = 720;
    int axis_samples = 64;
    bool allow_grid = true;
    double affine_tol = 1e-9;
};

struct MaxResult {
    double value = 0.0;
    Vec argmax;
    bool used_grid = false;
};

/// Maximizes an arbitrary scalar objective over a control set. Detects
/// objectives that are affine on the set by probing and then maximizes
/// exactly; otherwise falls back to a deterministic grid. Ties break to the
/// lexicographically smallest control.
MaxResult maximize_over_control_set(const ControlSetSpec& set,
                                    const std::function<double(const Vec&)>& objective,
                                    const MaximizeConfig& cfg = {});

MaxResult hamiltonian_max(const ControlSystem& sys, std::size_t mode, double t, const Vec& x,
                          const Vec& psi, const MaximizeConfig& cfg = {});

// ============================================================================
// Ordinary-control approximation of relaxed controls
// ============================================================================

struct PiecewiseControl {
    std::vector<double> knots;   // size n+1
    std::vector<Vec> values;     // size n, value on [knots[i], knots[i+1])

    Vec at(double t) const;
    void validate() const;
};

/// Within each period the atoms occupy subintervals proportional to their
/// weights, in atom order. As period -> 0 the chattered endpoint converges to
/// the convexified one.
PiecewiseControl chatter_approximate(const GeneralizedControl& mu, double period);

/// Integrates under a piecewise-constant control, stepping each constant
/// piece separately so no RK4 stage straddles a control jump.
Trajectory integrate_with_piecewise_control(const ControlSystem& sys, std::size_t mode,
                                            const PiecewiseControl& u, const Vec& x0, double ta,
                                            double tb, const SimConfig& cfg);

enum class TrajNorm { C0, C1 };

/// C0: sup over the shared grid of the Euclidean state gap. C1 adds the sup
/// gap of forward-difference derivatives.
double trajectory_distance(const Trajectory& a, const Trajectory& b, TrajNorm norm);

}  // namespace optcert
