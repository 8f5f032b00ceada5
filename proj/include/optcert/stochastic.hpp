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

#include "optcert/nonsmooth.hpp"
#include "optcert/rng.hpp"

namespace optcert {

// ============================================================================
// System
// ============================================================================

using DiffusionFn = std::function<Mat(double t, const Vec& x, const Vec& u)>;  // n x noise_dim

struct StochasticMode {
    std::string name;
    DriftFn f;
    DiffusionFn sigma;
};

struct ThresholdEdge {
    int from = 0;
    int to = 0;
    std::function<double(const Vec&)> guard;
    std::function<Vec(const Vec&)> grad_guard;
    std::function<Vec(const Vec&)> reset;  // identity resets are the supported regime
    GuardDirection direction = GuardDirection::Any;
};

/// Transition intensity lambda_{ij}(t, x, u); must be >= 0 for i != j.
using IntensityFn = std::function<double(int from, int to, double t, const Vec& x, const Vec& u)>;

struct StochasticHybridSystem {
    std::size_t state_dim = 1;
    std::size_t noise_dim = 1;
    std::vector<StochasticMode> modes;
    std::vector<ControlSetSpec> control_sets;
    std::vector<ThresholdEdge> threshold_edges;
    IntensityFn intensity;  // unset when switching is threshold-driven
    double t_start = 0.0;
    double t_end = 1.0;

    void validate() const;
};

/// Feedback law or open-loop signal; x and mode may be ignored.
using StochasticControl = std::function<Vec(double t, const Vec& x, int mode)>;

// ============================================================================
// Ensembles
// ============================================================================

struct EnsembleConfig {
    std::uint64_t seed = 0;
    std::size_t n_paths = 1;
    double dt = 1e-2;
    int workers = 1;

    void validate() const;
};

struct PathSim {
    std::vector<double> times;
    std::vector<Vec> states;
    std::vector<int> modes;
    std::vector<Vec> controls;
    std::vector<TrajectoryEvent> events;
    bool diverged = false;
};

struct PathEnsemble {
    std::uint64_t seed = 0;
    std::size_t n_paths = 0;
    double dt = 0.0;
    std::vector<PathSim> paths;
    std::size_t n_diverged = 0;
};

/// Euler-Maruyama with mode-dependent drift/diffusion. Threshold guards are
/// checked at step boundaries with a linear-interpolation snap of the
/// crossing time; intensity switching is Bernoulli thinning with probability
/// min(1, lambda*dt). Path i is a pure function of (seed, i).
PathEnsemble simulate_paths(const StochasticHybridSystem& sys, const StochasticControl& control,
                            const Vec& x0, int q0, double ta, double tb,
                            const EnsembleConfig& cfg);

double stochastic_hamiltonian(const StochasticHybridSystem& sys, std::size_t mode, double t,
                              const Vec& x, const Vec& psi, const Mat& psi_matrix, const Vec& u);

// ============================================================================
// Costs
// ============================================================================

struct CostSpec {
    std::function<double(const Vec&)> terminal;
    std::function<Vec(const Vec&)> terminal_grad;
    std::function<Mat(const Vec&)> terminal_hess;
    std::function<double(double t, const Vec& x, const Vec& u)> running;
    double control_weight = 0.0;  // the lambda of quadratic-effort costs
};

/// Max relative gap between supplied terminal grad/hess and finite
/// differences over the probes.
double cost_probe_defect(const CostSpec& cost, const std::vector<Vec>& probes,
                         double fd_step = 1e-5);

struct MonteCarloResult {
    double estimate = 0.0;
    double std_error = 0.0;
    std::size_t n_used = 0;
    std::size_t n_diverged = 0;
};

/// Per-path trapezoidal running cost plus terminal cost; the mean and
/// standard error accumulate in fixed path order, so results are bit-equal
/// for any worker count.
MonteCarloResult monte_carlo_cost(const StochasticHybridSystem& sys,
                                  const StochasticControl& control, const Vec& x0, int q0,
                                  double ta, double tb, const CostSpec& cost,
                                  const EnsembleConfig& cfg);

struct VariationRow {
    double epsilon = 0.0;
    double delta_j = 0.0;
    double std_error = 0.0;
};

/// Paired (common-random-numbers) cost differences for the perturbed control
/// u_eps(t) = max(0, base(t) + eps * delta_u(t)). A zero direction returns
/// exactly zero rows.
std::vector<VariationRow> variation_cost_test(const StochasticHybridSystem& sys,
                                              const StochasticControl& base,
                                              const ControlSignal& delta_u,
                                              const std::vector<double>& epsilons, const Vec& x0,
                                              int q0, double ta, double tb, const CostSpec& cost,
                                              const EnsembleConfig& cfg);

// ============================================================================
// Reduced adjoints and candidate checks  (Gamma = Theta = 0 regime)
// ============================================================================

struct StochasticCandidate {
    std::vector<double> times;
    std::vector<Vec> psi;           // first adjoint (deterministic reduction)
    std::vector<Mat> psi_matrix;    // second adjoint
    std::function<double(std::size_t edge, double t)> gamma;  // jump multipliers; unset = 0
    Vec nominal_terminal;           // terminal state the candidate was built from

    // Flat scalar views cached for hot feedback loops.
    std::vector<double> psi_scalar_series;
    std::vector<double> psi_matrix_scalar_series;
    void rebuild_scalar_cache();

    double psi_at(double t) const;  // scalar-state convenience
    double psi_matrix_at(double t) const;
};

struct ReducedAdjointConfig {
    int nominal_mode = 0;
    double x_nominal = 0.0;        // drift linearization point (the target x_d)
    double terminal_state = 0.0;   // terminal data evaluation point
    double dt = 1e-3;
    bool request_martingale = false;  // must stay false; guarded
    /// Optional frozen nominal path x_bar(t) replacing the constant
    /// x_nominal in the first-adjoint forcing term.
    std::function<double(double)> nominal_path;
};

/// Backward integration of the reduced second-adjoint equation
/// dPsi = -sigma'^2 Psi dt and the linearized first-adjoint equation
/// dpsi = [alpha psi - Psi sigma'^2 x_nominal] dt with terminal data from the
/// cost. Scalar-state systems only; nonzero martingale integrands raise the
/// capability error.
StochasticCandidate reduced_adjoint_propagate(const StochasticHybridSystem& sys,
                                              const ReducedAdjointConfig& cfg,
                                              const CostSpec& cost);

struct FeedbackResult {
    double value = 0.0;
    bool clamped = false;  // interior value strictly outside [lo, hi]
};

/// clamp(-alpha * psi / (2 * lambda), lo, hi). An interior value exactly at a
/// bound reports clamped = false.
FeedbackResult feedback_control_law(double alpha, double lambda_weight, double psi_value,
                                    double lo, double hi);

struct StochasticReport {
    double terminal_psi_residual = 0.0;
    double terminal_psi_matrix_residual = 0.0;
    std::vector<double> gap_times;
    std::vector<double> gap_series;  // ensemble-averaged stationarity defect
    double max_gap = 0.0;
    std::vector<double> jump_residuals;  // one per switching event across paths
    double nontriviality_slack = 0.0;
    double violation = 0.0;
    double tolerance = 0.0;
    bool accept = false;
};

/// Evaluates the reduced stochastic certificate on a stored ensemble: the
/// pathwise stationarity defect |d(H_q + L)/du| at the applied control
/// (ensemble-averaged per grid time), jump residuals of the condition-5
/// formula with the supplied gamma, and terminal residuals against the cost
/// gradients at the candidate's nominal terminal state.
StochasticReport check_stochastic_candidate(const StochasticHybridSystem& sys,
                                            const PathEnsemble& ensemble,
                                            const StochasticControl& control,
                                            const StochasticCandidate& cand, const CostSpec& cost,
                                            double tol);

}  // namespace optcert
