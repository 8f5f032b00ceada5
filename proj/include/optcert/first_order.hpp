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

#include "optcert/dynamics.hpp"

namespace optcert {

/// Reference pair (trajectory, relaxed control) that candidates are checked
/// against. `velocity` optionally supplies the exact d x_hat/dt; without it
/// the checker falls back to finite differences of the stored grid.
struct Reference {
    Trajectory traj;
    GeneralizedControl mu;
    std::size_t mode = 0;
    std::function<Vec(double)> velocity;
    bool admissibility_waived = false;
};

struct AdjointState {
    std::vector<double> times;
    std::vector<Vec> psi;  // row costates
};

struct FirstOrderCandidate {
    Vec psi0;
    int sense = -1;  // -1: minimality, +1: maximality
};

/// Residuals are reported exactly as evaluated for the candidate as given.
/// `violation` is scale-normalized: it equals the max residual of the
/// candidate rescaled to sup-norm one, so the verdict is invariant under
/// positive scaling of psi0. An identically zero candidate reports
/// violation = nontriviality_slack = 1.
struct CertificateReport {
    double adjoint_residual = 0.0;
    double max_gap = 0.0;
    double transversality_excess = 0.0;
    double nontriviality_slack = 0.0;
    double admissibility_defect = 0.0;
    double worst_admissibility_time = 0.0;
    double violation = 0.0;
    double tolerance = 0.0;
    bool accept = false;
};

struct CheckConfig {
    double admissibility_tol = 1e-6;
    std::size_t time_stride = 1;
    MaximizeConfig max_cfg;
};

AdjointState propagate_adjoint(const ControlSystem& sys, const Reference& ref, const Vec& psi0,
                               const SimConfig& cfg);

/// Transition matrices Phi(t_i) of the linear adjoint flow on the reference
/// grid, with psi(t_i) = psi0 * Phi(t_i). Shared by the sphere search so each
/// candidate costs one row-matrix product per grid point.
std::vector<Mat> propagate_adjoint_transition(const ControlSystem& sys, const Reference& ref);

MaxResult max_function(const ControlSystem& sys, std::size_t mode, double t, const Vec& x,
                       const Vec& psi, const MaximizeConfig& cfg = {});

/// Sup distance between the reference states and a re-integration of the
/// convexified drift from the same initial state; also reports the worst time.
std::pair<double, double> admissibility_defect(const ControlSystem& sys, const Reference& ref);

CertificateReport check_first_order_candidate(const ControlSystem& sys, const Reference& ref,
                                              const FirstOrderCandidate& cand, double tol,
                                              const CheckConfig& cfg = {});

struct FirstOrderSearchGrid {
    int angular_samples = 360;   // per full circle; >= 8 per spec
    std::size_t time_stride = 0; // 0 = auto (~256 samples along the grid)
    int workers = 2;
    MaximizeConfig max_cfg;
};

struct FirstOrderSearchResult {
    double min_violation = 0.0;
    FirstOrderCandidate argmin;
    CertificateReport report;
    /// Largest violation change between angular neighbors; refining the grid
    /// cannot raise the minimum by more than this.
    double grid_modulus = 0.0;
};

/// Exhaustive evaluation over a uniform unit-sphere grid of initial costates
/// (state dimensions 1 to 3). Deterministic; ties resolve to the
/// lexicographically smallest psi0.
FirstOrderSearchResult search_first_order(const ControlSystem& sys, const Reference& ref,
                                          int sense, const FirstOrderSearchGrid& grid,
                                          double tol = 1e-6);

/// Uniform grid on the unit sphere in R^dim (dim <= 3).
std::vector<Vec> unit_sphere_grid(std::size_t dim, int angular_samples);

}  // namespace optcert
