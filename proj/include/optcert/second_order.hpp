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

#include <optional>

#include "optcert/first_order.hpp"

namespace optcert {

// Index conventions for the ambiguous tensor pairings, used consistently by
// the optimized paths here and by the independent test oracle:
//   <Q, f_xx(dx,dx)>      = sum_k Q[k][k] * (dx' (f_k)_xx dx)
//   Riccati Hessian term  = mu-average of sum_k (f_k)_xx
//   scalar-Psi rate       = sum_k <mu, dx' (f_k)_xx dx>

struct VariationPair {
    std::vector<double> times;
    std::vector<Vec> delta_x;
    std::vector<Vec> delta2_x;
};

struct RiccatiMatrix {
    std::vector<double> times;
    std::vector<Mat> q;

    /// Symmetry within 1e-12 at every grid point.
    void validate() const;
};

struct SecondOrderCandidate {
    Vec psi0;
    Mat q0;
    /// Optional constant slope: Q(t) = q0 + (t - t_start) * q_slope.
    std::optional<Mat> q_slope;
    double psi_scalar0 = 0.0;
    MeasureVariation variation;    // delta mu
    MeasureVariation variation2;   // delta^2 mu (often empty)
    int sense = -1;
};

struct SecondOrderReport : CertificateReport {
    double riccati_excess = 0.0;
    double second_max_gap = 0.0;
    double psi_scalar_defect = 0.0;
    double second_transversality_excess = 0.0;
    std::vector<double> psi_scalar_trace;
};

VariationPair propagate_variation(const ControlSystem& sys, const Reference& ref,
                                  const MeasureVariation& dmu, const MeasureVariation& d2mu,
                                  const SimConfig& cfg);

struct RiccatiResidual {
    std::vector<double> sup_eigenvalues;  // largest eigenvalue of the LHS per time
    double sup = 0.0;
};

/// Largest eigenvalue per grid point of
///   Qdot + Q A + A' Q + <mu, sum_k (f_k)_xx>,
/// with Qdot by central differences (one-sided at the ends). The inequality
/// holds iff sup <= tol.
RiccatiResidual riccati_residual(const ControlSystem& sys, const Reference& ref,
                                 const RiccatiMatrix& q);

struct SecondOrderHamiltonianResult {
    double value = 0.0;   // H^2 at the supplied control
    MaxResult max;        // M^2 over the control set
};

SecondOrderHamiltonianResult second_order_hamiltonian(const ControlSystem& sys, std::size_t mode,
                                                      double t, const Vec& x, const Vec& psi,
                                                      const Mat& q, const Vec& u, const Vec& dx,
                                                      const MaximizeConfig& cfg = {});

/// Builds the candidate's Q trajectory on the reference grid.
RiccatiMatrix candidate_q_trajectory(const SecondOrderCandidate& cand, const Reference& ref);

SecondOrderReport check_second_order_candidate(const ControlSystem& sys, const Reference& ref,
                                               const SecondOrderCandidate& cand, double tol,
                                               const CheckConfig& cfg = {});

struct SecondOrderSearchGrid {
    int angular_samples = 24;
    std::vector<double> q_eigenvalues = {-1.0, 0.0, 1.0};
    std::vector<MeasureVariation> variations;  // scenario-supplied; zero added if empty
    std::size_t time_stride = 0;               // 0 = auto
    int workers = 2;
    MaximizeConfig max_cfg;
};

struct SecondOrderSearchResult {
    double min_violation = 0.0;
    SecondOrderCandidate argmin;
    SecondOrderReport report;
};

SecondOrderSearchResult search_second_order(const ControlSystem& sys, const Reference& ref,
                                            int sense, const SecondOrderSearchGrid& grid,
                                            double tol = 1e-6);

}  // namespace optcert
