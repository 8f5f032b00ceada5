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

#include "optcert/first_order.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

namespace optcert {

namespace {

Vec reference_velocity(const Reference& ref, std::size_t i) {
    if (ref.velocity) return ref.velocity(ref.traj.times[i]);
    const auto& t = ref.traj.times;
    const auto& x = ref.traj.states;
    if (t.size() < 2) throw ConfigError("reference grid too short for velocities");
    if (i == 0) return scaled(sub(x[1], x[0]), 1.0 / (t[1] - t[0]));
    if (i + 1 == t.size())
        return scaled(sub(x[i], x[i - 1]), 1.0 / (t[i] - t[i - 1]));
    return scaled(sub(x[i + 1], x[i - 1]), 1.0 / (t[i + 1] - t[i - 1]));
}

}  // namespace

AdjointState propagate_adjoint(const ControlSystem& sys, const Reference& ref, const Vec& psi0,
                               const SimConfig& cfg) {
    (void)cfg;
    ref.traj.validate();
    if (psi0.size() != sys.state_dim) throw ConfigError("psi0 dimension mismatch");

    AdjointState out;
    out.times = ref.traj.times;
    out.psi.reserve(out.times.size());
    Vec psi = psi0;
    out.psi.push_back(psi);
    auto rhs = [&](double t, const Vec& p) {
        Mat a = averaged_jacobian(sys, ref.mode, ref.mu, t, ref.traj.state_at(t));
        return scaled(vecmat(p, a), -1.0);
    };
    for (std::size_t i = 0; i + 1 < out.times.size(); ++i) {
        const double h = out.times[i + 1] - out.times[i];
        psi = rk4_step(rhs, out.times[i], psi, h);
        if (!all_finite(psi)) throw IntegrationError("adjoint blow-up", out.times[i + 1]);
        out.psi.push_back(psi);
    }
    return out;
}

std::vector<Mat> propagate_adjoint_transition(const ControlSystem& sys, const Reference& ref) {
    ref.traj.validate();
    const std::size_t n = sys.state_dim;
    std::vector<Mat> phis;
    phis.reserve(ref.traj.times.size());
    Mat phi = Mat::identity(n);
    phis.push_back(phi);

    // Flatten the matrix ODE dPhi/dt = -Phi A(t) into a vector RK4 step.
    auto rhs = [&](double t, const Vec& flat) {
        Mat p(n, n);
        p.data() = flat;
        Mat a = averaged_jacobian(sys, ref.mode, ref.mu, t, ref.traj.state_at(t));
        Mat d = matmul(p, a);
        d *= -1.0;
        return d.data();
    };
    Vec flat = phi.data();
    for (std::size_t i = 0; i + 1 < ref.traj.times.size(); ++i) {
        const double h = ref.traj.times[i + 1] - ref.traj.times[i];
        flat = rk4_step(rhs, ref.traj.times[i], flat, h);
        if (!all_finite(flat))
            throw IntegrationError("adjoint transition blow-up", ref.traj.times[i + 1]);
        Mat next(n, n);
        next.data() = flat;
        phis.push_back(next);
    }
    return phis;
}

MaxResult max_function(const ControlSystem& sys, std::size_t mode, double t, const Vec& x,
                       const Vec& psi, const MaximizeConfig& cfg) {
    return hamiltonian_max(sys, mode, t, x, psi, cfg);
}

std::pair<double, double> admissibility_defect(const ControlSystem& sys, const Reference& ref) {
    const auto& t = ref.traj.times;
    auto rhs = [&](double tt, const Vec& x) {
        return eval_convexified_drift(sys, ref.mode, ref.mu, tt, x);
    };
    Vec x = ref.traj.states.front();
    double worst = 0.0;
    double worst_time = t.front();
    for (std::size_t i = 0; i + 1 < t.size(); ++i) {
        x = rk4_step(rhs, t[i], x, t[i + 1] - t[i]);
        const double gap = norm2(sub(x, ref.traj.states[i + 1]));
        if (gap > worst) {
            worst = gap;
            worst_time = t[i + 1];
        }
    }
    return {worst, worst_time};
}

namespace {

CertificateReport evaluate_candidate(const ControlSystem& sys, const Reference& ref,
                                     const std::vector<Vec>& psi_series, int sense, double tol,
                                     const CheckConfig& cfg,
                                     const std::vector<Vec>& velocities) {
    const auto& t = ref.traj.times;
    const std::size_t stride = std::max<std::size_t>(1, cfg.time_stride);

    CertificateReport rep;
    rep.tolerance = tol;

    double sup_psi = 0.0;
    for (const Vec& p : psi_series) sup_psi = std::max(sup_psi, norm2(p));
    rep.nontriviality_slack = std::max(0.0, 1.0 - sup_psi);

    // Adjoint defect by central differences against the averaged Jacobian.
    for (std::size_t i = stride; i + stride < t.size(); i += stride) {
        const double h2 = t[i + stride] - t[i - stride];
        Vec dpsi = scaled(sub(psi_series[i + stride], psi_series[i - stride]), 1.0 / h2);
        Mat a = averaged_jacobian(sys, ref.mode, ref.mu, t[i], ref.traj.states[i]);
        Vec defect = add(dpsi, vecmat(psi_series[i], a));
        rep.adjoint_residual = std::max(rep.adjoint_residual, norm_inf(defect));
    }

    auto mode_at = [&](std::size_t idx) {
        return ref.traj.modes.empty() ? ref.mode
                                      : static_cast<std::size_t>(ref.traj.modes[idx]);
    };
    double terminal_m = 0.0;
    for (std::size_t i = 0; i < t.size(); i += stride) {
        MaxResult m = hamiltonian_max(sys, mode_at(i), t[i], ref.traj.states[i], psi_series[i],
                                      cfg.max_cfg);
        rep.max_gap = std::max(rep.max_gap, std::abs(dot(psi_series[i], velocities[i]) - m.value));
    }
    {
        const std::size_t last = t.size() - 1;
        MaxResult m = hamiltonian_max(sys, mode_at(last), t[last], ref.traj.states[last],
                                      psi_series[last], cfg.max_cfg);
        terminal_m = m.value;
        rep.max_gap = std::max(rep.max_gap,
                               std::abs(dot(psi_series[last], velocities[last]) - m.value));
    }

    rep.transversality_excess = std::max(0.0, -static_cast<double>(sense) * terminal_m);

    if (sup_psi <= 1e-300) {
        rep.violation = std::max(1.0, rep.nontriviality_slack);
    } else {
        rep.violation =
            std::max({rep.adjoint_residual, rep.max_gap, rep.transversality_excess}) / sup_psi;
    }
    rep.accept = rep.violation <= tol;
    return rep;
}

}  // namespace

CertificateReport check_first_order_candidate(const ControlSystem& sys, const Reference& ref,
                                              const FirstOrderCandidate& cand, double tol,
                                              const CheckConfig& cfg) {
    auto [defect, when] = admissibility_defect(sys, ref);
    if (defect > cfg.admissibility_tol && !ref.admissibility_waived)
        throw PreconditionError("reference not admissible: drift defect " +
                                std::to_string(defect) + " at t=" + std::to_string(when));

    SimConfig sim;
    AdjointState adj = propagate_adjoint(sys, ref, cand.psi0, sim);

    std::vector<Vec> velocities(ref.traj.times.size());
    for (std::size_t i = 0; i < velocities.size(); ++i) velocities[i] = reference_velocity(ref, i);

    CertificateReport rep =
        evaluate_candidate(sys, ref, adj.psi, cand.sense, tol, cfg, velocities);
    rep.admissibility_defect = defect;
    rep.worst_admissibility_time = when;
    return rep;
}

std::vector<Vec> unit_sphere_grid(std::size_t dim, int angular_samples) {
    if (angular_samples < 8) throw ConfigError("sphere grid needs >= 8 samples per dimension");
    std::vector<Vec> pts;
    switch (dim) {
        case 1:
            pts.push_back({-1.0});
            pts.push_back({1.0});
            break;
        case 2:
            pts.reserve(angular_samples);
            for (int k = 0; k < angular_samples; ++k) {
                const double th = 2.0 * M_PI * k / angular_samples;
                pts.push_back({std::cos(th), std::sin(th)});
            }
            break;
        case 3: {
            const int polar = angular_samples / 2;
            for (int i = 0; i <= polar; ++i) {
                const double phi = M_PI * i / polar;
                if (i == 0 || i == polar) {
                    pts.push_back({0.0, 0.0, std::cos(phi)});
                    continue;
                }
                for (int j = 0; j < angular_samples; ++j) {
                    const double th = 2.0 * M_PI * j / angular_samples;
                    pts.push_back(
                        {std::sin(phi) * std::cos(th), std::sin(phi) * std::sin(th),
                         std::cos(phi)});
                }
            }
            break;
        }
        default:
            throw CapabilityError("unit sphere grids supported for dimensions 1-3");
    }
    return pts;
}

FirstOrderSearchResult search_first_order(const ControlSystem& sys, const Reference& ref,
                                          int sense, const FirstOrderSearchGrid& grid,
                                          double tol) {
    auto [defect, when] = admissibility_defect(sys, ref);
    if (defect > 1e-6 && !ref.admissibility_waived)
        throw PreconditionError("reference not admissible: drift defect " +
                                std::to_string(defect) + " at t=" + std::to_string(when));

    const std::vector<Vec> candidates = unit_sphere_grid(sys.state_dim, grid.angular_samples);
    const std::vector<Mat> phis = propagate_adjoint_transition(sys, ref);

    std::vector<Vec> velocities(ref.traj.times.size());
    for (std::size_t i = 0; i < velocities.size(); ++i) velocities[i] = reference_velocity(ref, i);

    CheckConfig check_cfg;
    check_cfg.max_cfg = grid.max_cfg;
    check_cfg.time_stride = grid.time_stride
                                ? grid.time_stride
                                : std::max<std::size_t>(1, ref.traj.times.size() / 256);

    std::vector<double> violations(candidates.size(), 0.0);
    auto evaluate_range = [&](std::size_t begin, std::size_t end) {
        std::vector<Vec> psi_series(ref.traj.times.size());
        for (std::size_t c = begin; c < end; ++c) {
            for (std::size_t i = 0; i < phis.size(); ++i)
                psi_series[i] = vecmat(candidates[c], phis[i]);
            CertificateReport rep =
                evaluate_candidate(sys, ref, psi_series, sense, tol, check_cfg, velocities);
            violations[c] = rep.violation;
        }
    };

    const int workers = std::max(1, grid.workers);
    if (workers == 1 || candidates.size() < 64) {
        evaluate_range(0, candidates.size());
    } else {
        std::vector<std::thread> pool;
        const std::size_t chunk = (candidates.size() + workers - 1) / workers;
        for (int w = 0; w < workers; ++w) {
            const std::size_t b = std::min(candidates.size(), w * chunk);
            const std::size_t e = std::min(candidates.size(), b + chunk);
            if (b < e) pool.emplace_back(evaluate_range, b, e);
        }
        for (auto& th : pool) th.join();
    }

    std::size_t best = 0;
    for (std::size_t c = 1; c < candidates.size(); ++c) {
        if (violations[c] < violations[best] ||
            (violations[c] == violations[best] && lex_less(candidates[c], candidates[best])))
            best = c;
    }

    double modulus = 0.0;
    for (std::size_t c = 1; c < candidates.size(); ++c)
        modulus = std::max(modulus, std::abs(violations[c] - violations[c - 1]));

    FirstOrderSearchResult out;
    out.min_violation = violations[best];
    out.argmin = FirstOrderCandidate{candidates[best], sense};
    out.grid_modulus = modulus;
    {
        std::vector<Vec> psi_series(ref.traj.times.size());
        for (std::size_t i = 0; i < phis.size(); ++i)
            psi_series[i] = vecmat(candidates[best], phis[i]);
        out.report =
            evaluate_candidate(sys, ref, psi_series, sense, tol, check_cfg, velocities);
        out.report.admissibility_defect = defect;
        out.report.worst_admissibility_time = when;
    }
    return out;
}

}  // namespace optcert
