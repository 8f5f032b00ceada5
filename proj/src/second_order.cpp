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

#include "optcert/second_order.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

namespace optcert {

void RiccatiMatrix::validate() const {
    if (times.size() != q.size()) throw ConfigError("RiccatiMatrix shape mismatch");
    for (const Mat& m : q)
        if (sym_defect(m) > 1e-12)
            throw InvariantError("RiccatiMatrix entry is not symmetric");
}

VariationPair propagate_variation(const ControlSystem& sys, const Reference& ref,
                                  const MeasureVariation& dmu, const MeasureVariation& d2mu,
                                  const SimConfig& cfg) {
    (void)cfg;
    ref.traj.validate();
    const std::size_t n = sys.state_dim;
    const ModeDynamics& md = sys.mode(ref.mode);

    auto forcing1 = [&](double t, const Vec& x) {
        Vec acc(n, 0.0);
        if (const auto* atoms = dmu.atoms_at(t))
            for (const auto& a : *atoms) axpy(a.weight, md.f(t, x, a.point), acc);
        return acc;
    };
    auto forcing2 = [&](double t, const Vec& x) {
        Vec acc(n, 0.0);
        if (const auto* atoms = d2mu.atoms_at(t))
            for (const auto& a : *atoms) axpy(a.weight, md.f(t, x, a.point), acc);
        return acc;
    };
    auto cross = [&](double t, const Vec& x, const Vec& dx) {
        Vec acc(n, 0.0);
        if (const auto* atoms = dmu.atoms_at(t))
            for (const auto& a : *atoms)
                axpy(a.weight, matvec(md.f_x(t, x, a.point), dx), acc);
        return acc;
    };

    // Stacked state [delta_x ; delta2_x].
    auto rhs = [&](double t, const Vec& z) {
        const Vec x = ref.traj.state_at(t);
        Mat a = averaged_jacobian(sys, ref.mode, ref.mu, t, x);
        Vec dx(z.begin(), z.begin() + n);
        Vec d2x(z.begin() + n, z.end());
        Vec ddx = add(matvec(a, dx), forcing1(t, x));
        Vec dd2x = matvec(a, d2x);
        axpy(1.0, averaged_hessian_quadratic(sys, ref.mode, ref.mu, t, x, dx), dd2x);
        axpy(2.0, cross(t, x, dx), dd2x);
        axpy(1.0, forcing2(t, x), dd2x);
        Vec out(2 * n);
        std::copy(ddx.begin(), ddx.end(), out.begin());
        std::copy(dd2x.begin(), dd2x.end(), out.begin() + n);
        return out;
    };

    VariationPair out;
    out.times = ref.traj.times;
    out.delta_x.reserve(out.times.size());
    out.delta2_x.reserve(out.times.size());
    Vec z(2 * n, 0.0);
    out.delta_x.emplace_back(n, 0.0);
    out.delta2_x.emplace_back(n, 0.0);
    for (std::size_t i = 0; i + 1 < out.times.size(); ++i) {
        z = rk4_step(rhs, out.times[i], z, out.times[i + 1] - out.times[i]);
        if (!all_finite(z)) throw IntegrationError("variation blow-up", out.times[i + 1]);
        out.delta_x.emplace_back(z.begin(), z.begin() + n);
        out.delta2_x.emplace_back(z.begin() + n, z.end());
    }
    return out;
}

RiccatiResidual riccati_residual(const ControlSystem& sys, const Reference& ref,
                                 const RiccatiMatrix& q) {
    q.validate();
    if (q.times.size() != ref.traj.times.size())
        throw ConfigError("Riccati grid does not match the reference grid");
    const std::size_t m = q.times.size();
    RiccatiResidual out;
    out.sup_eigenvalues.reserve(m);
    out.sup = -std::numeric_limits<double>::infinity();

    for (std::size_t i = 0; i < m; ++i) {
        Mat qdot;
        if (i == 0)
            qdot = (1.0 / (q.times[1] - q.times[0])) * (q.q[1] - q.q[0]);
        else if (i + 1 == m)
            qdot = (1.0 / (q.times[m - 1] - q.times[m - 2])) * (q.q[m - 1] - q.q[m - 2]);
        else
            qdot = (1.0 / (q.times[i + 1] - q.times[i - 1])) * (q.q[i + 1] - q.q[i - 1]);

        Mat a = averaged_jacobian(sys, ref.mode, ref.mu, q.times[i], ref.traj.states[i]);
        Mat lhs = qdot + matmul(q.q[i], a) + matmul(a.transposed(), q.q[i]) +
                  averaged_hessian(sys, ref.mode, ref.mu, q.times[i], ref.traj.states[i]);
        Vec eig = jacobi_eigenvalues(symmetrize(lhs));
        out.sup_eigenvalues.push_back(eig.back());
        out.sup = std::max(out.sup, eig.back());
    }
    return out;
}

SecondOrderHamiltonianResult second_order_hamiltonian(const ControlSystem& sys, std::size_t mode,
                                                      double t, const Vec& x, const Vec& psi,
                                                      const Mat& q, const Vec& u, const Vec& dx,
                                                      const MaximizeConfig& cfg) {
    if (sym_defect(q) > 1e-12) throw InvariantError("Q must be symmetric");
    const ModeDynamics& md = sys.mode(mode);
    auto h2 = [&](const Vec& uu) {
        double v = dot(psi, md.f(t, x, uu));
        Mat fx = md.f_x(t, x, uu);
        Mat s = matmul(q, fx) + matmul(fx.transposed(), q);
        v += 0.5 * quad_form(s, dx);
        std::vector<Mat> hs = md.f_xx(t, x, uu);
        for (std::size_t k = 0; k < hs.size(); ++k) v += q(k, k) * quad_form(hs[k], dx);
        return v;
    };
    SecondOrderHamiltonianResult out;
    out.value = h2(u);
    out.max = maximize_over_control_set(sys.control_set(mode), h2, cfg);
    return out;
}

RiccatiMatrix candidate_q_trajectory(const SecondOrderCandidate& cand, const Reference& ref) {
    RiccatiMatrix qm;
    qm.times = ref.traj.times;
    qm.q.reserve(qm.times.size());
    const double t0 = qm.times.front();
    for (double t : qm.times) {
        Mat q = cand.q0;
        if (cand.q_slope) {
            Mat d = *cand.q_slope;
            d *= (t - t0);
            q += d;
        }
        qm.q.push_back(q);
    }
    qm.validate();
    return qm;
}

namespace {

// mu-average of the curvature part of H^2 (the terms quadratic in dx); the
// first-order part enters through <psi, xdot_hat> so the dx = 0 collapse
// reproduces the first-order gap exactly.
double mu_average_curvature(const ControlSystem& sys, const Reference& ref, double t,
                            const Vec& x, const Mat& q, const Vec& dx) {
    const ModeDynamics& md = sys.mode(ref.mode);
    const auto& piece = ref.mu.piece_at(t);
    double acc = 0.0;
    for (const auto& atom : piece.atoms) {
        Mat fx = md.f_x(t, x, atom.point);
        Mat s = matmul(q, fx) + matmul(fx.transposed(), q);
        double v = 0.5 * quad_form(s, dx);
        std::vector<Mat> hs = md.f_xx(t, x, atom.point);
        for (std::size_t k = 0; k < hs.size(); ++k) v += q(k, k) * quad_form(hs[k], dx);
        acc += atom.weight * v;
    }
    return acc;
}

Vec reference_velocity_fd(const Reference& ref, std::size_t i) {
    if (ref.velocity) return ref.velocity(ref.traj.times[i]);
    const auto& t = ref.traj.times;
    const auto& x = ref.traj.states;
    if (i == 0) return scaled(sub(x[1], x[0]), 1.0 / (t[1] - t[0]));
    if (i + 1 == t.size()) return scaled(sub(x[i], x[i - 1]), 1.0 / (t[i] - t[i - 1]));
    return scaled(sub(x[i + 1], x[i - 1]), 1.0 / (t[i + 1] - t[i - 1]));
}

struct SecondOrderWork {
    std::vector<Mat> phis;              // adjoint transition matrices
    std::vector<Vec> velocities;
    std::vector<VariationPair> variations;  // one per candidate variation family
};

SecondOrderReport evaluate_second_order(const ControlSystem& sys, const Reference& ref,
                                        const SecondOrderCandidate& cand,
                                        const std::vector<Vec>& psi_series,
                                        const VariationPair& var, double tol,
                                        const CheckConfig& cfg,
                                        const std::vector<Vec>& velocities) {
    const auto& t = ref.traj.times;
    const std::size_t stride = std::max<std::size_t>(1, cfg.time_stride);
    SecondOrderReport rep;
    rep.tolerance = tol;

    RiccatiMatrix qm = candidate_q_trajectory(cand, ref);

    double sup_psi = 0.0, sup_q = 0.0;
    for (const Vec& p : psi_series) sup_psi = std::max(sup_psi, norm2(p));
    for (const Mat& m : qm.q) sup_q = std::max(sup_q, frob_norm(m));

    // First-order residuals.
    for (std::size_t i = stride; i + stride < t.size(); i += stride) {
        const double h2 = t[i + stride] - t[i - stride];
        Vec dpsi = scaled(sub(psi_series[i + stride], psi_series[i - stride]), 1.0 / h2);
        Mat a = averaged_jacobian(sys, ref.mode, ref.mu, t[i], ref.traj.states[i]);
        rep.adjoint_residual =
            std::max(rep.adjoint_residual, norm_inf(add(dpsi, vecmat(psi_series[i], a))));
    }
    double terminal_m = 0.0;
    for (std::size_t i = 0; i < t.size(); i += stride) {
        MaxResult m =
            hamiltonian_max(sys, ref.mode, t[i], ref.traj.states[i], psi_series[i], cfg.max_cfg);
        rep.max_gap = std::max(rep.max_gap, std::abs(dot(psi_series[i], velocities[i]) - m.value));
    }
    {
        const std::size_t last = t.size() - 1;
        MaxResult m = hamiltonian_max(sys, ref.mode, t[last], ref.traj.states[last],
                                      psi_series[last], cfg.max_cfg);
        terminal_m = m.value;
        rep.max_gap = std::max(rep.max_gap,
                               std::abs(dot(psi_series[last], velocities[last]) - m.value));
    }
    rep.transversality_excess = std::max(0.0, -static_cast<double>(cand.sense) * terminal_m);

    // Riccati differential inequality.
    RiccatiResidual rr = riccati_residual(sys, ref, qm);
    rep.riccati_excess = std::max(0.0, rr.sup);

    // Scalar Psi accumulator: integrate the stated rate from psi_scalar0 and
    // report the central-difference self-defect of the stored trace.
    rep.psi_scalar_trace.assign(t.size(), cand.psi_scalar0);
    std::vector<double> rate(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) {
        Vec hq = averaged_hessian_quadratic(sys, ref.mode, ref.mu, t[i], ref.traj.states[i],
                                            var.delta_x[i]);
        double s = 0.0;
        for (double v : hq) s += v;
        rate[i] = s;
    }
    for (std::size_t i = 1; i < t.size(); ++i)
        rep.psi_scalar_trace[i] = rep.psi_scalar_trace[i - 1] +
                                  0.5 * (rate[i - 1] + rate[i]) * (t[i] - t[i - 1]);
    for (std::size_t i = 1; i + 1 < t.size(); ++i) {
        const double d =
            (rep.psi_scalar_trace[i + 1] - rep.psi_scalar_trace[i - 1]) / (t[i + 1] - t[i - 1]);
        rep.psi_scalar_defect = std::max(rep.psi_scalar_defect, std::abs(d - rate[i]));
    }
    double sup_psi_scalar = 0.0;
    for (double v : rep.psi_scalar_trace) sup_psi_scalar = std::max(sup_psi_scalar, std::abs(v));

    // Second-order maximum condition, mu-averaged against M^2.
    double terminal_m2 = 0.0;
    auto second_gap_at = [&](std::size_t i) {
        const ModeDynamics& md = sys.mode(ref.mode);
        const Vec& x = ref.traj.states[i];
        const Vec& dx = var.delta_x[i];
        const Mat& q = qm.q[i];
        auto h2 = [&](const Vec& uu) {
            double v = dot(psi_series[i], md.f(t[i], x, uu));
            Mat fx = md.f_x(t[i], x, uu);
            Mat s = matmul(q, fx) + matmul(fx.transposed(), q);
            v += 0.5 * quad_form(s, dx);
            std::vector<Mat> hs = md.f_xx(t[i], x, uu);
            for (std::size_t k = 0; k < hs.size(); ++k) v += q(k, k) * quad_form(hs[k], dx);
            return v;
        };
        MaxResult m2 = maximize_over_control_set(sys.control_set(ref.mode), h2, cfg.max_cfg);
        const double along = dot(psi_series[i], velocities[i]) +
                             mu_average_curvature(sys, ref, t[i], x, q, dx);
        return std::pair<double, double>(std::abs(along - m2.value), m2.value);
    };
    for (std::size_t i = 0; i < t.size(); i += stride)
        rep.second_max_gap = std::max(rep.second_max_gap, second_gap_at(i).first);
    {
        auto [gap, m2] = second_gap_at(t.size() - 1);
        rep.second_max_gap = std::max(rep.second_max_gap, gap);
        terminal_m2 = m2;
    }
    rep.second_transversality_excess =
        std::max(0.0, -static_cast<double>(cand.sense) * (terminal_m + 0.5 * terminal_m2));

    const double magnitude = std::max({sup_psi, sup_q, sup_psi_scalar});
    rep.nontriviality_slack = std::max(0.0, 1.0 - magnitude);
    const double worst =
        std::max({rep.adjoint_residual, rep.max_gap, rep.transversality_excess,
                  rep.riccati_excess, rep.second_max_gap, rep.psi_scalar_defect,
                  rep.second_transversality_excess});
    rep.violation = (magnitude <= 1e-300) ? std::max(1.0, worst) : worst;
    rep.accept = rep.violation <= tol && magnitude > 1e-300;
    return rep;
}

}  // namespace

SecondOrderReport check_second_order_candidate(const ControlSystem& sys, const Reference& ref,
                                               const SecondOrderCandidate& cand, double tol,
                                               const CheckConfig& cfg) {
    auto [defect, when] = admissibility_defect(sys, ref);
    if (defect > cfg.admissibility_tol && !ref.admissibility_waived)
        throw PreconditionError("reference not admissible: drift defect " +
                                std::to_string(defect) + " at t=" + std::to_string(when));

    SimConfig sim;
    AdjointState adj = propagate_adjoint(sys, ref, cand.psi0, sim);
    VariationPair var = propagate_variation(sys, ref, cand.variation, cand.variation2, sim);

    std::vector<Vec> velocities(ref.traj.times.size());
    for (std::size_t i = 0; i < velocities.size(); ++i)
        velocities[i] = reference_velocity_fd(ref, i);

    SecondOrderReport rep =
        evaluate_second_order(sys, ref, cand, adj.psi, var, tol, cfg, velocities);
    rep.admissibility_defect = defect;
    rep.worst_admissibility_time = when;
    return rep;
}

SecondOrderSearchResult search_second_order(const ControlSystem& sys, const Reference& ref,
                                            int sense, const SecondOrderSearchGrid& grid,
                                            double tol) {
    auto [defect, when] = admissibility_defect(sys, ref);
    if (defect > 1e-6 && !ref.admissibility_waived)
        throw PreconditionError("reference not admissible: drift defect " +
                                std::to_string(defect) + " at t=" + std::to_string(when));

    const std::size_t n = sys.state_dim;
    const std::vector<Vec> psi_grid = unit_sphere_grid(n, grid.angular_samples);
    const std::vector<Mat> phis = propagate_adjoint_transition(sys, ref);

    std::vector<MeasureVariation> variations = grid.variations;
    if (variations.empty()) variations.push_back(MeasureVariation{});

    SimConfig sim;
    std::vector<VariationPair> var_pairs;
    var_pairs.reserve(variations.size());
    for (const auto& v : variations)
        var_pairs.push_back(propagate_variation(sys, ref, v, MeasureVariation{}, sim));

    // Diagonal Q0 combinations over the eigenvalue grid.
    std::vector<Vec> diags;
    {
        std::size_t total = 1;
        for (std::size_t i = 0; i < n; ++i) total *= grid.q_eigenvalues.size();
        diags.reserve(total);
        for (std::size_t flat = 0; flat < total; ++flat) {
            Vec d(n);
            std::size_t rem = flat;
            for (std::size_t i = 0; i < n; ++i) {
                d[i] = grid.q_eigenvalues[rem % grid.q_eigenvalues.size()];
                rem /= grid.q_eigenvalues.size();
            }
            diags.push_back(std::move(d));
        }
    }

    std::vector<Vec> velocities(ref.traj.times.size());
    for (std::size_t i = 0; i < velocities.size(); ++i)
        velocities[i] = reference_velocity_fd(ref, i);

    CheckConfig cfg;
    cfg.max_cfg = grid.max_cfg;
    cfg.time_stride =
        grid.time_stride ? grid.time_stride : std::max<std::size_t>(1, ref.traj.times.size() / 64);

    struct Entry {
        std::size_t psi_idx, diag_idx, var_idx;
    };
    std::vector<Entry> entries;
    entries.reserve(psi_grid.size() * diags.size() * variations.size());
    for (std::size_t p = 0; p < psi_grid.size(); ++p)
        for (std::size_t d = 0; d < diags.size(); ++d)
            for (std::size_t v = 0; v < variations.size(); ++v) entries.push_back({p, d, v});

    std::vector<double> violations(entries.size(), 0.0);
    auto evaluate_range = [&](std::size_t begin, std::size_t end) {
        std::vector<Vec> psi_series(ref.traj.times.size());
        for (std::size_t e = begin; e < end; ++e) {
            const Entry& en = entries[e];
            for (std::size_t i = 0; i < phis.size(); ++i)
                psi_series[i] = vecmat(psi_grid[en.psi_idx], phis[i]);
            SecondOrderCandidate cand;
            cand.psi0 = psi_grid[en.psi_idx];
            cand.q0 = Mat::diag(diags[en.diag_idx]);
            cand.psi_scalar0 = 0.0;
            cand.variation = variations[en.var_idx];
            cand.sense = sense;
            SecondOrderReport rep = evaluate_second_order(
                sys, ref, cand, psi_series, var_pairs[en.var_idx], tol, cfg, velocities);
            violations[e] = rep.violation;
        }
    };

    const int workers = std::max(1, grid.workers);
    if (workers == 1 || entries.size() < 64) {
        evaluate_range(0, entries.size());
    } else {
        std::vector<std::thread> pool;
        const std::size_t chunk = (entries.size() + workers - 1) / workers;
        for (int w = 0; w < workers; ++w) {
            const std::size_t b = std::min(entries.size(), w * chunk);
            const std::size_t e = std::min(entries.size(), b + chunk);
            if (b < e) pool.emplace_back(evaluate_range, b, e);
        }
        for (auto& th : pool) th.join();
    }

    std::size_t best = 0;
    auto entry_less = [&](std::size_t a, std::size_t b) {
        if (violations[a] != violations[b]) return violations[a] < violations[b];
        const Entry &ea = entries[a], &eb = entries[b];
        if (ea.psi_idx != eb.psi_idx)
            return lex_less(psi_grid[ea.psi_idx], psi_grid[eb.psi_idx]);
        if (ea.diag_idx != eb.diag_idx) return lex_less(diags[ea.diag_idx], diags[eb.diag_idx]);
        return ea.var_idx < eb.var_idx;
    };
    for (std::size_t e = 1; e < entries.size(); ++e)
        if (entry_less(e, best)) best = e;

    SecondOrderSearchResult out;
    out.min_violation = violations[best];
    out.argmin.psi0 = psi_grid[entries[best].psi_idx];
    out.argmin.q0 = Mat::diag(diags[entries[best].diag_idx]);
    out.argmin.psi_scalar0 = 0.0;
    out.argmin.variation = variations[entries[best].var_idx];
    out.argmin.sense = sense;
    {
        std::vector<Vec> psi_series(ref.traj.times.size());
        for (std::size_t i = 0; i < phis.size(); ++i)
            psi_series[i] = vecmat(out.argmin.psi0, phis[i]);
        out.report = evaluate_second_order(sys, ref, out.argmin, psi_series,
                                           var_pairs[entries[best].var_idx], tol, cfg, velocities);
        out.report.admissibility_defect = defect;
        out.report.worst_admissibility_time = when;
    }
    return out;
}

}  // namespace optcert
