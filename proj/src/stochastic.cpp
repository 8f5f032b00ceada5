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

#include "optcert/stochastic.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

namespace optcert {

void StochasticHybridSystem::validate() const {
    if (state_dim < 1) throw ConfigError("state_dim must be >= 1");
    if (modes.empty()) throw ConfigError("at least one mode is required");
    if (control_sets.size() != modes.size())
        throw ConfigError("one control set per mode is required");
    for (const auto& m : modes)
        if (!m.f || !m.sigma) throw ConfigError("mode drift/diffusion missing");
    for (const auto& e : threshold_edges) {
        if (e.from < 0 || e.from >= static_cast<int>(modes.size()) || e.to < 0 ||
            e.to >= static_cast<int>(modes.size()))
            throw ConfigError("threshold edge mode out of range");
        if (!e.guard) throw ConfigError("threshold edge guard missing");
    }
}

void EnsembleConfig::validate() const {
    if (n_paths < 1) throw ConfigError("n_paths must be >= 1");
    if (!(dt > 0.0)) throw ConfigError("dt must be positive");
}

namespace {

bool threshold_crossed(GuardDirection dir, double h_prev, double h_next) {
    switch (dir) {
        case GuardDirection::Down:
            return h_prev > 0.0 && h_next <= 0.0;
        case GuardDirection::Up:
            return h_prev < 0.0 && h_next >= 0.0;
        case GuardDirection::Any:
            return (h_prev > 0.0 && h_next <= 0.0) || (h_prev < 0.0 && h_next >= 0.0);
    }
    return false;
}

struct PathVisitor {
    // Called at every grid node with the pre-step control; `last` marks tb.
    std::function<void(std::size_t k, double t, const Vec& x, int q, const Vec& u, bool last)>
        node;
    std::function<void(const TrajectoryEvent&)> event;
};

/// Euler-Maruyama walk of one path; returns false when the state went
/// non-finite (the visitor stops receiving nodes at that point).
bool walk_path(const StochasticHybridSystem& sys, const StochasticControl& control,
               const Vec& x0, int q0, double ta, double tb, double dt, const CounterRng& rng,
               std::uint64_t path_index, const PathVisitor& visitor) {
    const double span = tb - ta;
    std::size_t n_steps = static_cast<std::size_t>(std::ceil(span / dt - 1e-12));
    if (n_steps == 0) n_steps = 1;

    Vec x = x0;
    int q = q0;
    for (std::size_t k = 0; k < n_steps; ++k) {
        const double t = ta + static_cast<double>(k) * dt;
        const double t_next = (k + 1 == n_steps) ? tb : ta + static_cast<double>(k + 1) * dt;
        const double h = t_next - t;
        const Vec u = control(t, x, q);
        if (visitor.node) visitor.node(k, t, x, q, u, false);

        Vec drift = sys.modes[q].f(t, x, u);
        Mat sig = sys.modes[q].sigma(t, x, u);
        Vec x_next = x;
        axpy(h, drift, x_next);
        const double sqrt_h = std::sqrt(h);
        for (std::size_t j = 0; j < sys.noise_dim; ++j) {
            const double dw = sqrt_h * rng.normal(path_index, k, static_cast<std::uint32_t>(j));
            for (std::size_t i = 0; i < sys.state_dim; ++i) x_next[i] += sig(i, j) * dw;
        }
        if (!all_finite(x_next)) return false;

        // Threshold switching with a linear-interpolation snap of the time.
        for (std::size_t e = 0; e < sys.threshold_edges.size(); ++e) {
            const ThresholdEdge& edge = sys.threshold_edges[e];
            if (edge.from != q) continue;
            const double g_prev = edge.guard(x);
            const double g_next = edge.guard(x_next);
            if (!threshold_crossed(edge.direction, g_prev, g_next)) continue;
            const double denom = g_prev - g_next;
            const double theta = std::abs(denom) < 1e-300 ? 1.0 : g_prev / denom;
            TrajectoryEvent ev;
            ev.time = t + std::clamp(theta, 0.0, 1.0) * h;
            ev.kind = EventKind::ModeSwitch;
            ev.mode_from = edge.from;
            ev.mode_to = edge.to;
            ev.edge = static_cast<int>(e);
            ev.state_before = x_next;
            x_next = edge.reset ? edge.reset(x_next) : x_next;
            ev.state_after = x_next;
            if (visitor.event) visitor.event(ev);
            q = edge.to;
            break;
        }
        // Intensity switching by Bernoulli thinning.
        if (sys.intensity) {
            for (int j = 0; j < static_cast<int>(sys.modes.size()); ++j) {
                if (j == q) continue;
                const double lam = sys.intensity(q, j, t, x, u);
                if (lam <= 0.0) continue;
                const double p = std::min(1.0, lam * h);
                const double draw = rng.uniform(
                    path_index, k, static_cast<std::uint32_t>(sys.noise_dim + j));
                if (draw < p) {
                    TrajectoryEvent ev;
                    ev.time = t_next;
                    ev.kind = EventKind::ModeSwitch;
                    ev.mode_from = q;
                    ev.mode_to = j;
                    ev.state_before = x_next;
                    ev.state_after = x_next;
                    if (visitor.event) visitor.event(ev);
                    q = j;
                    break;
                }
            }
        }
        x = x_next;
    }
    if (visitor.node) visitor.node(n_steps, tb, x, q, control(tb, x, q), true);
    return true;
}

void run_paths_parallel(std::size_t n_paths, int workers,
                        const std::function<void(std::size_t)>& body) {
    if (workers <= 1 || n_paths < 2) {
        for (std::size_t i = 0; i < n_paths; ++i) body(i);
        return;
    }
    std::vector<std::thread> pool;
    const std::size_t chunk = (n_paths + workers - 1) / static_cast<std::size_t>(workers);
    for (int w = 0; w < workers; ++w) {
        const std::size_t b = std::min(n_paths, static_cast<std::size_t>(w) * chunk);
        const std::size_t e = std::min(n_paths, b + chunk);
        if (b < e)
            pool.emplace_back([&, b, e] {
                for (std::size_t i = b; i < e; ++i) body(i);
            });
    }
    for (auto& th : pool) th.join();
}

}  // namespace

PathEnsemble simulate_paths(const StochasticHybridSystem& sys, const StochasticControl& control,
                            const Vec& x0, int q0, double ta, double tb,
                            const EnsembleConfig& cfg) {
    sys.validate();
    cfg.validate();
    if (q0 < 0 || q0 >= static_cast<int>(sys.modes.size()))
        throw ConfigError("initial mode out of range");

    PathEnsemble ens;
    ens.seed = cfg.seed;
    ens.n_paths = cfg.n_paths;
    ens.dt = cfg.dt;
    ens.paths.resize(cfg.n_paths);

    const CounterRng rng(cfg.seed);
    run_paths_parallel(cfg.n_paths, cfg.workers, [&](std::size_t i) {
        PathSim& p = ens.paths[i];
        PathVisitor visitor;
        visitor.node = [&](std::size_t, double t, const Vec& x, int q, const Vec& u, bool) {
            p.times.push_back(t);
            p.states.push_back(x);
            p.modes.push_back(q);
            p.controls.push_back(u);
        };
        visitor.event = [&](const TrajectoryEvent& ev) { p.events.push_back(ev); };
        p.diverged = !walk_path(sys, control, x0, q0, ta, tb, cfg.dt, rng, i, visitor);
    });
    for (const auto& p : ens.paths)
        if (p.diverged) ++ens.n_diverged;
    return ens;
}

double stochastic_hamiltonian(const StochasticHybridSystem& sys, std::size_t mode, double t,
                              const Vec& x, const Vec& psi, const Mat& psi_matrix, const Vec& u) {
    if (mode >= sys.modes.size()) throw ConfigError("mode index out of range");
    if (psi.size() != sys.state_dim || psi_matrix.rows() != sys.state_dim ||
        psi_matrix.cols() != sys.state_dim)
        throw ConfigError("adjoint dimension mismatch");
    if (sym_defect(psi_matrix) > 1e-12) throw InvariantError("second adjoint must be symmetric");
    const double drift_term = dot(psi, sys.modes[mode].f(t, x, u));
    Mat sig = sys.modes[mode].sigma(t, x, u);
    // 0.5 * tr(sigma' Psi sigma)
    double trace = 0.0;
    for (std::size_t j = 0; j < sig.cols(); ++j)
        for (std::size_t a = 0; a < sig.rows(); ++a)
            for (std::size_t b = 0; b < sig.rows(); ++b)
                trace += sig(a, j) * psi_matrix(a, b) * sig(b, j);
    return drift_term + 0.5 * trace;
}

double cost_probe_defect(const CostSpec& cost, const std::vector<Vec>& probes, double fd_step) {
    double worst = 0.0;
    for (const Vec& x : probes) {
        Vec grad = cost.terminal_grad(x);
        Mat hess = cost.terminal_hess(x);
        double gscale = 1.0 + norm_inf(grad);
        double hscale = 1.0;
        for (double v : hess.data()) hscale = std::max(hscale, 1.0 + std::abs(v));
        for (std::size_t j = 0; j < x.size(); ++j) {
            Vec xp = x, xm = x;
            xp[j] += fd_step;
            xm[j] -= fd_step;
            const double fd = (cost.terminal(xp) - cost.terminal(xm)) / (2.0 * fd_step);
            worst = std::max(worst, std::abs(fd - grad[j]) / gscale);
            Vec gp = cost.terminal_grad(xp);
            Vec gm = cost.terminal_grad(xm);
            for (std::size_t i = 0; i < x.size(); ++i) {
                const double fdh = (gp[i] - gm[i]) / (2.0 * fd_step);
                worst = std::max(worst, std::abs(fdh - hess(i, j)) / hscale);
            }
        }
    }
    return worst;
}

namespace {

struct PathCost {
    double value = 0.0;
    bool diverged = false;
};

PathCost path_cost(const StochasticHybridSystem& sys, const StochasticControl& control,
                   const Vec& x0, int q0, double ta, double tb, const CostSpec& cost,
                   const CounterRng& rng, double dt, std::size_t path_index) {
    PathCost out;
    double acc = 0.0;
    double prev_l = 0.0;
    double prev_t = ta;
    bool have_prev = false;
    Vec terminal_state;
    PathVisitor visitor;
    visitor.node = [&](std::size_t, double t, const Vec& x, int, const Vec& u, bool last) {
        const double l = cost.running ? cost.running(t, x, u) : 0.0;
        if (have_prev) acc += 0.5 * (prev_l + l) * (t - prev_t);
        prev_l = l;
        prev_t = t;
        have_prev = true;
        if (last) terminal_state = x;
    };
    out.diverged = !walk_path(sys, control, x0, q0, ta, tb, dt, rng, path_index, visitor);
    if (!out.diverged) out.value = acc + (cost.terminal ? cost.terminal(terminal_state) : 0.0);
    return out;
}

MonteCarloResult reduce_costs(const std::vector<PathCost>& costs) {
    MonteCarloResult res;
    double sum = 0.0;
    for (const auto& c : costs) {
        if (c.diverged) {
            ++res.n_diverged;
            continue;
        }
        sum += c.value;
        ++res.n_used;
    }
    if (res.n_used == 0) throw DomainError("all paths diverged; no cost estimate");
    res.estimate = sum / static_cast<double>(res.n_used);
    double ss = 0.0;
    for (const auto& c : costs) {
        if (c.diverged) continue;
        const double d = c.value - res.estimate;
        ss += d * d;
    }
    if (res.n_used > 1)
        res.std_error = std::sqrt(ss / static_cast<double>(res.n_used - 1)) /
                        std::sqrt(static_cast<double>(res.n_used));
    return res;
}

}  // namespace

MonteCarloResult monte_carlo_cost(const StochasticHybridSystem& sys,
                                  const StochasticControl& control, const Vec& x0, int q0,
                                  double ta, double tb, const CostSpec& cost,
                                  const EnsembleConfig& cfg) {
    sys.validate();
    cfg.validate();
    if (cfg.n_paths < 2) throw ConfigError("monte_carlo_cost needs n_paths >= 2");
    const CounterRng rng(cfg.seed);
    std::vector<PathCost> costs(cfg.n_paths);
    run_paths_parallel(cfg.n_paths, cfg.workers, [&](std::size_t i) {
        costs[i] = path_cost(sys, control, x0, q0, ta, tb, cost, rng, cfg.dt, i);
    });
    return reduce_costs(costs);
}

std::vector<VariationRow> variation_cost_test(const StochasticHybridSystem& sys,
                                              const StochasticControl& base,
                                              const ControlSignal& delta_u,
                                              const std::vector<double>& epsilons, const Vec& x0,
                                              int q0, double ta, double tb, const CostSpec& cost,
                                              const EnsembleConfig& cfg) {
    sys.validate();
    cfg.validate();
    if (cfg.n_paths < 2) throw ConfigError("variation_cost_test needs n_paths >= 2");
    const CounterRng rng(cfg.seed);

    std::vector<PathCost> base_costs(cfg.n_paths);
    run_paths_parallel(cfg.n_paths, cfg.workers, [&](std::size_t i) {
        base_costs[i] = path_cost(sys, base, x0, q0, ta, tb, cost, rng, cfg.dt, i);
    });

    std::vector<VariationRow> rows;
    rows.reserve(epsilons.size());
    for (double eps : epsilons) {
        StochasticControl varied = [&, eps](double t, const Vec& x, int q) {
            Vec u = base(t, x, q);
            const Vec d = delta_u(t);
            for (std::size_t i = 0; i < u.size(); ++i)
                u[i] = std::max(0.0, u[i] + eps * d[i]);
            return u;
        };
        std::vector<PathCost> var_costs(cfg.n_paths);
        run_paths_parallel(cfg.n_paths, cfg.workers, [&](std::size_t i) {
            var_costs[i] = path_cost(sys, varied, x0, q0, ta, tb, cost, rng, cfg.dt, i);
        });
        std::vector<double> diffs;
        diffs.reserve(cfg.n_paths);
        for (std::size_t i = 0; i < cfg.n_paths; ++i)
            if (!base_costs[i].diverged && !var_costs[i].diverged)
                diffs.push_back(var_costs[i].value - base_costs[i].value);
        if (diffs.empty()) throw DomainError("all paired paths diverged");
        VariationRow row;
        row.epsilon = eps;
        double sum = 0.0;
        for (double d : diffs) sum += d;
        row.delta_j = sum / static_cast<double>(diffs.size());
        double ss = 0.0;
        for (double d : diffs) ss += (d - row.delta_j) * (d - row.delta_j);
        if (diffs.size() > 1)
            row.std_error = std::sqrt(ss / static_cast<double>(diffs.size() - 1)) /
                            std::sqrt(static_cast<double>(diffs.size()));
        rows.push_back(row);
    }
    return rows;
}

// ============================================================================
// Reduced adjoints
// ============================================================================

namespace {

double interp_scalar(const std::vector<double>& times, const std::vector<double>& values,
                     double t) {
    if (times.empty()) throw ConfigError("empty candidate grid");
    if (t <= times.front()) return values.front();
    if (t >= times.back()) return values.back();
    auto it = std::upper_bound(times.begin(), times.end(), t);
    const std::size_t hi = static_cast<std::size_t>(it - times.begin());
    const std::size_t lo = hi - 1;
    const double w = (t - times[lo]) / (times[hi] - times[lo]);
    return (1.0 - w) * values[lo] + w * values[hi];
}

}  // namespace

void StochasticCandidate::rebuild_scalar_cache() {
    psi_scalar_series.resize(psi.size());
    for (std::size_t i = 0; i < psi.size(); ++i) psi_scalar_series[i] = psi[i][0];
    psi_matrix_scalar_series.resize(psi_matrix.size());
    for (std::size_t i = 0; i < psi_matrix.size(); ++i)
        psi_matrix_scalar_series[i] = psi_matrix[i](0, 0);
}

double StochasticCandidate::psi_at(double t) const {
    if (psi_scalar_series.size() != psi.size()) {
        std::vector<double> v(psi.size());
        for (std::size_t i = 0; i < psi.size(); ++i) v[i] = psi[i][0];
        return interp_scalar(times, v, t);
    }
    return interp_scalar(times, psi_scalar_series, t);
}

double StochasticCandidate::psi_matrix_at(double t) const {
    if (psi_matrix_scalar_series.size() != psi_matrix.size()) {
        std::vector<double> v(psi_matrix.size());
        for (std::size_t i = 0; i < psi_matrix.size(); ++i) v[i] = psi_matrix[i](0, 0);
        return interp_scalar(times, v, t);
    }
    return interp_scalar(times, psi_matrix_scalar_series, t);
}

StochasticCandidate reduced_adjoint_propagate(const StochasticHybridSystem& sys,
                                              const ReducedAdjointConfig& cfg,
                                              const CostSpec& cost) {
    sys.validate();
    if (cfg.request_martingale)
        throw CapabilityError("nonzero martingale integrands are outside the supported "
                              "Gamma = Theta = 0 reduction");
    if (sys.state_dim != 1)
        throw CapabilityError("the reduced adjoint propagation supports scalar states only");
    if (cfg.nominal_mode < 0 || cfg.nominal_mode >= static_cast<int>(sys.modes.size()))
        throw ConfigError("nominal mode out of range");

    const StochasticMode& md = sys.modes[cfg.nominal_mode];
    const ControlSetSpec& set = sys.control_sets[cfg.nominal_mode];
    Vec u_probe;
    switch (set.kind) {
        case ControlSetSpec::Kind::Interval:
            u_probe = {set.lo};
            break;
        case ControlSetSpec::Kind::FiniteSet:
            u_probe = set.points.front();
            break;
        case ControlSetSpec::Kind::Box:
            u_probe = set.lo_vec;
            break;
        case ControlSetSpec::Kind::Sphere:
            u_probe = {set.radius, 0.0};
            break;
    }

    // Drift slope and diffusion slope at the linearization point.
    const double hx = 1e-6 * (1.0 + std::abs(cfg.x_nominal));
    const Vec xp{cfg.x_nominal + hx}, xm{cfg.x_nominal - hx};
    const double fx =
        (md.f(sys.t_start, xp, u_probe)[0] - md.f(sys.t_start, xm, u_probe)[0]) / (2.0 * hx);
    const double alpha = -fx;
    const double sx =
        (md.sigma(sys.t_start, xp, u_probe)(0, 0) - md.sigma(sys.t_start, xm, u_probe)(0, 0)) /
        (2.0 * hx);
    const double s2 = sx * sx;

    const double span = sys.t_end - sys.t_start;
    std::size_t n = static_cast<std::size_t>(std::ceil(span / cfg.dt - 1e-12));
    if (n == 0) n = 1;

    StochasticCandidate cand;
    cand.times.resize(n + 1);
    for (std::size_t i = 0; i < n; ++i)
        cand.times[i] = sys.t_start + static_cast<double>(i) * span / static_cast<double>(n);
    cand.times[n] = sys.t_end;
    cand.psi.assign(n + 1, Vec{0.0});
    cand.psi_matrix.assign(n + 1, Mat(1, 1));
    cand.nominal_terminal = {cfg.terminal_state};

    // Backward integration of the stacked [Psi, psi] reduction.
    auto rhs = [&](double t, const Vec& z) {
        const double big_psi = z[0];
        const double psi = z[1];
        const double x_bar = cfg.nominal_path ? cfg.nominal_path(t) : cfg.x_nominal;
        return Vec{-s2 * big_psi, alpha * psi - big_psi * s2 * x_bar};
    };
    Vec z{cost.terminal_hess(cand.nominal_terminal)(0, 0),
          cost.terminal_grad(cand.nominal_terminal)[0]};
    cand.psi_matrix[n](0, 0) = z[0];
    cand.psi[n][0] = z[1];
    for (std::size_t i = n; i-- > 0;) {
        const double h = cand.times[i + 1] - cand.times[i];
        z = rk4_step(rhs, cand.times[i + 1], z, -h);
        if (!all_finite(z)) throw IntegrationError("reduced adjoint blow-up", cand.times[i]);
        cand.psi_matrix[i](0, 0) = z[0];
        cand.psi[i][0] = z[1];
    }
    cand.rebuild_scalar_cache();
    return cand;
}

FeedbackResult feedback_control_law(double alpha, double lambda_weight, double psi_value,
                                    double lo, double hi) {
    if (!(lambda_weight > 0.0)) throw ConfigError("lambda_weight must be positive");
    const double interior = -alpha * psi_value / (2.0 * lambda_weight);
    FeedbackResult out;
    out.value = std::clamp(interior, lo, hi);
    out.clamped = interior < lo || interior > hi;
    return out;
}

// ============================================================================
// Candidate check
// ============================================================================

StochasticReport check_stochastic_candidate(const StochasticHybridSystem& sys,
                                            const PathEnsemble& ensemble,
                                            const StochasticControl& control,
                                            const StochasticCandidate& cand, const CostSpec& cost,
                                            double tol) {
    (void)control;
    sys.validate();
    if (ensemble.paths.empty()) throw ConfigError("empty ensemble");
    if (cand.times.empty()) throw ConfigError("empty candidate");

    StochasticReport rep;
    rep.tolerance = tol;

    double magnitude = 0.0;
    for (const Vec& p : cand.psi) magnitude = std::max(magnitude, norm_inf(p));
    for (const Mat& m : cand.psi_matrix) magnitude = std::max(magnitude, frob_norm(m));
    rep.nontriviality_slack = std::max(0.0, 1.0 - magnitude);

    // Terminal residuals against the candidate's own nominal terminal state.
    Vec nominal = cand.nominal_terminal;
    if (nominal.empty()) {
        nominal.assign(sys.state_dim, 0.0);
        std::size_t used = 0;
        for (const auto& p : ensemble.paths) {
            if (p.diverged || p.states.empty()) continue;
            axpy(1.0, p.states.back(), nominal);
            ++used;
        }
        if (used == 0) throw DomainError("all ensemble paths diverged");
        nominal = scaled(nominal, 1.0 / static_cast<double>(used));
    }
    rep.terminal_psi_residual = norm_inf(sub(cand.psi.back(), cost.terminal_grad(nominal)));
    {
        Mat gap = cand.psi_matrix.back() - cost.terminal_hess(nominal);
        double worst = 0.0;
        for (double v : gap.data()) worst = std::max(worst, std::abs(v));
        rep.terminal_psi_matrix_residual = worst;
    }

    // Ensemble-averaged stationarity defect per grid node. The conditional
    // expectation of the maximum condition reduces pathwise under the
    // Gamma = Theta = 0 regime.
    const PathSim* grid_path = nullptr;
    for (const auto& p : ensemble.paths)
        if (!p.diverged) {
            grid_path = &p;
            break;
        }
    if (!grid_path) throw DomainError("all ensemble paths diverged");
    const std::size_t n_nodes = grid_path->times.size();
    rep.gap_times = grid_path->times;
    rep.gap_series.assign(n_nodes, 0.0);

    for (std::size_t k = 0; k < n_nodes; ++k) {
        const double t = grid_path->times[k];
        const double psi_t = cand.psi_at(t);
        const double big_psi_t = cand.psi_matrix_at(t);
        Vec psi_vec{psi_t};
        Mat big_psi(1, 1);
        big_psi(0, 0) = big_psi_t;

        double acc = 0.0;
        std::size_t used = 0;
        for (const auto& p : ensemble.paths) {
            if (p.diverged || k >= p.times.size()) continue;
            const Vec& x = p.states[k];
            const int q = p.modes[k];
            const Vec& u = p.controls[k];
            double defect_sq = 0.0;
            for (std::size_t j = 0; j < u.size(); ++j) {
                const double hu = 1e-4 * (1.0 + std::abs(u[j]));
                Vec up = u, um = u;
                up[j] += hu;
                um[j] -= hu;
                const double hp = stochastic_hamiltonian(sys, q, t, x, psi_vec, big_psi, up) +
                                  (cost.running ? cost.running(t, x, up) : 0.0);
                const double hm = stochastic_hamiltonian(sys, q, t, x, psi_vec, big_psi, um) +
                                  (cost.running ? cost.running(t, x, um) : 0.0);
                const double d = (hp - hm) / (2.0 * hu);
                defect_sq += d * d;
            }
            acc += std::sqrt(defect_sq);
            ++used;
        }
        rep.gap_series[k] = used ? acc / static_cast<double>(used) : 0.0;
        rep.max_gap = std::max(rep.max_gap, rep.gap_series[k]);
    }

    // Jump residuals with the supplied gamma (identity resets).
    for (const auto& p : ensemble.paths) {
        if (p.diverged) continue;
        for (const auto& ev : p.events) {
            const double g =
                cand.gamma ? cand.gamma(static_cast<std::size_t>(ev.edge), ev.time) : 0.0;
            const double before = cand.psi_at(ev.time);
            const double after = cand.psi_at(ev.time);
            double grad = 1.0;
            if (ev.edge >= 0 && ev.edge < static_cast<int>(sys.threshold_edges.size()) &&
                sys.threshold_edges[ev.edge].grad_guard)
                grad = sys.threshold_edges[ev.edge].grad_guard(ev.state_before)[0];
            rep.jump_residuals.push_back(std::abs(before - (after + g * grad)));
        }
    }

    double worst = std::max({rep.terminal_psi_residual, rep.terminal_psi_matrix_residual,
                             rep.max_gap});
    for (double jr : rep.jump_residuals) worst = std::max(worst, jr);
    rep.violation = magnitude <= 1e-300 ? std::max(1.0, worst) : worst;
    rep.accept = rep.violation <= tol && magnitude > 1e-300;
    return rep;
}

}  // namespace optcert
