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

#include "optcert/nonsmooth.hpp"

#include <algorithm>
#include <cmath>

namespace optcert {

double surface_probe_defect(const DiscontinuitySurface& surface, const std::vector<Vec>& probes,
                            double fd_step) {
    double worst = 0.0;
    for (const Vec& x : probes) {
        Vec grad = surface.grad_g(x);
        double scale = 1.0 + norm_inf(grad);
        for (std::size_t j = 0; j < x.size(); ++j) {
            Vec xp = x, xm = x;
            xp[j] += fd_step;
            xm[j] -= fd_step;
            const double fd = (surface.g(xp) - surface.g(xm)) / (2.0 * fd_step);
            worst = std::max(worst, std::abs(fd - grad[j]) / scale);
        }
    }
    return worst;
}

void FilippovSystem::validate() const {
    base.validate();
    if (base.modes.size() != 2)
        throw ConfigError("FilippovSystem needs exactly the two one-sided branches");
    if (!surface.g || !surface.grad_g) throw ConfigError("surface callbacks missing");
}

double FilippovSystem::band(const Vec& x) const { return surface_tol * (1.0 + norm2(x)); }

FilippovSetDescription filippov_set_eval(const FilippovSystem& sys, double t, const Vec& x,
                                         int samples_per_branch) {
    sys.validate();
    FilippovSetDescription out;
    const double g = sys.surface.g(x);
    out.on_surface = std::abs(g) <= sys.band(x);

    auto sample_controls = [&](std::size_t mode) {
        const ControlSetSpec& set = sys.base.control_set(mode);
        std::vector<Vec> us;
        switch (set.kind) {
            case ControlSetSpec::Kind::FiniteSet:
                us = set.points;
                break;
            case ControlSetSpec::Kind::Interval: {
                const int n = std::max(2, samples_per_branch);
                for (int i = 0; i < n; ++i)
                    us.push_back({set.lo + (set.hi - set.lo) * i / (n - 1)});
                break;
            }
            case ControlSetSpec::Kind::Box: {
                const int n = std::max(2, samples_per_branch);
                if (set.dimension == 1) {
                    for (int i = 0; i < n; ++i)
                        us.push_back({set.lo_vec[0] +
                                      (set.hi_vec[0] - set.lo_vec[0]) * i / (n - 1)});
                } else {
                    for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << set.dimension);
                         ++mask) {
                        Vec c(set.dimension);
                        for (std::size_t i = 0; i < set.dimension; ++i)
                            c[i] = (mask >> i) & 1 ? set.hi_vec[i] : set.lo_vec[i];
                        us.push_back(std::move(c));
                    }
                }
                break;
            }
            case ControlSetSpec::Kind::Sphere: {
                const int n = std::max(4, samples_per_branch);
                for (int i = 0; i < n; ++i) {
                    const double th = 2.0 * M_PI * i / n;
                    us.push_back({set.radius * std::cos(th), set.radius * std::sin(th)});
                }
                break;
            }
        }
        return us;
    };

    for (const Vec& u : sample_controls(0))
        out.upper_generators.push_back(sys.base.mode(0).f(t, x, u));
    for (const Vec& u : sample_controls(1))
        out.lower_generators.push_back(sys.base.mode(1).f(t, x, u));

    if (out.on_surface) {
        out.generators = out.upper_generators;
        out.generators.insert(out.generators.end(), out.lower_generators.begin(),
                              out.lower_generators.end());
    } else {
        out.active_branch = g > 0.0 ? 0 : 1;
        out.generators = out.active_branch == 0 ? out.upper_generators : out.lower_generators;
    }
    return out;
}

// ============================================================================
// Filippov simulation
// ============================================================================

namespace {

FilippovBranch forced_branch_at(const std::vector<BranchWindow>& schedule, double t) {
    for (const auto& w : schedule)
        if (t >= w.t_begin - 1e-15 && t < w.t_end - 1e-15) return w.branch;
    return FilippovBranch::Auto;
}

}  // namespace

Trajectory simulate_filippov(const FilippovSystem& sys, const ControlSignal& u, const Vec& x0,
                             double ta, double tb, const SimConfig& cfg,
                             const std::vector<BranchWindow>& schedule) {
    sys.validate();
    cfg.validate();
    if (!all_finite(x0)) throw ConfigError("non-finite initial state");

    // Segment boundaries at schedule edges so no RK4 stage straddles a forced
    // window; stage times clamp strictly inside the active segment, which
    // keeps piecewise-constant controls exact.
    std::vector<double> breakpoints{ta, tb};
    for (const auto& w : schedule) {
        if (w.t_begin > ta && w.t_begin < tb) breakpoints.push_back(w.t_begin);
        if (w.t_end > ta && w.t_end < tb) breakpoints.push_back(w.t_end);
    }
    std::sort(breakpoints.begin(), breakpoints.end());
    breakpoints.erase(std::unique(breakpoints.begin(), breakpoints.end(),
                                  [](double a, double b) { return std::abs(a - b) < 1e-15; }),
                      breakpoints.end());
    double segment_end = tb;
    auto update_segment_end = [&](double tt) {
        segment_end = tb;
        for (double bp : breakpoints)
            if (bp > tt + 1e-15) {
                segment_end = bp;
                break;
            }
    };
    auto clamped_u = [&](double tt) {
        const double hi = segment_end - 1e-12 * (1.0 + std::abs(segment_end));
        return u(std::min(tt, hi));
    };

    Trajectory traj;
    Vec x = x0;
    double t = ta;
    bool sliding = false;
    traj.times.push_back(t);
    traj.states.push_back(x);
    traj.modes.push_back(sys.surface.g(x) >= 0.0 ? 0 : 1);

    auto branch_field = [&](int branch) {
        return [&, branch](double tt, const Vec& xx) {
            return sys.base.mode(branch).f(tt, xx, clamped_u(tt));
        };
    };
    auto sliding_field = [&](double tt, const Vec& xx) {
        const Vec uu = clamped_u(tt);
        const Vec fp = sys.base.mode(0).f(tt, xx, uu);
        const Vec fm = sys.base.mode(1).f(tt, xx, uu);
        const Vec n = sys.surface.grad_g(xx);
        const double lp = dot(n, fp);
        const double lm = dot(n, fm);
        const double den = lm - lp;
        if (std::abs(den) < 1e-300)
            throw DegenerateSlidingError("parallel one-sided fields during sliding", tt);
        const double alpha = lm / den;
        Vec out = scaled(fp, alpha);
        axpy(1.0 - alpha, fm, out);
        return out;
    };
    auto project_to_surface = [&](Vec& xx) {
        for (int it = 0; it < 3; ++it) {
            const double g = sys.surface.g(xx);
            if (std::abs(g) <= sys.band(xx)) break;
            Vec n = sys.surface.grad_g(xx);
            const double nn = dot(n, n);
            if (nn < 1e-300) break;
            axpy(-g / nn, n, xx);
        }
    };
    auto sliding_alpha = [&](double tt, const Vec& xx) {
        const Vec uu = clamped_u(tt);
        const Vec n = sys.surface.grad_g(xx);
        const double lp = dot(n, sys.base.mode(0).f(tt, xx, uu));
        const double lm = dot(n, sys.base.mode(1).f(tt, xx, uu));
        const double den = lm - lp;
        if (std::abs(den) < 1e-300) return std::pair<double, bool>(0.0, false);
        return std::pair<double, bool>(lm / den, true);
    };

    int event_count = 0;
    auto push_event = [&](EventKind kind, double te, const Vec& before, const Vec& after,
                          int from, int to) {
        if (++event_count > cfg.max_events)
            throw ZenoError("event cutoff exceeded in simulate_filippov", event_count);
        TrajectoryEvent ev;
        ev.time = te;
        ev.kind = kind;
        ev.mode_from = from;
        ev.mode_to = to;
        ev.state_before = before;
        ev.state_after = after;
        traj.events.push_back(ev);
    };

    double segment_start = ta;
    std::size_t step_in_segment = 0;
    update_segment_end(ta);
    while (t < tb - 1e-15) {
        if (t >= segment_end - 1e-15) {
            segment_start = t;
            step_in_segment = 0;
            update_segment_end(t);
        }
        ++step_in_segment;
        const double seg_span = segment_end - segment_start;
        std::size_t seg_steps =
            static_cast<std::size_t>(std::ceil(seg_span / cfg.dt - 1e-12));
        if (seg_steps == 0) seg_steps = 1;
        const double t_next =
            (step_in_segment >= seg_steps)
                ? segment_end
                : segment_start + static_cast<double>(step_in_segment) * cfg.dt;
        const double h = t_next - t;
        const FilippovBranch forced =
            forced_branch_at(schedule, 0.5 * (t + t_next));

        if (forced != FilippovBranch::Auto) {
            const int branch = forced == FilippovBranch::Upper ? 0 : 1;
            if (sliding) {
                push_event(EventKind::SlidingExit, t, x, x, branch, branch);
                sliding = false;
            }
            const double g_prev = sys.surface.g(x);
            x = rk4_step(branch_field(branch), t, x, h);
            t = t_next;
            if (!all_finite(x)) throw IntegrationError("Filippov blow-up", t);
            const double g_next = sys.surface.g(x);
            if ((g_prev > 0.0 && g_next < 0.0) || (g_prev < 0.0 && g_next > 0.0))
                push_event(EventKind::GuardCross, t, x, x, branch, branch);
            traj.times.push_back(t);
            traj.states.push_back(x);
            traj.modes.push_back(branch);
            continue;
        }

        const double g_here = sys.surface.g(x);
        if (std::abs(g_here) <= sys.band(x)) {
            // On the surface: slide while both one-sided fields point inward.
            const Vec uu = u(t);
            const Vec n = sys.surface.grad_g(x);
            const double lp = dot(n, sys.base.mode(0).f(t, x, uu));
            const double lm = dot(n, sys.base.mode(1).f(t, x, uu));
            if (lp < 0.0 && lm > 0.0) {
                if (!sliding) {
                    push_event(EventKind::SlidingEnter, t, x, x, 0, 1);
                    sliding = true;
                }
                x = rk4_step(sliding_field, t, x, h);
                project_to_surface(x);
                t = t_next;
                if (!all_finite(x)) throw IntegrationError("Filippov blow-up", t);
                auto [alpha, ok] = sliding_alpha(t, x);
                if (!ok) throw DegenerateSlidingError("parallel one-sided fields", t);
                if (alpha < 0.0 || alpha > 1.0) {
                    push_event(EventKind::SlidingExit, t, x, x, 0, 1);
                    sliding = false;
                }
                traj.times.push_back(t);
                traj.states.push_back(x);
                traj.modes.push_back(sliding ? traj.modes.back() : (lp > 0.0 ? 0 : 1));
                continue;
            }
            if (sliding) {
                push_event(EventKind::SlidingExit, t, x, x, 0, 1);
                sliding = false;
            }
            // Leave along whichever branch is consistent with its own region.
            const int branch = (lp >= 0.0) ? 0 : 1;
            x = rk4_step(branch_field(branch), t, x, h);
            t = t_next;
            if (!all_finite(x)) throw IntegrationError("Filippov blow-up", t);
            traj.times.push_back(t);
            traj.states.push_back(x);
            traj.modes.push_back(branch);
            continue;
        }

        const int branch = g_here > 0.0 ? 0 : 1;
        Vec x_trial = rk4_step(branch_field(branch), t, x, h);
        const double g_trial = sys.surface.g(x_trial);
        if ((g_here > 0.0) != (g_trial > 0.0) && std::abs(g_trial) > sys.band(x_trial)) {
            // Bisect the crossing time.
            double lo = t, hi = t_next;
            Vec x_hi = x_trial;
            while (hi - lo > cfg.event_tol) {
                const double mid = 0.5 * (lo + hi);
                Vec x_mid = rk4_step(branch_field(branch), t, x, mid - t);
                if ((sys.surface.g(x_mid) > 0.0) == (g_here > 0.0)) {
                    lo = mid;
                } else {
                    hi = mid;
                    x_hi = x_mid;
                }
            }
            push_event(EventKind::GuardCross, hi, x_hi, x_hi, branch, 1 - branch);
            x = x_hi;
            t = hi;
            segment_start = t;
            step_in_segment = 0;
            if (t > traj.times.back() + 1e-15) {
                traj.times.push_back(t);
                traj.states.push_back(x);
                traj.modes.push_back(branch);
            }
            continue;
        }
        x = x_trial;
        t = t_next;
        if (!all_finite(x)) throw IntegrationError("Filippov blow-up", t);
        traj.times.push_back(t);
        traj.states.push_back(x);
        traj.modes.push_back(branch);
    }
    traj.validate();
    return traj;
}

// ============================================================================
// Hybrid simulation
// ============================================================================

void HybridAutomaton::validate() const {
    if (state_dim < 1) throw ConfigError("state_dim must be >= 1");
    if (modes.empty()) throw ConfigError("at least one mode is required");
    if (control_sets.size() != modes.size())
        throw ConfigError("one control set per mode is required");
    for (const auto& e : edges) {
        if (e.from < 0 || e.from >= static_cast<int>(modes.size()) || e.to < 0 ||
            e.to >= static_cast<int>(modes.size()))
            throw ConfigError("edge mode index out of range");
        if (!e.guard || !e.reset) throw ConfigError("edge guard/reset missing");
    }
}

double HybridAutomaton::reset_condition_estimate(std::size_t edge,
                                                 const std::vector<Vec>& probes) const {
    if (edge >= edges.size()) throw ConfigError("edge index out of range");
    if (!edges[edge].reset_jacobian) throw ConfigError("edge has no reset Jacobian");
    double worst = 1.0;
    for (const Vec& x : probes)
        worst = std::max(worst, condition_estimate(edges[edge].reset_jacobian(x)));
    return worst;
}

namespace {

bool guard_crossed(GuardDirection dir, double h_prev, double h_next) {
    // Boundary-inclusive on the departure side so accumulating event
    // sequences (a ball settling onto its guard) keep firing instead of
    // tunnelling through between grid points.
    switch (dir) {
        case GuardDirection::Down:
            return h_prev >= 0.0 && h_next < 0.0;
        case GuardDirection::Up:
            return h_prev <= 0.0 && h_next > 0.0;
        case GuardDirection::Any:
            return (h_prev >= 0.0 && h_next < 0.0) || (h_prev <= 0.0 && h_next > 0.0);
    }
    return false;
}

void project_to_guard(const HybridEdge& edge, Vec& x) {
    if (!edge.grad_guard) return;
    for (int it = 0; it < 3; ++it) {
        const double h = edge.guard(x);
        if (h == 0.0) break;
        Vec n = edge.grad_guard(x);
        const double nn = dot(n, n);
        if (nn < 1e-300) break;
        axpy(-h / nn, n, x);
    }
}

}  // namespace

Trajectory simulate_hybrid(const HybridAutomaton& aut, const ModeControlSignal& u, const Vec& x0,
                           int q0, double ta, double tb, const SimConfig& cfg) {
    aut.validate();
    cfg.validate();
    if (q0 < 0 || q0 >= static_cast<int>(aut.modes.size()))
        throw ConfigError("initial mode out of range");
    if (!(tb > ta)) throw ConfigError("simulate_hybrid requires tb > ta");

    Trajectory traj;
    Vec x = x0;
    int q = q0;
    traj.times.push_back(ta);
    traj.states.push_back(x);
    traj.modes.push_back(q);

    auto mode_field = [&](int mode) {
        return [&, mode](double tt, const Vec& xx) { return aut.modes[mode].f(tt, xx, u(mode, tt)); };
    };

    int event_count = 0;
    double seg_start = ta;
    double t = ta;
    std::size_t k = 0;

    // Mirrors integrate_ode's grid so the no-event case is bit-identical.
    const double span0 = tb - ta;
    std::size_t n_steps = static_cast<std::size_t>(std::ceil(span0 / cfg.dt - 1e-12));
    if (n_steps == 0) n_steps = 1;

    while (t < tb - 1e-15) {
        ++k;
        const double span = tb - seg_start;
        std::size_t seg_steps = static_cast<std::size_t>(std::ceil(span / cfg.dt - 1e-12));
        if (seg_steps == 0) seg_steps = 1;
        const double t_next =
            (k >= seg_steps) ? tb : seg_start + static_cast<double>(k) * cfg.dt;
        const double h = t_next - t;
        Vec x_trial = rk4_step(mode_field(q), t, x, h);
        if (!all_finite(x_trial)) throw IntegrationError("hybrid blow-up", t_next);

        // Earliest crossing among outgoing edges; declaration order breaks ties.
        int hit_edge = -1;
        double hit_time = t_next;
        Vec hit_state;
        for (std::size_t e = 0; e < aut.edges.size(); ++e) {
            const HybridEdge& edge = aut.edges[e];
            if (edge.from != q) continue;
            const double h_prev = edge.guard(x);
            const double h_next = edge.guard(x_trial);
            if (!guard_crossed(edge.direction, h_prev, h_next)) continue;
            double lo = t, hi = t_next;
            Vec x_hi = x_trial;
            while (hi - lo > cfg.event_tol) {
                const double mid = 0.5 * (lo + hi);
                Vec x_mid = rk4_step(mode_field(q), t, x, mid - t);
                if (guard_crossed(edge.direction, h_prev, edge.guard(x_mid))) {
                    hi = mid;
                    x_hi = x_mid;
                } else {
                    lo = mid;
                }
            }
            if (hi < hit_time - 1e-15 || (hit_edge < 0 && hi <= hit_time)) {
                hit_edge = static_cast<int>(e);
                hit_time = hi;
                hit_state = x_hi;
            }
        }

        if (hit_edge >= 0) {
            const HybridEdge& edge = aut.edges[hit_edge];
            if (++event_count > cfg.max_events)
                throw ZenoError("guard crossing cutoff exceeded", event_count);
            project_to_guard(edge, hit_state);
            Vec x_post = edge.reset(hit_state);
            TrajectoryEvent ev;
            ev.time = hit_time;
            ev.kind = (edge.from == edge.to) ? EventKind::Impact : EventKind::ModeSwitch;
            ev.mode_from = edge.from;
            ev.mode_to = edge.to;
            ev.edge = hit_edge;
            ev.state_before = hit_state;
            ev.state_after = x_post;
            traj.events.push_back(ev);

            x = x_post;
            q = edge.to;
            t = hit_time;
            seg_start = hit_time;
            k = 0;
            if (t > traj.times.back() + 1e-15) {
                traj.times.push_back(t);
                traj.states.push_back(x);
                traj.modes.push_back(q);
            } else {
                traj.states.back() = x;
                traj.modes.back() = q;
            }
            continue;
        }

        x = x_trial;
        t = t_next;
        if (cfg.dense_output || t >= tb - 1e-15) {
            traj.times.push_back(t);
            traj.states.push_back(x);
            traj.modes.push_back(q);
        }
    }
    traj.validate();
    return traj;
}

// ============================================================================
// Adjoints with jumps
// ============================================================================

namespace {

std::vector<std::size_t> jump_event_indices(const Trajectory& ref) {
    std::vector<std::size_t> idx;
    for (std::size_t e = 0; e < ref.events.size(); ++e) {
        const auto k = ref.events[e].kind;
        if ((k == EventKind::Impact || k == EventKind::ModeSwitch) && ref.events[e].edge >= 0)
            idx.push_back(e);
    }
    return idx;
}

}  // namespace

JumpAdjoint adjoint_with_jumps(const HybridAutomaton& aut, const Trajectory& ref,
                               const ModeControlSignal& u, const Vec& psi0,
                               const std::vector<double>& multipliers, const SimConfig& cfg) {
    (void)cfg;
    ref.validate();
    const std::vector<std::size_t> jumps = jump_event_indices(ref);
    if (multipliers.size() != jumps.size())
        throw ConfigError("expected " + std::to_string(jumps.size()) + " jump multipliers, got " +
                          std::to_string(multipliers.size()));

    JumpAdjoint out;
    out.adjoint.times = ref.times;
    out.adjoint.psi.reserve(ref.times.size());

    Vec psi = psi0;
    out.adjoint.psi.push_back(psi);
    std::size_t next_jump = 0;

    auto arc_rhs = [&](int mode) {
        return [&, mode](double tt, const Vec& p) {
            Mat a = aut.modes[mode].f_x(tt, ref.state_at(tt), u(mode, tt));
            return scaled(vecmat(p, a), -1.0);
        };
    };

    for (std::size_t i = 0; i + 1 < ref.times.size(); ++i) {
        const int mode = ref.modes.empty() ? 0 : ref.modes[i];
        psi = rk4_step(arc_rhs(mode), ref.times[i], psi, ref.times[i + 1] - ref.times[i]);
        if (!all_finite(psi)) throw IntegrationError("adjoint blow-up", ref.times[i + 1]);

        // Apply any jump whose event time matches the next grid point (the
        // post-reset state is stored there).
        while (next_jump < jumps.size() &&
               ref.events[jumps[next_jump]].time <= ref.times[i + 1] + 1e-15) {
            const TrajectoryEvent& ev = ref.events[jumps[next_jump]];
            const HybridEdge& edge = aut.edges[ev.edge];
            if (!edge.reset_jacobian || !edge.grad_guard)
                throw ConfigError("edge lacks reset Jacobian or guard gradient");
            JumpRecord rec;
            rec.time = ev.time;
            rec.edge = ev.edge;
            rec.mode_from = ev.mode_from;
            rec.mode_to = ev.mode_to;
            rec.nu = multipliers[next_jump];
            rec.psi_before = psi;
            Mat jinv = inverse(edge.reset_jacobian(ev.state_before));
            Vec psi_after = vecmat(psi, jinv);
            axpy(rec.nu, edge.grad_guard(ev.state_before), psi_after);
            rec.psi_after = psi_after;
            out.jumps.push_back(rec);
            psi = psi_after;
            ++next_jump;
        }
        out.adjoint.psi.push_back(psi);
    }
    return out;
}

JumpAdjoint adjoint_with_jumps(const FilippovSystem& sys, const Trajectory& ref,
                               const ControlSignal& u, const Vec& psi0,
                               const std::vector<double>& multipliers, const SimConfig& cfg) {
    (void)cfg;
    ref.validate();
    std::vector<std::size_t> crossings;
    for (std::size_t e = 0; e < ref.events.size(); ++e)
        if (ref.events[e].kind == EventKind::GuardCross) crossings.push_back(e);
    if (multipliers.size() != crossings.size())
        throw ConfigError("expected " + std::to_string(crossings.size()) +
                          " jump multipliers, got " + std::to_string(multipliers.size()));

    JumpAdjoint out;
    out.adjoint.times = ref.times;
    out.adjoint.psi.reserve(ref.times.size());
    Vec psi = psi0;
    out.adjoint.psi.push_back(psi);
    std::size_t next_jump = 0;

    auto sliding_at = [&](double tt) {
        for (const auto& ev : ref.events) {
            if (ev.kind == EventKind::SlidingEnter && tt >= ev.time - 1e-15) {
                bool exited = false;
                for (const auto& ex : ref.events)
                    if (ex.kind == EventKind::SlidingExit && ex.time > ev.time &&
                        ex.time <= tt + 1e-15)
                        exited = true;
                if (!exited) return true;
            }
        }
        return false;
    };

    auto rhs = [&](double tt, const Vec& p) {
        const Vec x = ref.state_at(tt);
        Mat a;
        if (sliding_at(tt) && sys.sliding_jacobian) {
            a = sys.sliding_jacobian(tt, x, u(tt));
        } else {
            const int branch = sys.surface.g(x) >= 0.0 ? 0 : 1;
            a = sys.base.mode(branch).f_x(tt, x, u(tt));
        }
        return scaled(vecmat(p, a), -1.0);
    };

    for (std::size_t i = 0; i + 1 < ref.times.size(); ++i) {
        psi = rk4_step(rhs, ref.times[i], psi, ref.times[i + 1] - ref.times[i]);
        if (!all_finite(psi)) throw IntegrationError("adjoint blow-up", ref.times[i + 1]);
        while (next_jump < crossings.size() &&
               ref.events[crossings[next_jump]].time <= ref.times[i + 1] + 1e-15) {
            const TrajectoryEvent& ev = ref.events[crossings[next_jump]];
            JumpRecord rec;
            rec.time = ev.time;
            rec.edge = -1;
            rec.mode_from = ev.mode_from;
            rec.mode_to = ev.mode_to;
            rec.nu = multipliers[next_jump];
            rec.psi_before = psi;
            Vec psi_after = psi;
            axpy(rec.nu, sys.surface.grad_g(ev.state_before), psi_after);
            rec.psi_after = psi_after;
            out.jumps.push_back(rec);
            psi = psi_after;
            ++next_jump;
        }
        out.adjoint.psi.push_back(psi);
    }
    return out;
}

// ============================================================================
// Candidate checks
// ============================================================================

NonsmoothReport check_hybrid_candidate(const HybridAutomaton& aut, const Trajectory& ref,
                                       const ModeControlSignal& u, const Vec& psi0,
                                       const std::vector<double>& multipliers, int sense,
                                       double tol, const NonsmoothCheckConfig& cfg) {
    SimConfig sim;
    JumpAdjoint ja = adjoint_with_jumps(aut, ref, u, psi0, multipliers, sim);
    const auto& t = ref.times;
    const auto& psi = ja.adjoint.psi;
    const std::size_t stride = std::max<std::size_t>(1, cfg.time_stride);

    NonsmoothReport rep;
    rep.tolerance = tol;
    double sup_psi = 0.0;
    for (const Vec& p : psi) sup_psi = std::max(sup_psi, norm2(p));
    rep.nontriviality_slack = std::max(0.0, 1.0 - sup_psi);

    ControlSystem proxy;
    proxy.state_dim = aut.state_dim;
    proxy.modes = aut.modes;
    proxy.control_sets = aut.control_sets;
    proxy.t_start = aut.t_start;
    proxy.t_end = aut.t_end;

    auto gap_at = [&](std::size_t i) {
        const int q = ref.modes.empty() ? 0 : ref.modes[i];
        const Vec uu = u(q, t[i]);
        const double along = dot(psi[i], aut.modes[q].f(t[i], ref.states[i], uu));
        MaxResult m = hamiltonian_max(proxy, q, t[i], ref.states[i], psi[i], cfg.max_cfg);
        return std::pair<double, double>(std::abs(along - m.value), m.value);
    };
    double terminal_m = 0.0;
    for (std::size_t i = 0; i < t.size(); i += stride)
        rep.max_gap = std::max(rep.max_gap, gap_at(i).first);
    {
        auto [gap, m] = gap_at(t.size() - 1);
        rep.max_gap = std::max(rep.max_gap, gap);
        terminal_m = m;
    }
    rep.transversality_excess = std::max(0.0, -static_cast<double>(sense) * terminal_m);

    // Jump residuals re-derive the formula from the stored record.
    for (const JumpRecord& rec : ja.jumps) {
        const TrajectoryEvent* ev = nullptr;
        for (const auto& e : ref.events)
            if (std::abs(e.time - rec.time) <= 1e-12 && e.edge == rec.edge) ev = &e;
        if (!ev) throw InvariantError("jump record without matching event");
        const HybridEdge& edge = aut.edges[rec.edge];
        Vec expect = vecmat(rec.psi_before, inverse(edge.reset_jacobian(ev->state_before)));
        axpy(rec.nu, edge.grad_guard(ev->state_before), expect);
        rep.jump_residuals.push_back(norm_inf(sub(rec.psi_after, expect)));

        // Switching inequality <psi-, f_from> >= <psi+, f_to>, with the
        // control sampled one-sided around the jump.
        const double dt_side = 1e-9 * (1.0 + std::abs(rec.time));
        const Vec u_from = u(rec.mode_from, rec.time - dt_side);
        const Vec u_to = u(rec.mode_to, rec.time + dt_side);
        const double before =
            dot(rec.psi_before, aut.modes[rec.mode_from].f(rec.time, ev->state_before, u_from));
        const double after =
            dot(rec.psi_after, aut.modes[rec.mode_to].f(rec.time, ev->state_after, u_to));
        rep.switching_transversality_excess =
            std::max(rep.switching_transversality_excess, std::max(0.0, after - before));
    }

    double worst = std::max({rep.max_gap, rep.transversality_excess,
                             rep.switching_transversality_excess});
    for (double jr : rep.jump_residuals) worst = std::max(worst, jr);
    rep.violation = (sup_psi <= 1e-300) ? std::max(1.0, worst) : worst / sup_psi;
    rep.accept = rep.violation <= tol && sup_psi > 1e-300;
    return rep;
}

NonsmoothReport check_filippov_candidate(const FilippovSystem& sys, const Reference& ref,
                                         const Vec& psi0, const std::vector<double>& multipliers,
                                         int sense, double tol, const NonsmoothCheckConfig& cfg) {
    SimConfig sim;
    // The reference control signal for arc Jacobians: the mu barycenter.
    auto u_bar = [&](double tt) {
        const auto& piece = ref.mu.piece_at(tt);
        Vec acc(piece.atoms.front().point.size(), 0.0);
        for (const auto& a : piece.atoms) axpy(a.weight, a.point, acc);
        return acc;
    };
    JumpAdjoint ja = adjoint_with_jumps(sys, ref.traj, u_bar, psi0, multipliers, sim);
    const auto& t = ref.traj.times;
    const auto& psi = ja.adjoint.psi;
    const std::size_t stride = std::max<std::size_t>(1, cfg.time_stride);

    NonsmoothReport rep;
    rep.tolerance = tol;
    double sup_psi = 0.0;
    for (const Vec& p : psi) sup_psi = std::max(sup_psi, norm2(p));
    rep.nontriviality_slack = std::max(0.0, 1.0 - sup_psi);

    auto velocity_at = [&](std::size_t i) {
        if (ref.velocity) return ref.velocity(t[i]);
        if (i == 0) return scaled(sub(ref.traj.states[1], ref.traj.states[0]), 1.0 / (t[1] - t[0]));
        if (i + 1 == t.size())
            return scaled(sub(ref.traj.states[i], ref.traj.states[i - 1]),
                          1.0 / (t[i] - t[i - 1]));
        return scaled(sub(ref.traj.states[i + 1], ref.traj.states[i - 1]),
                      1.0 / (t[i + 1] - t[i - 1]));
    };
    auto gap_at = [&](std::size_t i) {
        FilippovSetDescription fs = filippov_set_eval(sys, t[i], ref.traj.states[i]);
        double m = -std::numeric_limits<double>::infinity();
        for (const Vec& v : fs.generators) m = std::max(m, dot(psi[i], v));
        return std::pair<double, double>(std::abs(m - dot(psi[i], velocity_at(i))), m);
    };
    double terminal_m = 0.0;
    for (std::size_t i = 0; i < t.size(); i += stride)
        rep.max_gap = std::max(rep.max_gap, gap_at(i).first);
    {
        auto [gap, m] = gap_at(t.size() - 1);
        rep.max_gap = std::max(rep.max_gap, gap);
        terminal_m = m;
    }
    rep.transversality_excess = std::max(0.0, -static_cast<double>(sense) * terminal_m);

    for (const JumpRecord& rec : ja.jumps) {
        const TrajectoryEvent* ev = nullptr;
        for (const auto& e : ref.traj.events)
            if (std::abs(e.time - rec.time) <= 1e-12 && e.kind == EventKind::GuardCross)
                ev = &e;
        if (!ev) throw InvariantError("jump record without matching crossing");
        Vec expect = rec.psi_before;
        axpy(rec.nu, sys.surface.grad_g(ev->state_before), expect);
        rep.jump_residuals.push_back(norm_inf(sub(rec.psi_after, expect)));
    }

    double worst = std::max(rep.max_gap, rep.transversality_excess);
    for (double jr : rep.jump_residuals) worst = std::max(worst, jr);
    rep.violation = (sup_psi <= 1e-300) ? std::max(1.0, worst) : worst / sup_psi;
    rep.accept = rep.violation <= tol && sup_psi > 1e-300;
    return rep;
}

}  // namespace optcert
