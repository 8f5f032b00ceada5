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

#include "optcert/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>

namespace optcert {

// ============================================================================
// ControlSetSpec
// ============================================================================

ControlSetSpec ControlSetSpec::finite_set(std::vector<Vec> pts) {
    ControlSetSpec s;
    s.kind = Kind::FiniteSet;
    s.points = std::move(pts);
    s.dimension = s.points.empty() ? 0 : s.points.front().size();
    s.validate();
    return s;
}

ControlSetSpec ControlSetSpec::interval(double lo, double hi) {
    ControlSetSpec s;
    s.kind = Kind::Interval;
    s.dimension = 1;
    s.lo = lo;
    s.hi = hi;
    s.validate();
    return s;
}

ControlSetSpec ControlSetSpec::box(Vec lo, Vec hi) {
    ControlSetSpec s;
    s.kind = Kind::Box;
    s.dimension = lo.size();
    s.lo_vec = std::move(lo);
    s.hi_vec = std::move(hi);
    s.validate();
    return s;
}

ControlSetSpec ControlSetSpec::sphere(double radius, std::size_t dimension) {
    ControlSetSpec s;
    s.kind = Kind::Sphere;
    s.dimension = dimension;
    s.radius = radius;
    s.validate();
    return s;
}

void ControlSetSpec::validate() const {
    switch (kind) {
        case Kind::FiniteSet:
            if (points.empty()) throw ConfigError("FiniteSet control set is empty");
            for (const Vec& p : points)
                if (p.size() != dimension)
                    throw ConfigError("FiniteSet point dimension mismatch");
            break;
        case Kind::Interval:
            if (dimension != 1) throw ConfigError("Interval control set must be 1-D");
            if (!(lo <= hi)) throw ConfigError("Interval requires lo <= hi");
            break;
        case Kind::Box:
            if (lo_vec.size() != dimension || hi_vec.size() != dimension)
                throw ConfigError("Box bound dimension mismatch");
            for (std::size_t i = 0; i < dimension; ++i)
                if (!(lo_vec[i] <= hi_vec[i])) throw ConfigError("Box requires lo <= hi");
            break;
        case Kind::Sphere:
            if (!(radius > 0.0)) throw ConfigError("Sphere requires radius > 0");
            break;
    }
}

bool ControlSetSpec::contains(const Vec& u, double tol) const {
    if (u.size() != dimension) return false;
    switch (kind) {
        case Kind::FiniteSet:
            for (const Vec& p : points) {
                double gap = 0.0;
                for (std::size_t i = 0; i < dimension; ++i)
                    gap = std::max(gap, std::abs(p[i] - u[i]));
                if (gap <= tol) return true;
            }
            return false;
        case Kind::Interval:
            return u[0] >= lo - tol && u[0] <= hi + tol;
        case Kind::Box:
            for (std::size_t i = 0; i < dimension; ++i)
                if (u[i] < lo_vec[i] - tol || u[i] > hi_vec[i] + tol) return false;
            return true;
        case Kind::Sphere:
            return std::abs(norm2(u) - radius) <= tol * (1.0 + radius);
    }
    return false;
}

// ============================================================================
// ControlSystem
// ============================================================================

void ControlSystem::validate() const {
    if (state_dim < 1) throw ConfigError("state_dim must be >= 1");
    if (modes.empty()) throw ConfigError("at least one mode is required");
    if (control_sets.size() != modes.size())
        throw ConfigError("one control set per mode is required");
    if (!(t_end > t_start)) throw ConfigError("time horizon must satisfy t2 > t1");
    for (const auto& set : control_sets) set.validate();
    for (const auto& m : modes)
        if (!m.f) throw ConfigError("mode '" + m.name + "' has no vector field");
}

const ModeDynamics& ControlSystem::mode(std::size_t q) const {
    if (q >= modes.size()) throw ConfigError("mode index out of range");
    return modes[q];
}

const ControlSetSpec& ControlSystem::control_set(std::size_t q) const {
    if (q >= control_sets.size()) throw ConfigError("mode index out of range");
    return control_sets[q];
}

double jacobian_probe_defect(const ControlSystem& sys, std::size_t mode,
                             const std::vector<std::tuple<double, Vec, Vec>>& probes,
                             double fd_step) {
    const ModeDynamics& md = sys.mode(mode);
    if (!md.f_x) throw ConfigError("mode has no Jacobian callback");
    double worst = 0.0;
    for (const auto& [t, x, u] : probes) {
        Mat jac = md.f_x(t, x, u);
        double scale = 1.0;
        for (double v : jac.data()) scale = std::max(scale, std::abs(v));
        for (std::size_t j = 0; j < sys.state_dim; ++j) {
            Vec xp = x, xm = x;
            xp[j] += fd_step;
            xm[j] -= fd_step;
            Vec fp = md.f(t, xp, u);
            Vec fm = md.f(t, xm, u);
            for (std::size_t i = 0; i < sys.state_dim; ++i) {
                const double fd = (fp[i] - fm[i]) / (2.0 * fd_step);
                worst = std::max(worst, std::abs(fd - jac(i, j)) / scale);
            }
        }
    }
    return worst;
}

// ============================================================================
// GeneralizedControl
// ============================================================================

void GeneralizedControl::validate(const ControlSetSpec& set, double span_begin,
                                  double span_end) const {
    if (pieces.empty()) throw ConfigError("generalized control has no pieces");
    double cursor = span_begin;
    for (const Piece& p : pieces) {
        if (std::abs(p.t_begin - cursor) > 1e-9 * (1.0 + std::abs(cursor)))
            throw ConfigError("generalized control pieces do not partition the span");
        if (!(p.t_end > p.t_begin)) throw ConfigError("degenerate control piece");
        if (p.atoms.empty()) throw ConfigError("control piece has no atoms");
        double mass = 0.0;
        for (const Atom& a : p.atoms) {
            if (a.weight < 0.0) throw ConfigError("negative atom weight");
            if (!set.contains(a.point)) throw DomainError("atom outside the control set");
            mass += a.weight;
        }
        if (std::abs(mass - 1.0) > 1e-12)
            throw ConfigError("piece weights sum to " + std::to_string(mass) + ", expected 1");
        cursor = p.t_end;
    }
    if (std::abs(cursor - span_end) > 1e-9 * (1.0 + std::abs(span_end)))
        throw ConfigError("generalized control does not cover the span end");
}

const GeneralizedControl::Piece& GeneralizedControl::piece_at(double t) const {
    for (std::size_t i = 0; i < pieces.size(); ++i) {
        const Piece& p = pieces[i];
        const bool last = (i + 1 == pieces.size());
        if (t >= p.t_begin - 1e-12 && (t < p.t_end || (last && t <= p.t_end + 1e-12))) return p;
    }
    throw DomainError("time " + std::to_string(t) + " outside all control pieces");
}

bool MeasureVariation::empty() const {
    for (const Piece& p : pieces)
        for (const Atom& a : p.atoms)
            if (a.weight != 0.0) return false;
    return true;
}

void MeasureVariation::validate(const ControlSetSpec& set) const {
    for (const Piece& p : pieces) {
        if (!(p.t_end > p.t_begin)) throw ConfigError("degenerate variation piece");
        double mass = 0.0;
        for (const Atom& a : p.atoms) {
            if (!set.contains(a.point)) throw DomainError("variation atom outside control set");
            mass += a.weight;
        }
        if (std::abs(mass) > 1e-12)
            throw ConfigError("variation piece mass " + std::to_string(mass) + " is not 0");
    }
}

const std::vector<MeasureVariation::Atom>* MeasureVariation::atoms_at(double t) const {
    for (std::size_t i = 0; i < pieces.size(); ++i) {
        const Piece& p = pieces[i];
        const bool last = (i + 1 == pieces.size());
        if (t >= p.t_begin - 1e-12 && (t < p.t_end || (last && t <= p.t_end + 1e-12)))
            return &p.atoms;
    }
    return nullptr;
}

// ============================================================================
// Trajectory
// ============================================================================

void Trajectory::validate() const {
    if (times.size() != states.size()) throw ConfigError("times/states length mismatch");
    if (!modes.empty() && modes.size() != times.size())
        throw ConfigError("modes length mismatch");
    for (std::size_t i = 1; i < times.size(); ++i)
        if (!(times[i] > times[i - 1])) throw ConfigError("times not strictly increasing");
    for (const auto& ev : events)
        if (!times.empty() && (ev.time < times.front() - 1e-12 || ev.time > times.back() + 1e-12))
            throw ConfigError("event time outside trajectory span");
}

Vec Trajectory::state_at(double t) const {
    if (times.empty()) throw ConfigError("empty trajectory");
    if (t <= times.front()) return states.front();
    if (t >= times.back()) return states.back();
    auto it = std::upper_bound(times.begin(), times.end(), t);
    const std::size_t hi = static_cast<std::size_t>(it - times.begin());
    const std::size_t lo = hi - 1;
    const double w = (t - times[lo]) / (times[hi] - times[lo]);
    Vec out(states[lo].size());
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = (1.0 - w) * states[lo][i] + w * states[hi][i];
    return out;
}

std::size_t Trajectory::index_at(double t) const {
    auto it = std::lower_bound(times.begin(), times.end(), t);
    if (it == times.end()) return times.size() - 1;
    return static_cast<std::size_t>(it - times.begin());
}

void SimConfig::validate() const {
    if (!(dt > 0.0)) throw ConfigError("dt must be positive");
    if (!(event_tol > 0.0) || event_tol > dt)
        throw ConfigError("event_tol must satisfy 0 < event_tol <= dt");
}

// ============================================================================
// Pointwise operations
// ============================================================================

Vec eval_vector_field(const ControlSystem& sys, std::size_t mode, double t, const Vec& x,
                      const Vec& u) {
    const ModeDynamics& md = sys.mode(mode);
    if (x.size() != sys.state_dim) throw ConfigError("state dimension mismatch");
    const ControlSetSpec& set = sys.control_set(mode);
    if (!set.contains(u)) throw DomainError("control outside the mode's control set");
    Vec out = md.f(t, x, u);
    if (out.size() != sys.state_dim) throw ConfigError("vector field output dimension mismatch");
    return out;
}

Vec eval_convexified_drift(const ControlSystem& sys, std::size_t mode,
                           const GeneralizedControl& mu, double t, const Vec& x) {
    const GeneralizedControl::Piece& piece = mu.piece_at(t);
    Vec drift(sys.state_dim, 0.0);
    for (const auto& atom : piece.atoms)
        axpy(atom.weight, eval_vector_field(sys, mode, t, x, atom.point), drift);
    return drift;
}

Mat averaged_jacobian(const ControlSystem& sys, std::size_t mode, const GeneralizedControl& mu,
                      double t, const Vec& x) {
    const ModeDynamics& md = sys.mode(mode);
    if (!md.f_x) throw ConfigError("mode has no Jacobian callback");
    const GeneralizedControl::Piece& piece = mu.piece_at(t);
    Mat acc(sys.state_dim, sys.state_dim);
    for (const auto& atom : piece.atoms) {
        Mat j = md.f_x(t, x, atom.point);
        j *= atom.weight;
        acc += j;
    }
    return acc;
}

Mat averaged_hessian(const ControlSystem& sys, std::size_t mode, const GeneralizedControl& mu,
                     double t, const Vec& x) {
    const ModeDynamics& md = sys.mode(mode);
    if (!md.f_xx) throw ConfigError("mode has no Hessian callback");
    const GeneralizedControl::Piece& piece = mu.piece_at(t);
    Mat acc(sys.state_dim, sys.state_dim);
    for (const auto& atom : piece.atoms) {
        std::vector<Mat> hs = md.f_xx(t, x, atom.point);
        for (const Mat& h : hs) {
            Mat w = h;
            w *= atom.weight;
            acc += w;
        }
    }
    return acc;
}

Vec averaged_hessian_quadratic(const ControlSystem& sys, std::size_t mode,
                               const GeneralizedControl& mu, double t, const Vec& x,
                               const Vec& dx) {
    const ModeDynamics& md = sys.mode(mode);
    if (!md.f_xx) throw ConfigError("mode has no Hessian callback");
    const GeneralizedControl::Piece& piece = mu.piece_at(t);
    Vec acc(sys.state_dim, 0.0);
    for (const auto& atom : piece.atoms) {
        std::vector<Mat> hs = md.f_xx(t, x, atom.point);
        for (std::size_t k = 0; k < hs.size(); ++k)
            acc[k] += atom.weight * quad_form(hs[k], dx);
    }
    return acc;
}

// ============================================================================
// Integration
// ============================================================================

Vec rk4_step(const OdeRhs& rhs, double t, const Vec& x, double h) {
    Vec k1 = rhs(t, x);
    Vec x2 = x;
    axpy(0.5 * h, k1, x2);
    Vec k2 = rhs(t + 0.5 * h, x2);
    Vec x3 = x;
    axpy(0.5 * h, k2, x3);
    Vec k3 = rhs(t + 0.5 * h, x3);
    Vec x4 = x;
    axpy(h, k3, x4);
    Vec k4 = rhs(t + h, x4);
    Vec out = x;
    for (std::size_t i = 0; i < x.size(); ++i)
        out[i] += (h / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    return out;
}

Trajectory integrate_ode(const OdeRhs& rhs, const Vec& x0, double ta, double tb,
                         const SimConfig& cfg, int mode_label) {
    cfg.validate();
    if (!(tb > ta)) throw ConfigError("integrate_ode requires tb > ta");

    const double span = tb - ta;
    std::size_t n_steps = static_cast<std::size_t>(std::ceil(span / cfg.dt - 1e-12));
    if (n_steps == 0) n_steps = 1;

    Trajectory traj;
    traj.times.reserve(cfg.dense_output ? n_steps + 1 : 2);
    traj.states.reserve(cfg.dense_output ? n_steps + 1 : 2);
    traj.modes.reserve(cfg.dense_output ? n_steps + 1 : 2);

    Vec x = x0;
    double t = ta;
    traj.times.push_back(t);
    traj.states.push_back(x);
    traj.modes.push_back(mode_label);

    for (std::size_t k = 1; k <= n_steps; ++k) {
        const double t_next = (k == n_steps) ? tb : ta + static_cast<double>(k) * cfg.dt;
        const double h = t_next - t;
        x = rk4_step(rhs, t, x, h);
        t = t_next;
        if (!all_finite(x)) throw IntegrationError("integration blow-up", t);
        if (cfg.dense_output || k == n_steps) {
            traj.times.push_back(t);
            traj.states.push_back(x);
            traj.modes.push_back(mode_label);
        }
    }
    return traj;
}

double hamiltonian_eval(const ControlSystem& sys, std::size_t mode, double t, const Vec& x,
                        const Vec& psi, const Vec& u) {
    if (psi.size() != sys.state_dim) throw ConfigError("costate dimension mismatch");
    return dot(psi, eval_vector_field(sys, mode, t, x, u));
}

// ============================================================================
// Maximization over control sets
// ============================================================================

namespace {

struct Best {
    bool valid = false;
    double value = 0.0;
    Vec arg;

    void consider(double v, const Vec& u) {
        if (!valid || v > value || (v == value && lex_less(u, arg))) {
            valid = true;
            value = v;
            arg = u;
        }
    }
};

MaxResult scan_points(const std::vector<Vec>& pts,
                      const std::function<double(const Vec&)>& objective, bool used_grid) {
    Best best;
    for (const Vec& p : pts) best.consider(objective(p), p);
    return {best.value, best.arg, used_grid};
}

}  // namespace

MaxResult maximize_over_control_set(const ControlSetSpec& set,
                                    const std::function<double(const Vec&)>& objective,
                                    const MaximizeConfig& cfg) {
    set.validate();
    switch (set.kind) {
        case ControlSetSpec::Kind::FiniteSet:
            return scan_points(set.points, objective, false);

        case ControlSetSpec::Kind::Interval: {
            const Vec a{set.lo}, b{set.hi}, m{0.5 * (set.lo + set.hi)};
            const double fa = objective(a), fb = objective(b), fm = objective(m);
            const double scale =
                1.0 + std::max({std::abs(fa), std::abs(fb), std::abs(fm)});
            if (std::abs(fm - 0.5 * (fa + fb)) <= cfg.affine_tol * scale)
                return scan_points({a, b}, objective, false);
            if (!cfg.allow_grid)
                throw CapabilityError("non-affine objective on Interval with grid disabled");
            std::vector<Vec> grid;
            grid.reserve(cfg.axis_samples);
            for (int i = 0; i < cfg.axis_samples; ++i) {
                const double w = static_cast<double>(i) / (cfg.axis_samples - 1);
                grid.push_back({set.lo + w * (set.hi - set.lo)});
            }
            return scan_points(grid, objective, true);
        }

        case ControlSetSpec::Kind::Box: {
            const std::size_t r = set.dimension;
            Vec center(r);
            for (std::size_t i = 0; i < r; ++i)
                center[i] = 0.5 * (set.lo_vec[i] + set.hi_vec[i]);
            const double fc = objective(center);
            double scale = 1.0 + std::abs(fc);
            bool affine = true;
            for (std::size_t i = 0; i < r && affine; ++i) {
                Vec plus = center, minus = center;
                plus[i] = set.hi_vec[i];
                minus[i] = set.lo_vec[i];
                const double fp = objective(plus), fmn = objective(minus);
                scale = std::max(scale, 1.0 + std::max(std::abs(fp), std::abs(fmn)));
                if (std::abs(fc - 0.5 * (fp + fmn)) > cfg.affine_tol * scale) affine = false;
            }
            // Cross-term probe: affine functions match their corner interpolant.
            if (affine && r >= 2) {
                Vec corner = set.lo_vec;
                double predicted = fc;
                for (std::size_t i = 0; i < r; ++i) {
                    Vec plus = center;
                    plus[i] = set.hi_vec[i];
                    Vec minus = center;
                    minus[i] = set.lo_vec[i];
                    predicted += 0.5 * (objective(minus) - objective(plus));
                }
                if (std::abs(objective(corner) - predicted) > cfg.affine_tol * scale)
                    affine = false;
            }
            if (affine) {
                if (r > 16) throw CapabilityError("Box corner scan limited to 16 dimensions");
                std::vector<Vec> corners;
                corners.reserve(std::size_t{1} << r);
                for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << r); ++mask) {
                    Vec c(r);
                    for (std::size_t i = 0; i < r; ++i)
                        c[i] = (mask >> i) & 1 ? set.hi_vec[i] : set.lo_vec[i];
                    corners.push_back(std::move(c));
                }
                return scan_points(corners, objective, false);
            }
            if (!cfg.allow_grid)
                throw CapabilityError("non-affine objective on Box with grid disabled");
            if (r > 3) throw CapabilityError("Box grid fallback limited to 3 dimensions");
            std::vector<Vec> grid;
            std::size_t total = 1;
            for (std::size_t i = 0; i < r; ++i) total *= cfg.axis_samples;
            grid.reserve(total);
            for (std::size_t flat = 0; flat < total; ++flat) {
                Vec u(r);
                std::size_t rem = flat;
                for (std::size_t i = 0; i < r; ++i) {
                    const std::size_t idx = rem % cfg.axis_samples;
                    rem /= cfg.axis_samples;
                    const double w = static_cast<double>(idx) / (cfg.axis_samples - 1);
                    u[i] = set.lo_vec[i] + w * (set.hi_vec[i] - set.lo_vec[i]);
                }
                grid.push_back(std::move(u));
            }
            return scan_points(grid, objective, true);
        }

        case ControlSetSpec::Kind::Sphere: {
            if (set.dimension != 2)
                throw CapabilityError("Sphere control sets supported in 2-D only");
            const double r = set.radius;
            const Vec e1p{r, 0.0}, e1m{-r, 0.0}, e2p{0.0, r}, e2m{0.0, -r};
            const double f1p = objective(e1p), f1m = objective(e1m);
            const double f2p = objective(e2p), f2m = objective(e2m);
            const double a1 = (f1p - f1m) / (2.0 * r);
            const double a2 = (f2p - f2m) / (2.0 * r);
            const double c1 = 0.5 * (f1p + f1m);
            const double c2 = 0.5 * (f2p + f2m);
            const double scale =
                1.0 + std::max({std::abs(f1p), std::abs(f1m), std::abs(f2p), std::abs(f2m)});
            bool affine = std::abs(c1 - c2) <= cfg.affine_tol * scale;
            for (int k = 0; k < 8 && affine; ++k) {
                const double th = 0.37 + 2.0 * M_PI * k / 8.0;
                const Vec u{r * std::cos(th), r * std::sin(th)};
                const double predicted = c1 + a1 * u[0] + a2 * u[1];
                if (std::abs(objective(u) - predicted) > cfg.affine_tol * scale) affine = false;
            }
            if (affine) {
                const double an = std::hypot(a1, a2);
                if (an <= 1e-300) {
                    const Vec arg{-r, 0.0};
                    return {c1, arg, false};
                }
                const Vec arg{r * a1 / an, r * a2 / an};
                return {c1 + r * an, arg, false};
            }
            if (!cfg.allow_grid)
                throw CapabilityError("non-affine objective on Sphere with grid disabled");
            std::vector<Vec> grid;
            grid.reserve(cfg.sphere_samples);
            for (int k = 0; k < cfg.sphere_samples; ++k) {
                const double th = 2.0 * M_PI * k / cfg.sphere_samples;
                grid.push_back({r * std::cos(th), r * std::sin(th)});
            }
            return scan_points(grid, objective, true);
        }
    }
    throw ConfigError("unknown control set kind");
}

MaxResult hamiltonian_max(const ControlSystem& sys, std::size_t mode, double t, const Vec& x,
                          const Vec& psi, const MaximizeConfig& cfg) {
    if (psi.size() != sys.state_dim) throw ConfigError("costate dimension mismatch");
    const ModeDynamics& md = sys.mode(mode);
    auto objective = [&](const Vec& u) { return dot(psi, md.f(t, x, u)); };
    return maximize_over_control_set(sys.control_set(mode), objective, cfg);
}

// ============================================================================
// Chattering and distances
// ============================================================================

Vec PiecewiseControl::at(double t) const {
    if (knots.empty() || values.empty()) throw ConfigError("empty piecewise control");
    if (t <= knots.front()) return values.front();
    if (t >= knots.back()) return values.back();
    auto it = std::upper_bound(knots.begin(), knots.end(), t);
    std::size_t idx = static_cast<std::size_t>(it - knots.begin());
    if (idx > 0) --idx;
    if (idx >= values.size()) idx = values.size() - 1;
    return values[idx];
}

void PiecewiseControl::validate() const {
    if (knots.size() != values.size() + 1) throw ConfigError("piecewise control shape mismatch");
    for (std::size_t i = 1; i < knots.size(); ++i)
        if (!(knots[i] > knots[i - 1])) throw ConfigError("piecewise knots not increasing");
}

PiecewiseControl chatter_approximate(const GeneralizedControl& mu, double period) {
    if (!(period > 0.0)) throw ConfigError("chatter period must be positive");
    PiecewiseControl out;
    for (const auto& piece : mu.pieces) {
        const double len = piece.t_end - piece.t_begin;
        std::size_t cycles = static_cast<std::size_t>(std::llround(len / period));
        if (cycles == 0) cycles = 1;
        const double clen = len / static_cast<double>(cycles);
        for (std::size_t c = 0; c < cycles; ++c) {
            const double c0 = piece.t_begin + static_cast<double>(c) * clen;
            double cum = 0.0;
            for (const auto& atom : piece.atoms) {
                if (atom.weight <= 0.0) continue;
                const double a0 = c0 + cum * clen;
                cum += atom.weight;
                if (out.knots.empty()) out.knots.push_back(a0);
                out.values.push_back(atom.point);
                out.knots.push_back(c0 + std::min(cum, 1.0) * clen);
            }
        }
    }
    // Snap the tail to the exact piece end.
    if (!mu.pieces.empty() && !out.knots.empty()) out.knots.back() = mu.pieces.back().t_end;
    out.validate();
    return out;
}

Trajectory integrate_with_piecewise_control(const ControlSystem& sys, std::size_t mode,
                                            const PiecewiseControl& u, const Vec& x0, double ta,
                                            double tb, const SimConfig& cfg) {
    cfg.validate();
    u.validate();
    const ModeDynamics& md = sys.mode(mode);
    Trajectory traj;
    traj.times.push_back(ta);
    traj.states.push_back(x0);
    traj.modes.push_back(static_cast<int>(mode));
    Vec x = x0;
    double t = ta;
    for (std::size_t piece = 0; piece < u.values.size() && t < tb - 1e-15; ++piece) {
        const double p0 = std::max(ta, u.knots[piece]);
        const double p1 = std::min(tb, u.knots[piece + 1]);
        if (p1 <= t + 1e-15) continue;
        const Vec held = u.values[piece];
        auto rhs = [&](double tt, const Vec& xx) { return md.f(tt, xx, held); };
        std::size_t n = static_cast<std::size_t>(std::ceil((p1 - p0) / cfg.dt - 1e-12));
        if (n == 0) n = 1;
        for (std::size_t k = 1; k <= n; ++k) {
            const double t_next = (k == n) ? p1 : p0 + static_cast<double>(k) * cfg.dt;
            x = rk4_step(rhs, t, x, t_next - t);
            t = t_next;
            if (!all_finite(x)) throw IntegrationError("integration blow-up", t);
            if (cfg.dense_output || (k == n && piece + 1 == u.values.size()))
                if (t > traj.times.back() + 1e-15) {
                    traj.times.push_back(t);
                    traj.states.push_back(x);
                    traj.modes.push_back(static_cast<int>(mode));
                }
        }
    }
    if (traj.times.back() < tb - 1e-15) {
        // Past the last knot: hold the final value.
        const Vec held = u.values.back();
        auto rhs = [&](double tt, const Vec& xx) { return md.f(tt, xx, held); };
        std::size_t n = static_cast<std::size_t>(std::ceil((tb - t) / cfg.dt - 1e-12));
        if (n == 0) n = 1;
        const double p0 = t;
        for (std::size_t k = 1; k <= n; ++k) {
            const double t_next = (k == n) ? tb : p0 + static_cast<double>(k) * cfg.dt;
            x = rk4_step(rhs, t, x, t_next - t);
            t = t_next;
            traj.times.push_back(t);
            traj.states.push_back(x);
            traj.modes.push_back(static_cast<int>(mode));
        }
    }
    return traj;
}

double trajectory_distance(const Trajectory& a, const Trajectory& b, TrajNorm norm) {
    if (a.times.size() != b.times.size())
        throw ConfigError("trajectory_distance: grids differ in length");
    if (a.states.empty()) return 0.0;
    if (a.states.front().size() != b.states.front().size())
        throw ConfigError("trajectory_distance: state dimensions differ");
    for (std::size_t i = 0; i < a.times.size(); ++i)
        if (std::abs(a.times[i] - b.times[i]) > 1e-12 * (1.0 + std::abs(a.times[i])))
            throw ConfigError("trajectory_distance: grids differ; resample first");

    double c0 = 0.0;
    for (std::size_t i = 0; i < a.times.size(); ++i)
        c0 = std::max(c0, norm2(sub(a.states[i], b.states[i])));
    if (norm == TrajNorm::C0) return c0;

    double c1d = 0.0;
    for (std::size_t i = 0; i + 1 < a.times.size(); ++i) {
        const double h = a.times[i + 1] - a.times[i];
        Vec da = scaled(sub(a.states[i + 1], a.states[i]), 1.0 / h);
        Vec db = scaled(sub(b.states[i + 1], b.states[i]), 1.0 / h);
        c1d = std::max(c1d, norm2(sub(da, db)));
    }
    return c0 + c1d;
}

}  // namespace optcert
