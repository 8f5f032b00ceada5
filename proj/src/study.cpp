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

#include "optcert/study.hpp"

#include <algorithm>
#include <cmath>

namespace optcert {

namespace {

struct FitResult {
    double slope = 0.0;
    double r2 = 0.0;
};

FitResult loglog_fit(const std::vector<double>& xs, const std::vector<double>& ys) {
    FitResult fit;
    const std::size_t n = xs.size();
    std::vector<double> lx(n), ly(n);
    for (std::size_t i = 0; i < n; ++i) {
        lx[i] = std::log(xs[i]);
        ly[i] = std::log(std::max(ys[i], 1e-300));
    }
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += lx[i];
        my += ly[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (lx[i] - mx) * (lx[i] - mx);
        sxy += (lx[i] - mx) * (ly[i] - my);
        syy += (ly[i] - my) * (ly[i] - my);
    }
    if (sxx <= 0.0) return fit;
    fit.slope = sxy / sxx;
    if (syy <= 1e-300) {
        fit.r2 = 0.0;  // flat data: no rate to speak of
        return fit;
    }
    double ssres = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double pred = my + fit.slope * (lx[i] - mx);
        ssres += (ly[i] - pred) * (ly[i] - pred);
    }
    fit.r2 = 1.0 - ssres / syy;
    return fit;
}

struct RootProbe {
    bool attained = false;
    double omega = 0.0;
    double residual = 0.0;
};

RootProbe omega_attainment_probe(double epsilon, double t_eval, double target) {
    auto defect = [&](double omega) {
        return nonholonomic_closed_x3(epsilon, omega, t_eval) - target;
    };
    const double lo = 0.05, hi = 50.0;
    const int scan = 4000;
    RootProbe probe;
    double prev_omega = lo;
    double prev_g = defect(lo);
    probe.omega = lo;
    probe.residual = std::abs(prev_g);
    bool bracketed = false;
    double bl = 0.0, bh = 0.0;
    for (int i = 1; i <= scan; ++i) {
        const double w = lo * std::pow(hi / lo, static_cast<double>(i) / scan);
        const double g = defect(w);
        if (std::abs(g) < probe.residual) {
            probe.residual = std::abs(g);
            probe.omega = w;
        }
        if (!bracketed && ((prev_g < 0.0 && g > 0.0) || (prev_g > 0.0 && g < 0.0))) {
            bracketed = true;
            bl = prev_omega;
            bh = w;
        }
        prev_omega = w;
        prev_g = g;
    }
    if (bracketed) {
        double gl = defect(bl);
        for (int it = 0; it < 200; ++it) {
            const double mid = 0.5 * (bl + bh);
            const double gm = defect(mid);
            if ((gl < 0.0) == (gm < 0.0)) {
                bl = mid;
                gl = gm;
            } else {
                bh = mid;
            }
        }
        probe.omega = 0.5 * (bl + bh);
        probe.residual = std::abs(defect(probe.omega));
    }
    probe.attained = probe.residual <= 1e-6;
    return probe;
}

}  // namespace

ConvergenceStudy run_convergence_study(const std::vector<double>& epsilons,
                                       const ScenarioParams& params) {
    if (epsilons.size() < 4)
        throw ConfigError("convergence study needs at least 4 epsilon values");
    const auto [mn, mx] = std::minmax_element(epsilons.begin(), epsilons.end());
    if (!(*mx / *mn >= 10.0 - 1e-12))
        throw ConfigError("epsilon values must span at least one decade");

    ConvergenceStudy study;
    SimConfig sim;
    sim.dt = params.dt;
    sim.event_tol = params.event_tol;

    for (double eps : epsilons) {
        ScenarioParams p = params;
        p.epsilon = eps;
        const double omega = p.omega > 0.0 ? p.omega : 2.0 * eps;

        ControlSignal u = nonholonomic_oscillating_control(eps, omega);
        NonholonomicBuild nb = build_nonholonomic(p);
        auto rhs = [&](double t, const Vec& x) {
            return nb.system.modes[0].f(t, x, u(t));
        };
        Trajectory traj = integrate_ode(rhs, {0.0, 0.0, 0.0}, 0.0, p.horizon, sim);

        Trajectory straight;
        straight.times = traj.times;
        straight.modes = traj.modes;
        straight.states.reserve(traj.times.size());
        for (double t : traj.times) straight.states.push_back(Vec{0.0, 0.0, t});

        ConvergenceRow row;
        row.epsilon = eps;
        row.omega = omega;
        row.c0 = trajectory_distance(traj, straight, TrajNorm::C0);
        row.c1 = trajectory_distance(traj, straight, TrajNorm::C1);
        const double t_eval = std::max(traj.times.front(), p.horizon - eps * eps);
        row.terminal_defect = traj.state_at(t_eval)[2] - p.horizon;

        RootProbe probe = omega_attainment_probe(eps, t_eval, p.horizon);
        row.rootfind_attained = probe.attained;
        row.rootfind_omega = probe.omega;
        row.rootfind_residual = probe.residual;
        study.rows.push_back(row);
    }

    std::vector<double> eps_list, c0_list, c1_list;
    for (const auto& r : study.rows) {
        eps_list.push_back(r.epsilon);
        c0_list.push_back(r.c0);
        c1_list.push_back(r.c1);
    }
    const FitResult f0 = loglog_fit(eps_list, c0_list);
    const FitResult f1 = loglog_fit(eps_list, c1_list);
    study.slope_c0 = f0.slope;
    study.r2_c0 = f0.r2;
    study.slope_c1 = f1.slope;
    study.r2_c1 = f1.r2;
    study.clean_rate_c0 = f0.r2 >= 0.99;
    study.clean_rate_c1 = f1.r2 >= 0.99;
    return study;
}

}  // namespace optcert
