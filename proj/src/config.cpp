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

#include "optcert/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace optcert {

namespace {

Vec parse_double_list(const std::string& text, const std::string& key) {
    Vec out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t pos = 0;
            out.push_back(std::stod(item, &pos));
            while (pos < item.size() && std::isspace(static_cast<unsigned char>(item[pos])))
                ++pos;
            if (pos != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw ConfigError("key '" + key + "': cannot parse number '" + item + "'");
        }
    }
    if (out.empty()) throw ConfigError("key '" + key + "': empty list");
    return out;
}

double parse_double(const std::string& text, const std::string& key) {
    try {
        std::size_t pos = 0;
        double v = std::stod(text, &pos);
        while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
        if (pos != text.size()) throw std::invalid_argument(text);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("key '" + key + "': cannot parse number '" + text + "'");
    }
}

struct KeyEntry {
    std::string section;
    std::function<void(ScenarioConfig&, const std::string&)> apply;
};

void check_positive(double v, const std::string& key) {
    if (!(v > 0.0)) throw ConfigError("key '" + key + "': value " + std::to_string(v) +
                                      " out of range (must be > 0)");
}

void check_unit_open(double v, const std::string& key) {
    if (!(v > 0.0 && v < 1.0))
        throw ConfigError("key '" + key + "': value " + std::to_string(v) +
                          " out of range (must lie in (0, 1))");
}

const std::map<std::string, KeyEntry>& registry() {
    static const std::map<std::string, KeyEntry> table = [] {
        std::map<std::string, KeyEntry> t;
        auto scalar = [&t](const std::string& key, double ScenarioParams::*field,
                           void (*validate)(double, const std::string&) = nullptr) {
            t[key] = {"scenario", [key, field, validate](ScenarioConfig& c, const std::string& v) {
                          const double parsed = parse_double(v, key);
                          if (validate) validate(parsed, key);
                          c.params.*field = parsed;
                      }};
        };
        t["name"] = {"scenario",
                     [](ScenarioConfig& c, const std::string& v) { c.name = v; }};
        scalar("dt", &ScenarioParams::dt, check_positive);
        scalar("em_dt", &ScenarioParams::em_dt, check_positive);
        scalar("event_tol", &ScenarioParams::event_tol, check_positive);
        scalar("epsilon", &ScenarioParams::epsilon, check_positive);
        scalar("omega", &ScenarioParams::omega, check_positive);
        scalar("horizon", &ScenarioParams::horizon, check_positive);
        scalar("delta", &ScenarioParams::delta, check_positive);
        scalar("e1", &ScenarioParams::e1, check_unit_open);
        scalar("e2", &ScenarioParams::e2, check_unit_open);
        scalar("gravity", &ScenarioParams::gravity, check_positive);
        scalar("u_max", &ScenarioParams::u_max, check_positive);
        scalar("y0", &ScenarioParams::y0);
        scalar("v0", &ScenarioParams::v0);
        scalar("y_switch", &ScenarioParams::y_switch, check_positive);
        scalar("alpha1", &ScenarioParams::alpha1, check_positive);
        scalar("alpha2", &ScenarioParams::alpha2, check_positive);
        scalar("beta1", &ScenarioParams::beta1);
        scalar("beta2", &ScenarioParams::beta2);
        scalar("sigma1", &ScenarioParams::sigma1);
        scalar("sigma2", &ScenarioParams::sigma2);
        scalar("lambda", &ScenarioParams::lambda_weight, check_positive);
        scalar("t_low", &ScenarioParams::t_low);
        scalar("t_high", &ScenarioParams::t_high);
        scalar("x_d", &ScenarioParams::x_target);
        scalar("x0", &ScenarioParams::x_init);
        scalar("t_final", &ScenarioParams::t_final, check_positive);
        scalar("temp_u_max", &ScenarioParams::temp_u_max, check_positive);
        scalar("terminal_nominal", &ScenarioParams::terminal_nominal);

        t["command"] = {"run",
                        [](ScenarioConfig& c, const std::string& v) { c.run.command = v; }};
        t["seed"] = {"run", [](ScenarioConfig& c, const std::string& v) {
                         c.run.seed = static_cast<std::uint64_t>(
                             std::llround(parse_double(v, "seed")));
                     }};
        t["tol"] = {"run", [](ScenarioConfig& c, const std::string& v) {
                        const double parsed = parse_double(v, "tol");
                        check_positive(parsed, "tol");
                        c.run.tol = parsed;
                    }};
        t["n_paths"] = {"run", [](ScenarioConfig& c, const std::string& v) {
                            const double parsed = parse_double(v, "n_paths");
                            if (parsed < 1)
                                throw ConfigError("key 'n_paths': must be >= 1");
                            c.run.n_paths = static_cast<std::size_t>(parsed);
                        }};
        t["check_paths"] = {"run", [](ScenarioConfig& c, const std::string& v) {
                                const double parsed = parse_double(v, "check_paths");
                                if (parsed < 1)
                                    throw ConfigError("key 'check_paths': must be >= 1");
                                c.run.check_paths = static_cast<std::size_t>(parsed);
                            }};
        t["angular_grid"] = {"run", [](ScenarioConfig& c, const std::string& v) {
                                 const double parsed = parse_double(v, "angular_grid");
                                 if (parsed < 8)
                                     throw ConfigError(
                                         "key 'angular_grid': needs >= 8 samples");
                                 c.run.angular_grid = static_cast<int>(parsed);
                             }};
        t["workers"] = {"run", [](ScenarioConfig& c, const std::string& v) {
                            const double parsed = parse_double(v, "workers");
                            if (parsed < 1) throw ConfigError("key 'workers': must be >= 1");
                            c.run.workers = static_cast<int>(parsed);
                        }};
        t["out_dir"] = {"run",
                        [](ScenarioConfig& c, const std::string& v) { c.run.out_dir = v; }};
        t["sense"] = {"run", [](ScenarioConfig& c, const std::string& v) {
                          const int s = static_cast<int>(parse_double(v, "sense"));
                          if (s != -1 && s != 1)
                              throw ConfigError("key 'sense': must be -1 or 1");
                          c.run.sense = s;
                      }};
        t["psi0"] = {"run", [](ScenarioConfig& c, const std::string& v) {
                         c.run.psi0 = parse_double_list(v, "psi0");
                     }};
        t["multipliers"] = {"run", [](ScenarioConfig& c, const std::string& v) {
                                c.run.multipliers = parse_double_list(v, "multipliers");
                            }};
        t["epsilons"] = {"run", [](ScenarioConfig& c, const std::string& v) {
                             c.run.epsilons = parse_double_list(v, "epsilons");
                         }};
        t["q0_diag"] = {"run", [](ScenarioConfig& c, const std::string& v) {
                            c.run.q0_diag = parse_double_list(v, "q0_diag");
                        }};
        t["q_slope_diag"] = {"run", [](ScenarioConfig& c, const std::string& v) {
                                 c.run.q_slope_diag = parse_double_list(v, "q_slope_diag");
                             }};
        t["strict"] = {"run", [](ScenarioConfig& c, const std::string& v) {
                           if (v != "0" && v != "1" && v != "true" && v != "false")
                               throw ConfigError("key 'strict': expected 0/1/true/false");
                           c.run.strict = (v == "1" || v == "true");
                       }};
        return t;
    }();
    return table;
}

}  // namespace

bool is_known_builtin(const std::string& name) {
    return name == "nonholonomic" || name == "friction" || name == "bouncing-ball" ||
           name == "temperature";
}

ScenarioConfig parse_scenario_text(const std::string& text, const std::string& origin) {
    ScenarioConfig cfg;
    std::vector<std::string> problems;
    std::map<std::string, int> seen_lines;

    std::stringstream ss(text);
    std::string line;
    int line_no = 0;
    std::string section;
    while (std::getline(ss, line)) {
        ++line_no;
        std::string stripped = line;
        const auto hash = stripped.find('#');
        if (hash != std::string::npos) stripped.resize(hash);
        auto is_space = [](unsigned char c) { return std::isspace(c) != 0; };
        while (!stripped.empty() && is_space(stripped.back())) stripped.pop_back();
        std::size_t begin = 0;
        while (begin < stripped.size() && is_space(stripped[begin])) ++begin;
        stripped = stripped.substr(begin);
        if (stripped.empty()) continue;

        if (stripped.front() == '[') {
            if (stripped.back() != ']') {
                problems.push_back(origin + ":" + std::to_string(line_no) +
                                   ": unterminated section header");
                continue;
            }
            section = stripped.substr(1, stripped.size() - 2);
            if (section != "scenario" && section != "run")
                problems.push_back(origin + ":" + std::to_string(line_no) +
                                   ": unknown section [" + section + "]");
            continue;
        }

        const auto eq = stripped.find('=');
        if (eq == std::string::npos) {
            problems.push_back(origin + ":" + std::to_string(line_no) + ":" +
                               std::to_string(begin + 1) + ": expected 'key = value'");
            continue;
        }
        std::string key = stripped.substr(0, eq);
        std::string value = stripped.substr(eq + 1);
        while (!key.empty() && is_space(key.back())) key.pop_back();
        std::size_t vb = 0;
        while (vb < value.size() && is_space(value[vb])) ++vb;
        value = value.substr(vb);

        const auto& table = registry();
        auto it = table.find(key);
        if (it == table.end()) {
            problems.push_back(origin + ":" + std::to_string(line_no) + ": unknown key '" +
                               key + "'");
            continue;
        }
        if (!section.empty() && it->second.section != section) {
            problems.push_back(origin + ":" + std::to_string(line_no) + ": key '" + key +
                               "' belongs to section [" + it->second.section + "]");
            continue;
        }
        auto dup = seen_lines.find(key);
        if (dup != seen_lines.end()) {
            problems.push_back(origin + ":" + std::to_string(line_no) + ": duplicate key '" +
                               key + "' (first set on line " + std::to_string(dup->second) +
                               ")");
            continue;
        }
        seen_lines[key] = line_no;
        try {
            it->second.apply(cfg, value);
        } catch (const ConfigError& e) {
            problems.push_back(origin + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }

    if (!cfg.name.empty() && !is_known_builtin(cfg.name))
        problems.push_back(origin + ": unknown scenario name '" + cfg.name + "'");
    if (cfg.name.empty())
        problems.push_back(origin + ": missing required key 'name' in [scenario]");

    if (!problems.empty()) {
        std::string all;
        for (const auto& p : problems) {
            if (!all.empty()) all += "\n";
            all += p;
        }
        throw ConfigError(all);
    }
    return cfg;
}

ScenarioConfig load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read scenario file '" + path + "'");
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_scenario_text(buffer.str(), path);
}

void save_scenario(const ScenarioConfig& cfg, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write scenario file '" + path + "'");
    char buf[64];
    auto num = [&buf](double v) {
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        return std::string(buf);
    };
    auto list = [&num](const Vec& v) {
        std::string s;
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (i) s += ",";
            s += num(v[i]);
        }
        return s;
    };
    const ScenarioParams& p = cfg.params;
    out << "[scenario]\n";
    out << "name = " << cfg.name << "\n";
    out << "dt = " << num(p.dt) << "\n";
    out << "em_dt = " << num(p.em_dt) << "\n";
    out << "event_tol = " << num(p.event_tol) << "\n";
    out << "epsilon = " << num(p.epsilon) << "\n";
    if (p.omega > 0.0) out << "omega = " << num(p.omega) << "\n";
    out << "horizon = " << num(p.horizon) << "\n";
    out << "delta = " << num(p.delta) << "\n";
    out << "e1 = " << num(p.e1) << "\n";
    out << "e2 = " << num(p.e2) << "\n";
    out << "gravity = " << num(p.gravity) << "\n";
    out << "u_max = " << num(p.u_max) << "\n";
    out << "y0 = " << num(p.y0) << "\n";
    out << "v0 = " << num(p.v0) << "\n";
    out << "y_switch = " << num(p.y_switch) << "\n";
    out << "alpha1 = " << num(p.alpha1) << "\n";
    out << "alpha2 = " << num(p.alpha2) << "\n";
    out << "beta1 = " << num(p.beta1) << "\n";
    out << "beta2 = " << num(p.beta2) << "\n";
    out << "sigma1 = " << num(p.sigma1) << "\n";
    out << "sigma2 = " << num(p.sigma2) << "\n";
    out << "lambda = " << num(p.lambda_weight) << "\n";
    out << "t_low = " << num(p.t_low) << "\n";
    out << "t_high = " << num(p.t_high) << "\n";
    out << "x_d = " << num(p.x_target) << "\n";
    out << "x0 = " << num(p.x_init) << "\n";
    out << "t_final = " << num(p.t_final) << "\n";
    out << "temp_u_max = " << num(p.temp_u_max) << "\n";
    if (p.terminal_nominal > 0.0)
        out << "terminal_nominal = " << num(p.terminal_nominal) << "\n";
    out << "\n[run]\n";
    if (!cfg.run.command.empty()) out << "command = " << cfg.run.command << "\n";
    out << "seed = " << cfg.run.seed << "\n";
    out << "tol = " << num(cfg.run.tol) << "\n";
    out << "n_paths = " << cfg.run.n_paths << "\n";
    out << "check_paths = " << cfg.run.check_paths << "\n";
    out << "angular_grid = " << cfg.run.angular_grid << "\n";
    out << "workers = " << cfg.run.workers << "\n";
    if (!cfg.run.out_dir.empty()) out << "out_dir = " << cfg.run.out_dir << "\n";
    out << "sense = " << cfg.run.sense << "\n";
    if (!cfg.run.psi0.empty()) out << "psi0 = " << list(cfg.run.psi0) << "\n";
    if (!cfg.run.multipliers.empty())
        out << "multipliers = " << list(cfg.run.multipliers) << "\n";
    if (!cfg.run.epsilons.empty()) out << "epsilons = " << list(cfg.run.epsilons) << "\n";
    if (!cfg.run.q0_diag.empty()) out << "q0_diag = " << list(cfg.run.q0_diag) << "\n";
    if (!cfg.run.q_slope_diag.empty())
        out << "q_slope_diag = " << list(cfg.run.q_slope_diag) << "\n";
    out << "strict = " << (cfg.run.strict ? 1 : 0) << "\n";
}

void apply_override(ScenarioConfig& cfg, const std::string& key_value) {
    const auto eq = key_value.find('=');
    if (eq == std::string::npos)
        throw ConfigError("--set expects key=value, got '" + key_value + "'");
    const std::string key = key_value.substr(0, eq);
    const std::string value = key_value.substr(eq + 1);
    const auto& table = registry();
    auto it = table.find(key);
    if (it == table.end()) throw ConfigError("unknown key '" + key + "' in --set");
    it->second.apply(cfg, value);
}

}  // namespace optcert
