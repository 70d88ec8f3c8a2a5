#include "mmgsim/config.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

namespace mmgsim {

namespace {

constexpr double kPi = 3.14159265358979323846;

std::string trim(const std::string& s) {
    size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

bool parse_double(const std::string& s, double& out) {
    const std::string t = trim(s);
    if (t.empty()) return false;
    char* end = nullptr;
    out = std::strtod(t.c_str(), &end);
    return end == t.c_str() + t.size() && std::isfinite(out);
}

bool parse_bool(const std::string& s, bool& out) {
    const std::string t = trim(s);
    if (t == "0" || t == "false") { out = false; return true; }
    if (t == "1" || t == "true") { out = true; return true; }
    return false;
}

struct Binding {
    enum class Type { Double, Bool, String };
    std::string section;
    std::string key;
    Type type;
    std::function<void(double)> set_double;
    std::function<void(bool)> set_bool;
    std::function<void(const std::string&)> set_string;
};

// Values that feed several config fields after parsing.
struct Temps {
    double frequency_hz = 60.0;
    double meter_cutoff_hz = 5.0;
    double kr1 = 100.0, kr3 = 50.0, kr5 = 20.0, kr7 = 20.0;
};

std::vector<Binding> make_bindings(ScenarioConfig& c, Temps& t) {
    std::vector<Binding> b;
    auto dbl = [&b](const char* sec, const char* key, std::function<void(double)> f) {
        b.push_back({sec, key, Binding::Type::Double, std::move(f), nullptr, nullptr});
    };
    auto bol = [&b](const char* sec, const char* key, std::function<void(bool)> f) {
        b.push_back({sec, key, Binding::Type::Bool, nullptr, std::move(f), nullptr});
    };
    auto str = [&b](const char* sec, const char* key,
                    std::function<void(const std::string&)> f) {
        b.push_back({sec, key, Binding::Type::String, nullptr, nullptr, std::move(f)});
    };

    dbl("simulation", "dt_plant_s", [&c](double v) { c.sim.dt_plant_s = v; });
    dbl("simulation", "dt_ctrl_s", [&c](double v) { c.sim.dt_ctrl_s = v; });
    dbl("simulation", "dt_log_s", [&c](double v) { c.sim.dt_log_s = v; });
    dbl("simulation", "t_end_s", [&c](double v) { c.sim.t_end_s = v; });
    dbl("simulation", "seed", [&c](double v) {
        c.sim.seed = static_cast<unsigned long long>(v);
    });
    dbl("simulation", "load_jitter_pct", [&c](double v) { c.sim.load_jitter_pct = v; });
    str("simulation", "output_csv", [&c](const std::string& v) { c.sim.output_csv = v; });

    auto& p = c.plant;
    dbl("plant", "frequency_hz", [&t](double v) { t.frequency_hz = v; });
    dbl("plant", "v_nominal_peak_v", [&p](double v) { p.v_nominal_peak = v; });
    dbl("plant", "source_emf_peak_v", [&p](double v) { p.source_emf_peak = v; });
    dbl("plant", "line_r_ohm", [&p](double v) { p.line_z.real(v); });
    dbl("plant", "line_x_ohm", [&p](double v) { p.line_z.imag(v); });
    const char* load_p[3] = {"pcc_load_a_p_w", "pcc_load_b_p_w", "pcc_load_c_p_w"};
    const char* load_q[3] = {"pcc_load_a_q_var", "pcc_load_b_q_var", "pcc_load_c_q_var"};
    for (int ph = 0; ph < 3; ++ph) {
        dbl("plant", load_p[ph], [&p, ph](double v) { p.pcc_load[ph].real(v); });
        dbl("plant", load_q[ph], [&p, ph](double v) { p.pcc_load[ph].imag(v); });
    }
    dbl("plant", "tie_r_ohm", [&p](double v) { p.tie_z.real(v); });
    dbl("plant", "tie_x_ohm", [&p](double v) { p.tie_z.imag(v); });
    dbl("plant", "pv_filter_r_ohm", [&p](double v) { p.pv_filter_z.real(v); });
    dbl("plant", "pv_filter_x_ohm", [&p](double v) { p.pv_filter_z.imag(v); });
    dbl("plant", "pv_filter_c_f", [&p](double v) { p.pv_filter_c = v; });
    dbl("plant", "pv_p_mppt_w", [&p](double v) { p.pv_p_mppt = v; });
    bol("plant", "pv_p_regulated", [&p](bool v) { p.pv_p_regulated = v; });
    dbl("plant", "sp_load_p_w", [&p](double v) { p.sp_load.real(v); });
    dbl("plant", "sp_load_q_var", [&p](double v) { p.sp_load.imag(v); });
    bol("plant", "sp_load_const_power", [&p](bool v) { p.sp_load_const_power = v; });
    dbl("plant", "ess_filter_l_h", [&p](double v) { p.ess_filter_l = v; });
    dbl("plant", "ess_filter_r_ohm", [&p](double v) { p.ess_filter_r = v; });
    dbl("plant", "ess_i_ceiling_a", [&p](double v) { p.ess_i_ceiling = v; });

    auto& k = c.ctrl;
    dbl("controller", "q_load_rated_var", [&k](double v) { k.q_load_rated_var = v; });
    dbl("controller", "p_rated_3ph_w", [&k](double v) { k.ratings.p_rated_three_phase = v; });
    dbl("controller", "p_rated_1ph_w", [&k](double v) { k.ratings.p_rated_single_phase = v; });
    dbl("controller", "meter_cutoff_hz", [&t](double v) { t.meter_cutoff_hz = v; });
    dbl("controller", "rpc_ki", [&k](double v) { k.gains.rpc.ki = v; });
    dbl("controller", "rpc_kd", [&k](double v) { k.gains.rpc.kd = v; });
    dbl("controller", "rpc_scale", [&k](double v) { k.gains.rpc.scale = v; });
    dbl("controller", "rpsa_ki", [&k](double v) { k.gains.rpsa.ki = v; });
    dbl("controller", "rpsa_kd", [&k](double v) { k.gains.rpsa.kd = v; });
    dbl("controller", "rpsa_scale", [&k](double v) { k.gains.rpsa.scale = v; });
    dbl("controller", "pbr_ki", [&k](double v) { k.gains.pbr.ki = v; });
    dbl("controller", "pbr_kd", [&k](double v) { k.gains.pbr.kd = v; });
    dbl("controller", "pbr_scale", [&k](double v) { k.gains.pbr.scale = v; });

    dbl("current_loop", "kp", [&k](double v) { k.current_loop.pr.kp = v; });
    dbl("current_loop", "wc_rad_s", [&k](double v) { k.current_loop.pr.wc = v; });
    dbl("current_loop", "kr1", [&t](double v) { t.kr1 = v; });
    dbl("current_loop", "kr3", [&t](double v) { t.kr3 = v; });
    dbl("current_loop", "kr5", [&t](double v) { t.kr5 = v; });
    dbl("current_loop", "kr7", [&t](double v) { t.kr7 = v; });
    dbl("current_loop", "v_dc_v", [&k](double v) { k.current_loop.v_dc = v; });

    dbl("pll", "kp", [&c](double v) { c.pll.kp = v; });
    dbl("pll", "ki", [&c](double v) { c.pll.ki = v; });
    return b;
}

bool parse_event(const std::string& value, Event& ev, std::string& err) {
    std::istringstream in(value);
    std::string time_tok, action;
    if (!(in >> time_tok >> action)) {
        err = "expected '<time_s> <action> [args]'";
        return false;
    }
    if (!parse_double(time_tok, ev.t_s)) {
        err = "bad event time '" + time_tok + "'";
        return false;
    }
    std::vector<double> args;
    std::string tok;
    while (in >> tok) {
        double v;
        if (!parse_double(tok, v)) {
            err = "bad event argument '" + tok + "'";
            return false;
        }
        args.push_back(v);
    }
    size_t want = 0;
    if (action == "enable_rpc") {
        ev.kind = Event::Kind::EnableRpc;
    } else if (action == "enable_rpsa") {
        ev.kind = Event::Kind::EnableRpsa;
    } else if (action == "enable_pbr") {
        ev.kind = Event::Kind::EnablePbr;
    } else if (action == "set_load") {
        ev.kind = Event::Kind::SetLoad;
        want = 2;
    } else if (action == "set_mppt") {
        ev.kind = Event::Kind::SetMppt;
        want = 1;
    } else {
        err = "unknown event action '" + action + "'";
        return false;
    }
    if (args.size() != want) {
        err = "action '" + action + "' takes " + std::to_string(want) + " argument(s), got " +
              std::to_string(args.size());
        return false;
    }
    if (want >= 1) ev.a = args[0];
    if (want >= 2) ev.b = args[1];
    return true;
}

void finalize_derived(ScenarioConfig& c, const Temps& t) {
    const double w0 = 2.0 * kPi * t.frequency_hz;
    c.plant.w0 = w0;
    c.plant.dt = c.sim.dt_plant_s;
    c.pll.w0 = w0;
    c.ctrl.current_loop.pr.w0 = w0;
    c.ctrl.current_loop.pr.resonators[0] = {1, t.kr1};
    c.ctrl.current_loop.pr.resonators[1] = {3, t.kr3};
    c.ctrl.current_loop.pr.resonators[2] = {5, t.kr5};
    c.ctrl.current_loop.pr.resonators[3] = {7, t.kr7};
    c.ctrl.v_nominal_peak = c.plant.v_nominal_peak;
    c.ctrl.p_mppt_w = c.plant.pv_p_mppt;
    c.ctrl.meter_cutoff_rad_s = 2.0 * kPi * t.meter_cutoff_hz;
    c.ctrl.dt_ctrl = c.sim.dt_ctrl_s;
    c.ctrl.dt_plant = c.sim.dt_plant_s;
    std::stable_sort(c.events.begin(), c.events.end(),
                     [](const Event& a, const Event& b) { return a.t_s < b.t_s; });
}

bool is_integer_multiple(double a, double b) {
    if (!(b > 0)) return false;
    const double r = a / b;
    return std::abs(r - std::round(r)) < 1e-6 && std::round(r) >= 1.0;
}

}  // namespace

const char* event_kind_name(Event::Kind kind) {
    switch (kind) {
        case Event::Kind::EnableRpc: return "enable_rpc";
        case Event::Kind::EnableRpsa: return "enable_rpsa";
        case Event::Kind::EnablePbr: return "enable_pbr";
        case Event::Kind::SetLoad: return "set_load";
        case Event::Kind::SetMppt: return "set_mppt";
    }
    return "?";
}

std::vector<std::string> validate_config(const ScenarioConfig& c) {
    std::vector<std::string> errs;
    auto require = [&errs](bool ok, const std::string& msg) {
        if (!ok) errs.push_back(msg);
    };

    require(c.sim.dt_plant_s > 0, "simulation.dt_plant_s must be positive");
    require(c.sim.t_end_s > 0, "simulation.t_end_s must be positive");
    require(is_integer_multiple(c.sim.dt_ctrl_s, c.sim.dt_plant_s),
            "simulation.dt_ctrl_s must be a whole multiple of dt_plant_s");
    require(is_integer_multiple(c.sim.dt_log_s, c.sim.dt_plant_s),
            "simulation.dt_log_s must be a whole multiple of dt_plant_s");
    require(is_integer_multiple(c.sim.t_end_s, c.sim.dt_plant_s),
            "simulation.t_end_s must be a whole multiple of dt_plant_s");

    require(c.plant.w0 > 0, "plant.frequency_hz must be positive");
    require(c.plant.v_nominal_peak > 0, "plant.v_nominal_peak_v must be positive");
    require(c.plant.source_emf_peak > 0, "plant.source_emf_peak_v must be positive");
    require(std::abs(c.plant.line_z) > 0, "plant line impedance must be nonzero");
    require(std::abs(c.plant.tie_z) > 0, "plant tie impedance must be nonzero");
    require(std::abs(c.plant.pv_filter_z) > 0, "plant pv filter impedance must be nonzero");
    require(c.plant.pv_filter_c >= 0, "plant.pv_filter_c_f must be non-negative");
    require(c.plant.ess_filter_l > 0, "plant.ess_filter_l_h must be positive");
    require(c.plant.ess_i_ceiling > 0, "plant.ess_i_ceiling_a must be positive");

    require(c.ctrl.ratings.p_rated_three_phase > 0, "controller.p_rated_3ph_w must be positive");
    require(c.ctrl.ratings.p_rated_single_phase > 0, "controller.p_rated_1ph_w must be positive");
    require(c.ctrl.meter_cutoff_rad_s > 0, "controller.meter_cutoff_hz must be positive");
    for (const auto& [name, g] : {std::pair<const char*, const IaGains&>{"rpc", c.ctrl.gains.rpc},
                                  {"rpsa", c.ctrl.gains.rpsa},
                                  {"pbr", c.ctrl.gains.pbr}}) {
        require(std::isfinite(g.ki) && std::isfinite(g.kd) && std::isfinite(g.scale),
                std::string("controller.") + name + " gains must be finite");
    }
    require(c.ctrl.current_loop.v_dc > 0, "current_loop.v_dc_v must be positive");
    require(c.ctrl.current_loop.pr.kp >= 0, "current_loop.kp must be non-negative");
    require(c.ctrl.current_loop.pr.wc > 0, "current_loop.wc_rad_s must be positive");

    require(c.pll.kp > 0 && c.pll.ki > 0, "pll gains must be positive");

    require(c.sim.load_jitter_pct >= 0 && c.sim.load_jitter_pct < 50,
            "simulation.load_jitter_pct must be in [0, 50)");

    for (const auto& ev : c.events) {
        const std::string tag = std::string("event ") + event_kind_name(ev.kind);
        if (!(ev.t_s >= 0 && ev.t_s < c.sim.t_end_s)) {
            errs.push_back(tag + ": time " + std::to_string(ev.t_s) +
                           " must lie in [0, t_end)");
            continue;
        }
        if (c.sim.dt_ctrl_s > 0) {
            const double r = ev.t_s / c.sim.dt_ctrl_s;
            if (std::abs(r - std::round(r)) > 1e-6) {
                errs.push_back(tag + ": time " + std::to_string(ev.t_s) +
                               " is not on the control-step grid");
            }
        }
        if (ev.kind == Event::Kind::SetMppt && ev.a < 0) {
            errs.push_back(tag + ": power must be non-negative");
        }
    }
    return errs;
}

ConfigResult parse_config_text(const std::string& text) {
    ConfigResult res;
    Temps temps;
    const std::vector<Binding> bindings = make_bindings(res.config, temps);
    const std::set<std::string> known_sections = {"simulation", "plant", "controller",
                                                  "current_loop", "pll", "events"};

    std::istringstream in(text);
    std::string line;
    std::string section;
    bool section_known = false;
    std::set<std::string> seen;
    int line_no = 0;

    auto err = [&res](int ln, const std::string& msg) {
        res.errors.push_back("line " + std::to_string(ln) + ": " + msg);
    };

    while (std::getline(in, line)) {
        ++line_no;
        const size_t hash = line.find('#');
        if (hash != std::string::npos) {
            line.erase(hash);
        }
        line = trim(line);
        if (line.empty()) {
            continue;
        }
        if (line.front() == '[') {
            if (line.back() != ']') {
                err(line_no, "malformed section header '" + line + "'");
                continue;
            }
            section = trim(line.substr(1, line.size() - 2));
            section_known = known_sections.count(section) > 0;
            if (!section_known) {
                err(line_no, "unknown section [" + section + "]");
            }
            continue;
        }
        const size_t eq = line.find('=');
        if (eq == std::string::npos) {
            err(line_no, "expected 'key = value', got '" + line + "'");
            continue;
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (section.empty()) {
            err(line_no, "key '" + key + "' appears before any section header");
            continue;
        }
        if (!section_known) {
            continue;  // already reported the section itself
        }
        if (key.empty()) {
            err(line_no, "empty key");
            continue;
        }

        if (section == "events") {
            if (key != "event") {
                err(line_no, "unknown key '" + key + "' in [events]");
                continue;
            }
            Event ev;
            std::string why;
            if (!parse_event(value, ev, why)) {
                err(line_no, "bad event: " + why);
            } else {
                res.config.events.push_back(ev);
            }
            continue;
        }

        const auto it = std::find_if(bindings.begin(), bindings.end(),
                                     [&](const Binding& b) {
                                         return b.section == section && b.key == key;
                                     });
        if (it == bindings.end()) {
            err(line_no, "unknown key '" + key + "' in [" + section + "]");
            continue;
        }
        const std::string full = section + "." + key;
        if (!seen.insert(full).second) {
            err(line_no, "duplicate key '" + full + "'");
            continue;
        }
        if (it->type == Binding::Type::Double) {
            double v;
            if (!parse_double(value, v)) {
                err(line_no, "bad numeric value '" + value + "' for '" + full + "'");
                continue;
            }
            it->set_double(v);
        } else if (it->type == Binding::Type::Bool) {
            bool v;
            if (!parse_bool(value, v)) {
                err(line_no, "bad boolean value '" + value + "' for '" + full +
                                 "' (use 0/1/true/false)");
                continue;
            }
            it->set_bool(v);
        } else {
            if (value.empty()) {
                err(line_no, "empty value for '" + full + "'");
                continue;
            }
            it->set_string(value);
        }
    }

    // Ratings and loop gains have no sensible universal defaults; a scenario
    // must state them explicitly.
    static const char* kRequired[] = {
        "controller.p_rated_3ph_w", "controller.p_rated_1ph_w",
        "controller.rpc_ki",  "controller.rpc_kd",
        "controller.rpsa_ki", "controller.rpsa_kd",
        "controller.pbr_ki",  "controller.pbr_kd",
    };
    for (const char* key : kRequired) {
        if (!seen.count(key)) {
            res.errors.push_back(std::string("missing required key '") + key + "'");
        }
    }

    finalize_derived(res.config, temps);
    for (auto& e : validate_config(res.config)) {
        res.errors.push_back(std::move(e));
    }
    return res;
}

ConfigResult parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        ConfigResult res;
        res.errors.push_back("cannot open config file: " + path);
        return res;
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str());
}

}  // namespace mmgsim
