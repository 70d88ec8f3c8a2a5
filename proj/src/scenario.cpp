#include "mmgsim/scenario.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <random>
#include <stdexcept>

#include "mmgsim/ess_control.hpp"
#include "mmgsim/plant.hpp"

namespace mmgsim {

namespace {

constexpr double kPi = 3.14159265358979323846;

EssController::Measurements gather(const PlantState& st) {
    EssController::Measurements m;
    const double v_mag = std::abs(st.v_s);
    m.v_bus_dq = {v_mag, 0.0};
    if (v_mag > 1e-9) {
        // Rotating the load current into the bus-voltage frame gives the
        // exact dq pair a locked PLL would report.
        const Complex idq = st.i_sp_load * (std::conj(st.v_s) / v_mag);
        m.i_load_dq = {idq.real(), idq.imag()};
    } else {
        m.i_load_dq = {0.0, 0.0};
    }
    m.q_three_phase = 0.0;
    for (const auto& s : st.s_pcc) {
        m.q_three_phase += s.imag();
    }
    m.q_single_phase = st.s_pv.imag();
    m.v_phase_a_mag = std::abs(st.v_pcc[0]);
    return m;
}

LogRow make_row(double t, const PlantState& st, const EssController& ctrl) {
    LogRow r;
    r.t_s = t;
    r.vuf_pct = vuf_percent(st.v_pcc).percent;
    r.p_pcc_a_w = st.s_pcc[0].real();
    r.p_pcc_b_w = st.s_pcc[1].real();
    r.p_pcc_c_w = st.s_pcc[2].real();
    r.q_pcc_a_var = st.s_pcc[0].imag();
    r.q_pcc_b_var = st.s_pcc[1].imag();
    r.q_pcc_c_var = st.s_pcc[2].imag();
    r.q_pv3ph_var = r.q_pcc_a_var + r.q_pcc_b_var + r.q_pcc_c_var;
    r.q_pv1ph_var = st.s_pv.imag();
    r.p_ess_w = st.s_ess.real();
    r.q_ess_var = st.s_ess.imag();
    r.v_pcc_a_mag_v = std::abs(st.v_pcc[0]);
    r.v_pcc_b_mag_v = std::abs(st.v_pcc[1]);
    r.v_pcc_c_mag_v = std::abs(st.v_pcc[2]);
    r.controller_enabled_rpc = ctrl.rpc_enabled();
    r.controller_enabled_rpsa = ctrl.rpsa_enabled();
    r.controller_enabled_pbr = ctrl.pbr_enabled();
    return r;
}

std::string describe_event(const Event& ev) {
    char buf[96];
    switch (ev.kind) {
        case Event::Kind::SetLoad:
            std::snprintf(buf, sizeof(buf), "%.6f %s %.6f %.6f", ev.t_s,
                          event_kind_name(ev.kind), ev.a, ev.b);
            break;
        case Event::Kind::SetMppt:
            std::snprintf(buf, sizeof(buf), "%.6f %s %.6f", ev.t_s,
                          event_kind_name(ev.kind), ev.a);
            break;
        default:
            std::snprintf(buf, sizeof(buf), "%.6f %s", ev.t_s, event_kind_name(ev.kind));
            break;
    }
    return buf;
}

/// First logged time at which `in_band(row_index)` becomes true and stays
/// true through the end; relative to t_from.
template <typename Pred>
std::optional<double> settle_time(const std::vector<LogRow>& rows, double t_from,
                                  Pred in_band) {
    std::optional<double> candidate;
    for (size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].t_s < t_from) {
            continue;
        }
        if (in_band(i)) {
            if (!candidate) {
                candidate = rows[i].t_s;
            }
        } else {
            candidate.reset();
        }
    }
    if (candidate) {
        return *candidate - t_from;
    }
    return std::nullopt;
}

}  // namespace

void write_csv(const std::vector<LogRow>& rows, std::ostream& out) {
    CsvWriter w(out);
    w.write_header();
    for (const auto& r : rows) {
        w.write_row(r);
    }
}

RunSummary summarize(const ScenarioResult& result, const ScenarioConfig& cfg) {
    RunSummary s;
    const auto& rows = result.rows;
    const auto& probes = result.probes;
    if (rows.empty()) {
        return s;
    }
    const double t_last = rows.back().t_s;

    double first_enable = t_last;
    std::optional<double> t_rpc, t_rpsa, t_pbr;
    for (const auto& ev : cfg.events) {
        switch (ev.kind) {
            case Event::Kind::EnableRpc:
                if (!t_rpc) t_rpc = ev.t_s;
                break;
            case Event::Kind::EnableRpsa:
                if (!t_rpsa) t_rpsa = ev.t_s;
                break;
            case Event::Kind::EnablePbr:
                if (!t_pbr) t_pbr = ev.t_s;
                break;
            default:
                break;
        }
    }
    for (const auto& t : {t_rpc, t_rpsa, t_pbr}) {
        if (t && *t < first_enable) {
            first_enable = *t;
        }
    }

    auto window_mean = [&rows](double t0, double t1, auto field) {
        double sum = 0;
        int n = 0;
        for (const auto& r : rows) {
            if (r.t_s >= t0 && r.t_s < t1) {
                sum += field(r);
                ++n;
            }
        }
        return n > 0 ? sum / n : 0.0;
    };

    s.vuf_before_pct = window_mean(first_enable - 1.0, first_enable,
                                   [](const LogRow& r) { return r.vuf_pct; });
    const double t_fin = t_last - 1.0;
    auto final_mean = [&](auto field) { return window_mean(t_fin, t_last + 1.0, field); };
    s.vuf_after_pct = final_mean([](const LogRow& r) { return r.vuf_pct; });
    s.vuf_improvement =
        s.vuf_after_pct > 0 ? s.vuf_before_pct / s.vuf_after_pct
                            : std::numeric_limits<double>::infinity();

    const double q3 = final_mean([](const LogRow& r) { return r.q_pv3ph_var; });
    const double q1 = final_mean([](const LogRow& r) { return r.q_pv1ph_var; });
    s.sharing_ratio_final = std::abs(q1) > 1e-9 ? q3 / q1 : 0.0;

    s.p_spread_final_pct = max_deviation_from_mean_pct(
        final_mean([](const LogRow& r) { return r.p_pcc_a_w; }),
        final_mean([](const LogRow& r) { return r.p_pcc_b_w; }),
        final_mean([](const LogRow& r) { return r.p_pcc_c_w; }));
    s.q_spread_final_pct = max_deviation_from_mean_pct(
        final_mean([](const LogRow& r) { return r.q_pcc_a_var; }),
        final_mean([](const LogRow& r) { return r.q_pcc_b_var; }),
        final_mean([](const LogRow& r) { return r.q_pcc_c_var; }));

    double q_load_final = 0;
    int n_fin = 0;
    for (const auto& p : probes) {
        if (p.t_s >= t_fin) {
            q_load_final += p.q_load_meas_var;
            ++n_fin;
        }
    }
    s.q_load_final_var = n_fin > 0 ? q_load_final / n_fin : 0.0;

    if (t_pbr) {
        s.vuf_settle_s = settle_time(rows, *t_pbr,
                                     [&](size_t i) { return rows[i].vuf_pct <= 0.5; });
        const double ratio = cfg.ctrl.ratings.sharing_ratio();
        s.balance_settle_s = settle_time(rows, *t_pbr, [&](size_t i) {
            const auto& r = rows[i];
            return max_deviation_from_mean_pct(r.p_pcc_a_w, r.p_pcc_b_w, r.p_pcc_c_w) <=
                       2.0 &&
                   max_deviation_from_mean_pct(r.q_pcc_a_var, r.q_pcc_b_var,
                                               r.q_pcc_c_var) <= 2.0;
        });
        (void)ratio;
    }
    if (t_rpsa) {
        const double ratio = cfg.ctrl.ratings.sharing_ratio();
        s.sharing_settle_s = settle_time(rows, *t_rpsa, [&](size_t i) {
            const auto& r = rows[i];
            if (std::abs(r.q_pv1ph_var) < 1e-9) {
                return false;
            }
            return std::abs(r.q_pv3ph_var / r.q_pv1ph_var - ratio) <= 0.05 * ratio;
        });
    }
    if (t_rpc) {
        const double q_ref = cfg.ctrl.q_load_rated_var;
        s.q_load_settle_s = settle_time(rows, *t_rpc, [&](size_t i) {
            return std::abs(probes[i].q_load_meas_var - q_ref) <= 0.02 * std::abs(q_ref);
        });
    }
    return s;
}

ScenarioResult run_scenario(const ScenarioConfig& cfg) {
    {
        const auto errs = validate_config(cfg);
        if (!errs.empty()) {
            std::string joined = "invalid scenario config:";
            for (const auto& e : errs) {
                joined += "\n  " + e;
            }
            throw std::invalid_argument(joined);
        }
    }

    const double dt = cfg.sim.dt_plant_s;
    const long long steps = std::llround(cfg.sim.t_end_s / dt);
    const long long ctrl_div = std::llround(cfg.sim.dt_ctrl_s / dt);
    const long long log_div = std::llround(cfg.sim.dt_log_s / dt);

    MicrogridPlant plant(cfg.plant);
    EssController ctrl(cfg.ctrl);
    SinglePhasePll pll(cfg.pll, dt);

    std::multimap<long long, Event> schedule;
    for (const auto& ev : cfg.events) {
        schedule.emplace(std::llround(ev.t_s / dt), ev);
    }

    std::mt19937_64 rng(cfg.sim.seed);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    Complex sp_load_base = cfg.plant.sp_load;
    const bool jitter_on = cfg.sim.load_jitter_pct > 0;

    ScenarioResult result;
    result.rows.reserve(static_cast<size_t>(steps / log_div) + 1);
    result.probes.reserve(static_cast<size_t>(steps / log_div) + 1);

    const auto wall_start = std::chrono::steady_clock::now();
    plant.solve_step();  // pre-run operating point for the first samples

    SinglePhasePll::Output pll_out = pll.output();
    for (long long n = 0; n < steps; ++n) {
        const double t = static_cast<double>(n) * dt;

        for (auto [it, end] = schedule.equal_range(n); it != end; ++it) {
            const Event& ev = it->second;
            switch (ev.kind) {
                case Event::Kind::EnableRpc:
                    ctrl.enable_rpc(true);
                    break;
                case Event::Kind::EnableRpsa:
                    ctrl.enable_rpsa(true);
                    break;
                case Event::Kind::EnablePbr:
                    ctrl.enable_pbr(true);
                    break;
                case Event::Kind::SetLoad:
                    sp_load_base = Complex(ev.a, ev.b);
                    plant.set_sp_load(sp_load_base);
                    break;
                case Event::Kind::SetMppt:
                    plant.set_pv_mppt(ev.a);
                    ctrl.set_mppt(ev.a);
                    break;
            }
            result.applied_events.push_back(describe_event(ev));
        }

        if (n % ctrl_div == 0) {
            if (jitter_on) {
                const double f = 1.0 + cfg.sim.load_jitter_pct / 100.0 * unit(rng);
                plant.set_sp_load(sp_load_base * f);
            }
            ctrl.update_slow(gather(plant.state()));
            plant.set_pv_voltage_command(ctrl.slow().v_d_cmd);
        }

        // Inner loop: sample the latest solved state, advance PLL and the
        // converter branch, inject, then solve this step's network state.
        const double v_bus = waveform_sample(plant.state().v_s, plant.params().w0, t);
        pll_out = pll.step(v_bus);
        const double v_inv =
            ctrl.current_loop_step(pll_out.theta, plant.ess_branch().current(), v_bus);
        plant.ess_branch().step(v_inv, v_bus, t);
        plant.apply_ess_injection(plant.ess_branch().phasor());

        try {
            plant.solve_step();
        } catch (const std::exception& e) {
            char head[64];
            std::snprintf(head, sizeof(head), "step %lld (t=%.6f s): ", n, t);
            result.error = std::string(head) + e.what();
            result.failed_step = n;
            break;
        }
        result.plant_steps = n + 1;

        if (n % log_div == 0) {
            const PlantState& st = plant.state();
            result.rows.push_back(make_row(t, st, ctrl));

            ScenarioProbe probe;
            probe.t_s = t;
            probe.p_load_meas_w = ctrl.slow().load.p;
            probe.q_load_meas_var = ctrl.slow().load.q;
            probe.v_s_mag_v = std::abs(st.v_s);
            probe.p_ref_w = ctrl.slow().p_ref;
            probe.q_ref_var = ctrl.slow().q_ref;
            probe.i_d_ref_a = ctrl.slow().i_d_ref;
            probe.i_q_ref_a = ctrl.slow().i_q_ref;
            probe.v_d_cmd_v = ctrl.slow().v_d_cmd;
            probe.pll_freq_hz = pll_out.omega / (2.0 * kPi);
            probe.kcl_residual = st.kcl_residual;
            probe.solver_iterations = st.iterations;
            probe.refs_held = ctrl.slow().refs_held;
            probe.ess_clamped = st.ess_clamped;
            result.probes.push_back(probe);
        }
    }

    result.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - wall_start)
            .count();
    result.summary = summarize(result, cfg);
    return result;
}

}  // namespace mmgsim
