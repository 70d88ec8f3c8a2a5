#include "mmgsim/ess_control.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mmgsim {

PowerMeter::PowerMeter(double cutoff_rad_s, double dt)
    : p_(cutoff_rad_s, dt), q_(cutoff_rad_s, dt) {}

PowerMeter::Output PowerMeter::step(DqSample v, DqSample i) {
    // Peak-amplitude dq frame: S = 0.5 (v_d + j v_q) conj(i_d + j i_q).
    const double p_inst = 0.5 * (v.d * i.d + v.q * i.q);
    const double q_inst = 0.5 * (v.q * i.d - v.d * i.q);
    return {p_.step(p_inst), q_.step(q_inst)};
}

void PowerMeter::reset() {
    p_.reset();
    q_.reset();
}

double rpc_step(IaController& ia, double q_load_rated_var, double q_load_meas_var) {
    return ia.step(q_load_rated_var, q_load_meas_var);
}

double ess_active_ref(double p_mppt_w, double p_load_meas_w, double p_rpc_w) {
    return p_mppt_w - p_load_meas_w + p_rpc_w;
}

double rpsa_step(IaController& ia, double ratio, double q_three_phase_var,
                 double q_single_phase_var) {
    return ia.step(q_three_phase_var / ratio, q_single_phase_var);
}

double pbr_step(IaController& ia, double v_nominal_peak, double v_phase_mag,
                double v_s_mag) {
    return v_nominal_peak + ia.step(v_phase_mag, v_s_mag);
}

CurrentRefSynth::CurrentRefSynth(double v_nominal_peak)
    : v_min_(0.2 * v_nominal_peak) {
    if (!(v_nominal_peak > 0)) {
        throw std::invalid_argument("CurrentRefSynth: nominal voltage must be positive");
    }
}

CurrentRefs CurrentRefSynth::step(double p_ref_w, double q_ref_var, double v_d_peak) {
    if (v_d_peak < v_min_) {
        last_.held = true;
        return last_;
    }
    last_.i_d = 2.0 * p_ref_w / v_d_peak;
    last_.i_q = -2.0 * q_ref_var / v_d_peak;
    last_.held = false;
    return last_;
}

void CurrentRefSynth::reset() {
    last_ = CurrentRefs{};
}

CurrentLoop::CurrentLoop(const Settings& s, double dt)
    : pr_(s.pr, dt), v_dc_(s.v_dc) {
    if (!(s.v_dc > 0)) {
        throw std::invalid_argument("CurrentLoop: DC-link voltage must be positive");
    }
}

double CurrentLoop::step(double i_ref, double i_meas, double v_bus) {
    const double v = v_bus + pr_.step(i_ref - i_meas);
    const double out = std::clamp(v, -v_dc_, v_dc_);
    saturated_ = (out != v);
    return out;
}

void CurrentLoop::reset() {
    pr_.reset();
    saturated_ = false;
}

EssController::EssController(const Config& cfg)
    : cfg_(cfg),
      load_meter_(cfg.meter_cutoff_rad_s, cfg.dt_ctrl),
      q3_lpf_(cfg.meter_cutoff_rad_s, cfg.dt_ctrl),
      q1_lpf_(cfg.meter_cutoff_rad_s, cfg.dt_ctrl),
      rpc_ia_(cfg.gains.rpc),
      rpsa_ia_(cfg.gains.rpsa),
      pbr_ia_(cfg.gains.pbr),
      ref_synth_(cfg.v_nominal_peak),
      loop_(cfg.current_loop, cfg.dt_plant) {
    slow_.v_d_cmd = cfg_.v_nominal_peak;
}

const EssController::Slow& EssController::update_slow(const Measurements& m) {
    slow_.load = load_meter_.step(m.v_bus_dq, m.i_load_dq);
    const double q3 = q3_lpf_.step(m.q_three_phase);
    const double q1 = q1_lpf_.step(m.q_single_phase);

    const double p_rpc =
        rpc_on_ ? rpc_step(rpc_ia_, cfg_.q_load_rated_var, slow_.load.q) : rpc_ia_.output();
    slow_.p_ref = ess_active_ref(cfg_.p_mppt_w, slow_.load.p, p_rpc);

    slow_.q_ref = rpsa_on_ ? rpsa_step(rpsa_ia_, cfg_.ratings.sharing_ratio(), q3, q1)
                           : rpsa_ia_.output();

    slow_.v_d_cmd = pbr_on_ ? pbr_step(pbr_ia_, cfg_.v_nominal_peak, m.v_phase_a_mag,
                                       m.v_bus_dq.d)
                            : cfg_.v_nominal_peak + pbr_ia_.output();

    const CurrentRefs refs = ref_synth_.step(slow_.p_ref, slow_.q_ref, m.v_bus_dq.d);
    slow_.i_d_ref = refs.i_d;
    slow_.i_q_ref = refs.i_q;
    slow_.refs_held = refs.held;
    return slow_;
}

double EssController::current_loop_step(double theta, double i_meas, double v_bus) {
    // References use the absorb convention; the branch injects, so negate.
    const double i_ref = single_phase_inverse_dq({-slow_.i_d_ref, -slow_.i_q_ref}, theta);
    return loop_.step(i_ref, i_meas, v_bus);
}

}  // namespace mmgsim
