#pragma once

#include <array>
#include <complex>
#include <optional>

#include "mmgsim/ia_controller.hpp"
#include "mmgsim/signal_blocks.hpp"

namespace mmgsim {

// Sign conventions for the storage unit
// -------------------------------------
// Power references (p_ref, q_ref) count power ABSORBED by the converter from
// the AC bus: positive P charges the unit, positive Q means the converter
// draws lagging VARs. With the d axis locked to the bus voltage this gives
//   i_d_ref = 2 p_ref / v_d        (in-phase component drawn from the bus)
//   i_q_ref = -2 q_ref / v_d       (quadrature component)
// because Q = -0.5 v_d i_q for a voltage-aligned frame. The plant-side
// injection uses the opposite (deliver) convention, so instantaneous current
// references are negated before synthesis.

struct EssRatings {
    double p_rated_three_phase = 12e3;
    double p_rated_single_phase = 3e3;

    /// Reactive power sharing target: three-phase unit output per unit of
    /// single-phase unit output.
    double sharing_ratio() const { return p_rated_three_phase / p_rated_single_phase; }
};

/// Averages dq power products into slowly varying P/Q measurements.
class PowerMeter {
public:
    PowerMeter(double cutoff_rad_s, double dt);

    struct Output {
        double p = 0.0;  // W, delivered toward the measured direction
        double q = 0.0;  // var
    };

    /// v and i are voltage/current dq samples in the same reference frame.
    Output step(DqSample v, DqSample i);

    Output value() const { return {p_.value(), q_.value()}; }
    void reset();

private:
    LowPassFilter p_;
    LowPassFilter q_;
};

/// One step of the reactive power compensation loop: drives the measured
/// reactive power of the single-phase load toward its rated (natural)
/// consumption so the feeder between the buses carries no compensating VAR
/// flow. Output is the incremental active power adjustment (absorb
/// convention) added to the storage active power reference.
double rpc_step(IaController& ia, double q_load_rated_var, double q_load_meas_var);

/// Active power reference for the storage unit (absorb convention):
/// surplus = generation minus local consumption, plus the compensation term.
double ess_active_ref(double p_mppt_w, double p_load_meas_w, double p_rpc_w);

/// One step of the reactive sharing loop: the single-phase unit's share
/// target is q_three_phase / ratio; the loop drives the measured
/// single-phase reactive output toward it by adjusting the storage
/// reactive reference.
double rpsa_step(IaController& ia, double ratio, double q_three_phase_var,
                 double q_single_phase_var);

/// One step of the phase balance loop: drives the single-phase bus voltage
/// magnitude toward the phase-A feeder voltage magnitude. Returns the
/// inverter voltage command v_nominal + IA(v_phase_mag - v_s_mag).
double pbr_step(IaController& ia, double v_nominal_peak, double v_phase_mag,
                double v_s_mag);

struct CurrentRefs {
    double i_d = 0.0;
    double i_q = 0.0;
    bool held = false;  // bus voltage too low; previous refs retained
};

/// Converts absorb-convention power references into dq current references.
/// Holds the previous output when v_d collapses below 20% of nominal.
class CurrentRefSynth {
public:
    explicit CurrentRefSynth(double v_nominal_peak);

    CurrentRefs step(double p_ref_w, double q_ref_var, double v_d_peak);
    void reset();

private:
    double v_min_;
    CurrentRefs last_{};
};

/// Proportional-resonant inner current loop with bus voltage feed-forward
/// and DC-link saturation.
class CurrentLoop {
public:
    struct Settings {
        PrController::Settings pr;
        double v_dc = 300.0;  // bridge voltage ceiling (peak volts)
    };

    CurrentLoop(const Settings& s, double dt);

    /// i_ref/i_meas are instantaneous amperes; returns the bridge voltage.
    double step(double i_ref, double i_meas, double v_bus);
    void reset();

    bool saturated() const { return saturated_; }

private:
    PrController pr_;
    double v_dc_;
    bool saturated_ = false;
};

/// Outer-loop gain block for the storage controller.
struct EssControlGains {
    IaGains rpc{.ki = 1e-5, .kd = 5.0, .scale = 1.0, .out_min = {}, .out_max = {}};
    IaGains rpsa{.ki = 1e-5, .kd = 1.0, .scale = 1.0, .out_min = {}, .out_max = {}};
    IaGains pbr{.ki = 1e-5, .kd = 2.0, .scale = 1.0, .out_min = {}, .out_max = {}};
};

/// Complete storage control stack: metering, the three incremental loops,
/// reference synthesis and the inner current loop. The caller advances
/// update_slow() at the control rate and current_loop_step() at the plant
/// rate.
class EssController {
public:
    struct Config {
        EssControlGains gains;
        EssRatings ratings;
        double v_nominal_peak = 169.70562748477141;
        double q_load_rated_var = 500.0;
        double p_mppt_w = 3000.0;
        double meter_cutoff_rad_s = 2.0 * 3.14159265358979323846 * 5.0;
        CurrentLoop::Settings current_loop;
        double dt_ctrl = 1e-3;
        double dt_plant = 1e-4;
    };

    struct Measurements {
        DqSample v_bus_dq;       // single-phase bus voltage, PLL frame
        DqSample i_load_dq;      // single-phase load current, PLL frame
        double q_three_phase = 0.0;   // three-phase inverter reactive output
        double q_single_phase = 0.0;  // single-phase inverter reactive output
        double v_phase_a_mag = 0.0;   // phase-A feeder voltage magnitude (peak)
    };

    struct Slow {
        double p_ref = 0.0;   // absorb convention
        double q_ref = 0.0;   // absorb convention
        double v_d_cmd = 0.0; // PV inverter magnitude command
        double i_d_ref = 0.0;
        double i_q_ref = 0.0;
        PowerMeter::Output load;
        bool refs_held = false;
    };

    explicit EssController(const Config& cfg);

    void enable_rpc(bool on) { rpc_on_ = on; }
    void enable_rpsa(bool on) { rpsa_on_ = on; }
    void enable_pbr(bool on) { pbr_on_ = on; }
    bool rpc_enabled() const { return rpc_on_; }
    bool rpsa_enabled() const { return rpsa_on_; }
    bool pbr_enabled() const { return pbr_on_; }

    void set_mppt(double p_w) { cfg_.p_mppt_w = p_w; }
    void set_q_load_rated(double q_var) { cfg_.q_load_rated_var = q_var; }

    /// Control-rate update; returns the references latched until next call.
    const Slow& update_slow(const Measurements& m);
    const Slow& slow() const { return slow_; }

    /// Plant-rate update: theta is the PLL angle of the bus voltage,
    /// i_meas the instantaneous converter current, v_bus the instantaneous
    /// bus voltage. Returns the bridge voltage command.
    double current_loop_step(double theta, double i_meas, double v_bus);

    const Config& config() const { return cfg_; }

private:
    Config cfg_;
    PowerMeter load_meter_;
    LowPassFilter q3_lpf_;  // sharing-loop inputs reuse the meter cutoff
    LowPassFilter q1_lpf_;
    IaController rpc_ia_;
    IaController rpsa_ia_;
    IaController pbr_ia_;
    CurrentRefSynth ref_synth_;
    CurrentLoop loop_;
    Slow slow_{};
    bool rpc_on_ = false;
    bool rpsa_on_ = false;
    bool pbr_on_ = false;
};

}  // namespace mmgsim
