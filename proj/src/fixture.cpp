#include "mmgsim/fixture.hpp"

#include <cmath>

#include "mmgsim/metrics.hpp"
#include "mmgsim/scenario.hpp"

namespace mmgsim {

namespace {

/// Open-loop unbalance at the candidate operating point. Measured by
/// running a short scenario with every loop disabled, because the storage
/// unit banks the PV surplus from the start and that shifts the tie flow
/// relative to a storage-less solve.
double open_loop_vuf(const PlantParams& plant) {
    ScenarioConfig cfg;
    cfg.sim.t_end_s = 1.5;
    cfg.plant = plant;
    cfg.ctrl.v_nominal_peak = plant.v_nominal_peak;
    cfg.ctrl.p_mppt_w = plant.pv_p_mppt;
    cfg.ctrl.current_loop.pr.w0 = plant.w0;
    cfg.pll.w0 = plant.w0;

    const ScenarioResult r = run_scenario(cfg);
    double sum = 0;
    int n = 0;
    for (const auto& row : r.rows) {
        if (row.t_s >= cfg.sim.t_end_s - 0.3) {
            sum += row.vuf_pct;
            ++n;
        }
    }
    return n > 0 ? sum / n : 0.0;
}

}  // namespace

FixtureResult design_unbalance_fixture(const PlantParams& base, double target_vuf_pct,
                                       double tolerance_pct) {
    const double v = base.v_nominal_peak;

    PlantParams calibrated = base;
    // A feeder seen from its EMF is a divider over the constant-impedance
    // load: V_pcc = E / (1 + Z_line * Y_load).
    const Complex y_load = 2.0 * std::conj(base.pcc_load[1]) / (v * v);
    calibrated.source_emf_peak = v * std::abs(1.0 + base.line_z * y_load);

    // Power received over the tie when both ends sit at nominal magnitude
    // and the sending end leads by phi.
    auto extra_for = [&](double phi) {
        return 0.5 * v * v * (std::polar(1.0, -phi) - 1.0) / std::conj(base.tie_z);
    };
    auto vuf_for = [&](double phi) {
        PlantParams p = calibrated;
        p.pcc_load[0] = base.pcc_load[0] + extra_for(phi);
        return open_loop_vuf(p);
    };

    double lo = 0.0;
    double hi = 1.2;
    double phi = hi;
    double vuf = vuf_for(hi);
    if (vuf > target_vuf_pct) {
        for (int i = 0; i < 60; ++i) {
            phi = 0.5 * (lo + hi);
            vuf = vuf_for(phi);
            if (std::abs(vuf - target_vuf_pct) <= tolerance_pct) {
                break;
            }
            (vuf < target_vuf_pct ? lo : hi) = phi;
        }
    }

    FixtureResult out;
    out.phi_rad = phi;
    out.s_extra = extra_for(phi);
    out.pcc_load_a = base.pcc_load[0] + out.s_extra;
    out.source_emf_peak = calibrated.source_emf_peak;
    out.vuf_pct = vuf;
    return out;
}

}  // namespace mmgsim
