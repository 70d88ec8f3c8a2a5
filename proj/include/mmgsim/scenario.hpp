#pragma once

#include <string>
#include <vector>

#include "mmgsim/config.hpp"
#include "mmgsim/metrics.hpp"

namespace mmgsim {

/// Per-log-row diagnostics beyond the CSV schema, for tests and summaries.
struct ScenarioProbe {
    double t_s = 0.0;
    double p_load_meas_w = 0.0;
    double q_load_meas_var = 0.0;
    double v_s_mag_v = 0.0;
    double p_ref_w = 0.0;   // storage references, absorb convention
    double q_ref_var = 0.0;
    double i_d_ref_a = 0.0;
    double i_q_ref_a = 0.0;
    double v_d_cmd_v = 0.0;
    double pll_freq_hz = 0.0;
    double kcl_residual = 0.0;
    int solver_iterations = 0;
    bool refs_held = false;
    bool ess_clamped = false;
};

struct ScenarioResult {
    std::vector<LogRow> rows;
    std::vector<ScenarioProbe> probes;  // parallel to rows
    std::vector<std::string> applied_events;
    long long plant_steps = 0;
    double wall_seconds = 0.0;
    RunSummary summary;

    // Set when the plant solve failed mid-run; rows up to the failure are
    // retained so partial output can still be written.
    std::string error;
    long long failed_step = -1;

    bool ok() const { return error.empty(); }
};

/// Runs the fixed-step loop: per plant step, waveform sampling, (at the
/// control rate) measurement filtering + the three incremental loops +
/// reference synthesis, the inner current loop, injection, network solve,
/// and (at the log rate) one CSV row. Throws std::invalid_argument on a
/// config that fails validation.
ScenarioResult run_scenario(const ScenarioConfig& cfg);

void write_csv(const std::vector<LogRow>& rows, std::ostream& out);

/// Computes the summary block from a finished run (exposed for tests).
RunSummary summarize(const ScenarioResult& result, const ScenarioConfig& cfg);

}  // namespace mmgsim
