#pragma once

#include <array>
#include <optional>
#include <ostream>
#include <string>

#include "mmgsim/signal_blocks.hpp"

namespace mmgsim {

struct VufResult {
    double percent = 0.0;
    bool degenerate = false;  // positive-sequence magnitude ~ 0
};

/// Voltage unbalance factor: 100 |V-| / |V+| from a three-phase phasor set.
VufResult vuf_percent(const std::array<Complex, 3>& v_abc);

/// Largest per-element deviation from the three-way mean, as a percentage
/// of that mean. Returns +inf when the mean is ~ 0.
double max_deviation_from_mean_pct(double a, double b, double c);

/// One logged sample. Field order matches the CSV schema exactly.
struct LogRow {
    double t_s = 0.0;
    double vuf_pct = 0.0;
    double p_pcc_a_w = 0.0;
    double p_pcc_b_w = 0.0;
    double p_pcc_c_w = 0.0;
    double q_pcc_a_var = 0.0;
    double q_pcc_b_var = 0.0;
    double q_pcc_c_var = 0.0;
    double q_pv3ph_var = 0.0;
    double q_pv1ph_var = 0.0;
    double p_ess_w = 0.0;   // delivered to the bus (discharge positive)
    double q_ess_var = 0.0;
    double v_pcc_a_mag_v = 0.0;
    double v_pcc_b_mag_v = 0.0;
    double v_pcc_c_mag_v = 0.0;
    bool controller_enabled_rpc = false;
    bool controller_enabled_rpsa = false;
    bool controller_enabled_pbr = false;
};

/// Headline results of one run. Window means: "before" covers the second
/// preceding the first enable event, "final" the last second of the run.
/// Settle times are measured from the relevant enable event to the first
/// logged instant after which the quantity stays inside its band; empty
/// when the loop never engaged or never settled.
struct RunSummary {
    double vuf_before_pct = 0.0;
    double vuf_after_pct = 0.0;
    double vuf_improvement = 0.0;  // before / after
    double sharing_ratio_final = 0.0;
    double p_spread_final_pct = 0.0;
    double q_spread_final_pct = 0.0;
    double q_load_final_var = 0.0;
    std::optional<double> vuf_settle_s;
    std::optional<double> sharing_settle_s;
    std::optional<double> balance_settle_s;
    std::optional<double> q_load_settle_s;
};

/// Fixed-format plain-text report (deterministic for identical summaries).
std::string format_summary(const RunSummary& s);

/// Writes rows with a fixed header and fixed "%.6f" formatting so repeated
/// runs produce byte-identical files.
class CsvWriter {
public:
    explicit CsvWriter(std::ostream& out);

    static const char* header();

    void write_header();
    void write_row(const LogRow& row);

private:
    std::ostream& out_;
};

}  // namespace mmgsim
