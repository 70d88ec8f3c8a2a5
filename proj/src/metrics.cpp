#include "mmgsim/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <limits>

namespace mmgsim {

VufResult vuf_percent(const std::array<Complex, 3>& v_abc) {
    const SequenceComponents seq = fortescue(v_abc[0], v_abc[1], v_abc[2]);
    const double pos = std::abs(seq.positive);
    if (pos < 1e-9) {
        // Sentinel rather than a huge ratio: callers must see the flag.
        return {std::numeric_limits<double>::infinity(), true};
    }
    return {100.0 * std::abs(seq.negative) / pos, false};
}

double max_deviation_from_mean_pct(double a, double b, double c) {
    const double mean = (a + b + c) / 3.0;
    if (std::abs(mean) < 1e-12) {
        return std::numeric_limits<double>::infinity();
    }
    const double dev =
        std::max({std::abs(a - mean), std::abs(b - mean), std::abs(c - mean)});
    return 100.0 * dev / std::abs(mean);
}

std::string format_summary(const RunSummary& s) {
    char buf[1024];
    auto settle = [](const std::optional<double>& v, char* out, size_t n) {
        if (v.has_value()) {
            std::snprintf(out, n, "%.3f", *v);
        } else {
            std::snprintf(out, n, "n/a");
        }
    };
    char t1[32], t2[32], t3[32], t4[32];
    settle(s.vuf_settle_s, t1, sizeof(t1));
    settle(s.sharing_settle_s, t2, sizeof(t2));
    settle(s.balance_settle_s, t3, sizeof(t3));
    settle(s.q_load_settle_s, t4, sizeof(t4));
    std::snprintf(buf, sizeof(buf),
                  "vuf_before_pct:        %.6f\n"
                  "vuf_after_pct:         %.6f\n"
                  "vuf_improvement:       %.6f\n"
                  "sharing_ratio_final:   %.6f\n"
                  "p_spread_final_pct:    %.6f\n"
                  "q_spread_final_pct:    %.6f\n"
                  "q_load_final_var:      %.6f\n"
                  "vuf_settle_s:          %s\n"
                  "sharing_settle_s:      %s\n"
                  "balance_settle_s:      %s\n"
                  "q_load_settle_s:       %s\n",
                  s.vuf_before_pct, s.vuf_after_pct, s.vuf_improvement,
                  s.sharing_ratio_final, s.p_spread_final_pct, s.q_spread_final_pct,
                  s.q_load_final_var, t1, t2, t3, t4);
    return buf;
}

CsvWriter::CsvWriter(std::ostream& out) : out_(out) {}

const char* CsvWriter::header() {
    return "t_s,vuf_pct,p_pcc_a_w,p_pcc_b_w,p_pcc_c_w,"
           "q_pcc_a_var,q_pcc_b_var,q_pcc_c_var,q_pv3ph_var,q_pv1ph_var,"
           "p_ess_w,q_ess_var,v_pcc_a_mag_v,v_pcc_b_mag_v,v_pcc_c_mag_v,"
           "controller_enabled_rpc,controller_enabled_rpsa,controller_enabled_pbr";
}

void CsvWriter::write_header() {
    out_ << header() << '\n';
}

void CsvWriter::write_row(const LogRow& r) {
    char buf[512];
    std::snprintf(buf, sizeof(buf),
                  "%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,"
                  "%.6f,%.6f,%.6f,%.6f,%.6f,%d,%d,%d",
                  r.t_s, r.vuf_pct, r.p_pcc_a_w, r.p_pcc_b_w, r.p_pcc_c_w,
                  r.q_pcc_a_var, r.q_pcc_b_var, r.q_pcc_c_var, r.q_pv3ph_var,
                  r.q_pv1ph_var, r.p_ess_w, r.q_ess_var, r.v_pcc_a_mag_v,
                  r.v_pcc_b_mag_v, r.v_pcc_c_mag_v,
                  r.controller_enabled_rpc ? 1 : 0,
                  r.controller_enabled_rpsa ? 1 : 0,
                  r.controller_enabled_pbr ? 1 : 0);
    out_ << buf << '\n';
}

}  // namespace mmgsim
