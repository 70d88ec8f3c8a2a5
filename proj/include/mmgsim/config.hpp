#pragma once

#include <string>
#include <vector>

#include "mmgsim/ess_control.hpp"
#include "mmgsim/plant.hpp"

namespace mmgsim {

struct SimulationConfig {
    double dt_plant_s = 1e-4;
    double dt_ctrl_s = 1e-3;
    double dt_log_s = 1e-3;
    double t_end_s = 14.0;
    unsigned long long seed = 0;     // drives load jitter only
    double load_jitter_pct = 0.0;    // 0 disables jitter (the default)
    std::string output_csv = "run.csv";
};

struct Event {
    enum class Kind { EnableRpc, EnableRpsa, EnablePbr, SetLoad, SetMppt };

    double t_s = 0.0;
    Kind kind = Kind::EnableRpc;
    double a = 0.0;  // SetLoad: P (W);   SetMppt: P (W)
    double b = 0.0;  // SetLoad: Q (var)
};

const char* event_kind_name(Event::Kind kind);

struct ScenarioConfig {
    SimulationConfig sim;
    PlantParams plant;
    EssController::Config ctrl;
    SinglePhasePll::Settings pll;
    std::vector<Event> events;
};

/// Parse outcome: the configuration is usable only when errors is empty.
/// All problems found (syntax, unknown keys, bad values, cross-field
/// violations) are collected rather than stopping at the first.
struct ConfigResult {
    ScenarioConfig config;
    std::vector<std::string> errors;

    bool ok() const { return errors.empty(); }
};

ConfigResult parse_config_text(const std::string& text);
ConfigResult parse_config_file(const std::string& path);

/// Cross-field checks used by the parser; exposed for reuse on
/// programmatically built configurations.
std::vector<std::string> validate_config(const ScenarioConfig& cfg);

}  // namespace mmgsim
