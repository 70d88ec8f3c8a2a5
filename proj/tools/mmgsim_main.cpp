#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include "CLI11.hpp"
#include "mmgsim/config.hpp"
#include "mmgsim/fixture.hpp"
#include "mmgsim/scenario.hpp"

namespace {

int run_command(const std::string& cfg_path, const std::string& out_dir, double horizon,
                bool quiet) {
    auto parsed = mmgsim::parse_config_file(cfg_path);
    if (!parsed.ok()) {
        for (const auto& e : parsed.errors) {
            std::fprintf(stderr, "error: %s\n", e.c_str());
        }
        return 1;
    }
    mmgsim::ScenarioConfig cfg = parsed.config;
    if (horizon > 0) {
        cfg.sim.t_end_s = horizon;
    }

    mmgsim::ScenarioResult result;
    try {
        result = mmgsim::run_scenario(cfg);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }

    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    const auto csv_path = std::filesystem::path(out_dir) / cfg.sim.output_csv;
    {
        std::ofstream csv(csv_path);
        if (!csv) {
            std::fprintf(stderr, "error: cannot write %s\n", csv_path.c_str());
            return 2;
        }
        mmgsim::write_csv(result.rows, csv);
    }

    const std::string summary_text = mmgsim::format_summary(result.summary);
    auto summary_path = csv_path;
    summary_path.replace_extension();
    summary_path += "_summary.txt";
    {
        std::ofstream out(summary_path);
        out << summary_text;
        for (const auto& ev : result.applied_events) {
            out << "event: " << ev << "\n";
        }
    }

    if (!quiet) {
        std::printf("%s", summary_text.c_str());
        std::printf("rows: %zu  plant steps: %lld  wall: %.2f s\n", result.rows.size(),
                    result.plant_steps, result.wall_seconds);
        std::printf("csv: %s\n", csv_path.c_str());
    }
    if (!result.ok()) {
        std::fprintf(stderr, "error: solve failed at %s (partial log kept)\n",
                     result.error.c_str());
        return 2;
    }
    return 0;
}

int validate_command(const std::string& cfg_path) {
    auto parsed = mmgsim::parse_config_file(cfg_path);
    if (!parsed.ok()) {
        for (const auto& e : parsed.errors) {
            std::fprintf(stderr, "error: %s\n", e.c_str());
        }
        return 1;
    }
    std::printf("%s: ok (%zu events)\n", cfg_path.c_str(), parsed.config.events.size());
    return 0;
}

int fixture_command(const std::string& cfg_path, double target_vuf) {
    mmgsim::PlantParams base;
    if (!cfg_path.empty()) {
        auto parsed = mmgsim::parse_config_file(cfg_path);
        if (!parsed.ok()) {
            for (const auto& e : parsed.errors) {
                std::fprintf(stderr, "error: %s\n", e.c_str());
            }
            return 1;
        }
        base = parsed.config.plant;
    }
    const auto fx = mmgsim::design_unbalance_fixture(base, target_vuf);
    std::printf("# tie transfer angle %.9f rad, open-loop unbalance %.4f %%\n",
                fx.phi_rad, fx.vuf_pct);
    std::printf("# extra phase-A load %.6f W %+.6f var\n", fx.s_extra.real(),
                fx.s_extra.imag());
    std::printf("source_emf_peak_v = %.9f\n", fx.source_emf_peak);
    std::printf("pcc_load_a_p_w = %.9f\n", fx.pcc_load_a.real());
    std::printf("pcc_load_a_q_var = %.9f\n", fx.pcc_load_a.imag());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Fixed-step phasor simulator for an islanded multi-microgrid with a "
                 "multi-function storage controller"};
    app.require_subcommand(1);

    std::string cfg_path;
    std::string out_dir = ".";
    double horizon = -1.0;
    bool quiet = false;

    auto* run = app.add_subcommand("run", "Run a scenario and write the log CSV");
    run->add_option("config", cfg_path, "Scenario config file")->required();
    run->add_option("--out", out_dir, "Output directory (created if missing)");
    run->add_option("--horizon", horizon, "Override the simulated horizon (s)");
    run->add_flag("--quiet", quiet, "Suppress the summary on stdout");

    auto* validate = app.add_subcommand("validate", "Check a scenario config");
    validate->add_option("config", cfg_path, "Scenario config file")->required();

    std::string fixture_cfg;
    std::string fixture_metric = "vuf";
    double target_vuf = 4.3;
    auto* fixture = app.add_subcommand(
        "fixture", "Design the unbalanced-load operating point for a target VUF");
    fixture->add_option("metric", fixture_metric, "Quantity to design for (only: vuf)")
        ->check(CLI::IsMember({"vuf"}));
    fixture->add_option("--config", fixture_cfg, "Base plant values from this config");
    fixture->add_option("--target", target_vuf, "Open-loop VUF to hit (percent)");

    CLI11_PARSE(app, argc, argv);

    if (run->parsed()) {
        return run_command(cfg_path, out_dir, horizon, quiet);
    }
    if (validate->parsed()) {
        return validate_command(cfg_path);
    }
    return fixture_command(fixture_cfg, target_vuf);
}
