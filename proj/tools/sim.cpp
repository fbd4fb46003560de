#include <cstdio>
#include <iostream>

#include <CLI11.hpp>

#include "jpm/experiments.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

int cmd_run(const std::string& config_path) {
    const jpm::ExperimentConfig cfg = jpm::load_config(config_path);
    const jpm::ResultTable table = jpm::run_experiment(cfg);
    std::cout << jpm::to_string(cfg.experiment) << ": " << table.rows.size() << " rows -> "
              << cfg.output_path << "\n";
    return kExitOk;
}

int cmd_verify(const std::string& config_path) {
    jpm::ExperimentConfig cfg;
    if (!config_path.empty()) cfg = jpm::load_config(config_path);
    const auto results = jpm::verify(cfg);
    bool all_pass = true;
    for (const auto& r : results) {
        std::printf("[%s] %-22s measured %.6g  (%s)\n", r.pass ? "PASS" : "FAIL", r.name.c_str(),
                    r.measured, r.detail.c_str());
        all_pass = all_pass && r.pass;
    }
    return all_pass ? kExitOk : kExitNumerical;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Photon-counter dispersive qubit readout simulator"};
    app.require_subcommand(1);

    std::string run_config, verify_config;
    auto* run = app.add_subcommand("run", "Run the experiment described by a config file");
    run->add_option("config", run_config, "config file (JSON)")->required();
    auto* ver = app.add_subcommand("verify", "Run the built-in oracle suite");
    ver->add_option("config", verify_config, "optional config file (JSON)");
    app.add_subcommand("print-defaults", "Print the default configuration");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) ? kExitConfig : kExitOk;
    }

    try {
        if (app.got_subcommand("run")) return cmd_run(run_config);
        if (app.got_subcommand("verify")) return cmd_verify(verify_config);
        std::cout << jpm::default_config_text();
        return kExitOk;
    } catch (const jpm::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const jpm::SimError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumerical;
    }
}
