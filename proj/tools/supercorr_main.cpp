#include <cstdlib>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "supercorr/scenario.hpp"
#include "supercorr/validate_suite.hpp"

namespace {

int default_threads() {
    if (const char* env = std::getenv("SUPERCORR_THREADS")) {
        const int v = std::atoi(env);
        if (v > 0) return v;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? static_cast<int>(hw) : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"supercorr: collective-emission peak rate and time simulator"};
    app.require_subcommand(1);
    app.fallthrough();  // global options may follow the subcommand

    int threads = default_threads();
    app.add_option("--threads", threads, "worker thread count (env SUPERCORR_THREADS)")
        ->check(CLI::PositiveNumber);

    std::string config_path;
    std::string out_dir;

    CLI::App* simulate = app.add_subcommand("simulate", "run one scenario");
    simulate->add_option("-c,--config", config_path, "scenario config (JSON)")->required();
    simulate->add_option("--out", out_dir, "output directory (overrides config)");

    CLI::App* sweep = app.add_subcommand("sweep", "run a parameter sweep");
    sweep->add_option("-c,--config", config_path, "scenario config (JSON)")->required();
    sweep->add_option("--out", out_dir, "output directory (overrides config)");

    std::vector<int> only;
    CLI::App* validate = app.add_subcommand("validate", "run the built-in validation suite");
    validate->add_option("--only", only, "subset of check numbers (default: all)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (simulate->parsed() || sweep->parsed()) {
            supercorr::ScenarioConfig cfg = supercorr::parse_scenario_file(config_path);
            if (!out_dir.empty()) cfg.output_dir = out_dir;
            return simulate->parsed() ? supercorr::cmd_simulate(cfg, threads)
                                      : supercorr::cmd_sweep(cfg, threads);
        }
        return supercorr::cmd_validate(only, threads);
    } catch (const supercorr::config_error& e) {
        std::cerr << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
}
