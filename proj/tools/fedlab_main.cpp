#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>

#include "fedlab/panels.hpp"

namespace {

fedlab::expcli::ExperimentConfig load_or_default(const std::string& path) {
    fedlab::expcli::ExperimentConfig cfg =
        path.empty() ? fedlab::expcli::default_config() : fedlab::expcli::load_config(path);
    if (const char* env = std::getenv("FEDLAB_MASTER_SEED")) {
        cfg.master_seed = std::strtoull(env, nullptr, 10);
        cfg.population.master_seed = cfg.master_seed;
    }
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"fedlab: federated learning under two-stage client selection"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir = "out";
    std::string panel = "a";
    std::string sweep_param;
    std::vector<double> sweep_values;

    auto* run = app.add_subcommand("run", "run one experiment panel");
    run->add_option("--panel", panel, "panel: a, b, c, or d")
        ->check(CLI::IsMember({"a", "b", "c", "d"}));
    run->add_option("--config", config_path, "config file (key = value sections)");
    run->add_option("--out", out_dir, "output directory");

    auto* verify = app.add_subcommand("verify", "run the verification suite");
    verify->add_option("--config", config_path, "config file");

    auto* sweep = app.add_subcommand("sweep", "sweep a named parameter");
    sweep->add_option("--param", sweep_param, "parameter name")->required();
    sweep->add_option("--values", sweep_values, "value list")->required()->delimiter(',');
    sweep->add_option("--config", config_path, "config file");
    sweep->add_option("--out", out_dir, "output directory");

    CLI11_PARSE(app, argc, argv);

    try {
        const auto cfg = load_or_default(config_path);
        if (run->parsed()) {
            fedlab::expcli::run_panel(panel[0], cfg, out_dir);
        } else if (verify->parsed()) {
            return fedlab::expcli::run_verification_suite(cfg, std::cout);
        } else if (sweep->parsed()) {
            fedlab::expcli::run_sweep(cfg, sweep_param, sweep_values, out_dir);
        }
    } catch (const fedlab::ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
