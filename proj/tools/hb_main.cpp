// Experiment runner: parses a flat key=value config, runs the classical flow,
// the chosen wave backend and the Bohmian ensemble, and writes report.json
// plus the CSV tables into the output directory.

#include <CLI11.hpp>

#include <iostream>
#include <sstream>

#include "hb/errors.hpp"
#include "hb/experiment.hpp"

namespace {

struct CommonArgs {
    std::string config;
    std::string out;
    std::string backend_override;
    long long seed = -1;
    int workers = -1;
    std::string eps_override;
};

void add_common(CLI::App* cmd, CommonArgs& a, bool with_eps) {
    cmd->add_option("--config", a.config, "experiment config file")->required();
    cmd->add_option("--out", a.out, "output directory (overrides the config)");
    cmd->add_option("--seed", a.seed, "seed override");
    cmd->add_option("--workers", a.workers, "worker threads (HB_WORKERS is the fallback)");
    cmd->add_option("--backend-override", a.backend_override, "exact | semiclassical");
    if (with_eps) cmd->add_option("--eps", a.eps_override, "comma-separated eps list override");
}

int run_with(const CommonArgs& a) {
    hb::ExperimentConfig cfg = hb::ExperimentConfig::parse_file(a.config);
    if (a.seed >= 0) cfg.seed = static_cast<std::uint64_t>(a.seed);
    if (a.workers >= 0) cfg.workers = a.workers;
    if (!a.out.empty()) cfg.out = a.out;
    if (!a.backend_override.empty()) cfg.backend = a.backend_override;
    if (!a.eps_override.empty()) {
        cfg.eps.clear();
        std::stringstream ss(a.eps_override);
        std::string tok;
        while (std::getline(ss, tok, ',')) {
            if (tok.empty()) continue;
            cfg.eps.push_back(std::stod(tok));
        }
    }
    cfg.validate();

    const hb::ExperimentResult res = hb::run_experiment(cfg, std::cerr);
    hb::write_report_files(res, cfg.out);
    for (const auto& w : res.warnings) std::cerr << "[hb] warning: " << w << "\n";
    std::cerr << "[hb] wrote report files to " << cfg.out << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Hagedorn packet / Bohmian trajectory experiment runner"};
    app.require_subcommand(1);

    CommonArgs run_args, sweep_args;
    CLI::App* run_cmd = app.add_subcommand("run", "run the experiment described by the config");
    add_common(run_cmd, run_args, false);
    CLI::App* sweep_cmd =
        app.add_subcommand("sweep", "run the eps sweep (optionally overriding the eps list)");
    add_common(sweep_cmd, sweep_args, true);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        return run_with(run_cmd->parsed() ? run_args : sweep_args);
    } catch (const hb::SchemaError& e) {
        std::cerr << "[hb] config error: " << e.what() << "\n";
        return 2;
    } catch (const hb::NumericalError& e) {
        std::cerr << "[hb] numerical abort: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "[hb] error: " << e.what() << "\n";
        return 1;
    }
}
