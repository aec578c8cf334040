#include "hemiflow/harness/runs.hpp"

#include "CLI11.hpp"

#include <iostream>

namespace hf = hemiflow::harness;

int main(int argc, char** argv) {
    CLI::App app{"Simulator and verification harness for parabolic inclusions with Clarke-subdifferential terms"};
    app.require_subcommand(1);

    std::string config, out, run_dir;
    unsigned threads = 1;
    std::uint64_t seed = 0;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config, "run configuration (JSON)")->required()->check(CLI::ExistingFile);
        sub->add_option("--out", out, "run directory to create")->required();
        sub->add_option("--threads", threads, "worker threads for ensemble members")->check(CLI::PositiveNumber);
        sub->add_option("--seed-override", seed, "replace the selection and sampling seeds");
    };
    auto* simulate = app.add_subcommand("simulate", "integrate one trajectory");
    add_common(simulate);
    auto* ensemble = app.add_subcommand("ensemble", "integrate a sampled ensemble and run set diagnostics");
    add_common(ensemble);
    auto* convergence = app.add_subcommand("convergence", "mesh refinement table over h = 1/64, 1/128, 1/256");
    add_common(convergence);
    auto* verify = app.add_subcommand("verify", "rerun every applicable check on a stored run");
    verify->add_option("run_dir", run_dir, "run directory")->required()->check(CLI::ExistingDirectory);
    verify->add_option("--out", out, "directory for verify.csv");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        // Usage errors (bad flags, missing config file) share the config-error status.
        const int code = app.exit(e);
        return code == 0 ? 0 : hf::ExitConfig;
    }

    hf::RunOptions opts;
    opts.out = out;
    opts.threads = threads;
    for (auto* sub : {simulate, ensemble, convergence})
        if (*sub && sub->count("--seed-override")) opts.seed_override = seed;

    try {
        if (*verify) {
            try {
                return hf::verify(run_dir, opts, std::cout);
            } catch (const std::exception& e) {
                if (dynamic_cast<const hemiflow::ConfigError*>(&e)) throw;
                std::cerr << "verify: unreadable run data: " << e.what() << '\n';
                return hf::ExitVerification;
            }
        }
        const auto cfg = hf::load_config(config);
        if (*simulate) return hf::simulate(cfg, opts, std::cout);
        if (*ensemble) return hf::ensemble(cfg, opts, std::cout);
        return hf::convergence(cfg, opts, std::cout);
    } catch (const hemiflow::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return hf::ExitConfig;
    } catch (const hemiflow::NonConvergence& e) {
        std::cerr << "solver abort: " << e.what() << '\n';
        return hf::ExitSolver;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
