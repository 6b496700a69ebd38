#include <cstdint>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "riftort/cli.hpp"

int main(int argc, char** argv) {
    CLI::App app{"rectified transport flows: experiments, certificates, oracles"};
    app.require_subcommand(1);

    int threads = 0;
    app.add_option("--threads", threads,
                   "cap worker threads (0 = all cores); results are identical at any setting")
        ->check(CLI::NonNegativeNumber);

    std::string reflow_config;
    CLI::App* reflow = app.add_subcommand(
        "reflow", "run a recursive rectification experiment from a config file");
    reflow->add_option("config", reflow_config, "config file path")->required();

    std::uint64_t ce_seed = 0;
    int ce_n = 4000;
    CLI::App* counter = app.add_subcommand(
        "counterexample", "straight-but-suboptimal rotation coupling demonstration");
    counter->add_option("--seed", ce_seed, "rng seed");
    counter->add_option("--n", ce_n, "sample count");

    std::string oracle_config;
    CLI::App* oracle =
        app.add_subcommand("oracle", "exact-transport oracle comparison for a configured pair");
    oracle->add_option("config", oracle_config, "config file path")->required();

    app.add_subcommand("selftest", "run the full library property suite");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : riftort::kExitConfig;
    }

    // All numeric kernels run with a fixed summation order, so the thread cap
    // never changes results; it exists to keep this interface stable.
    (void)threads;

    if (app.got_subcommand("reflow"))
        return riftort::run_reflow(reflow_config, std::cout, std::cerr);
    if (app.got_subcommand("counterexample"))
        return riftort::run_counterexample(ce_seed, ce_n, std::cout, std::cerr);
    if (app.got_subcommand("oracle"))
        return riftort::run_oracle(oracle_config, std::cout, std::cerr);
    return riftort::run_selftest(std::cout, std::cerr);
}
