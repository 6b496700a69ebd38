#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>

#include "riftort/config.hpp"
#include "riftort/fields.hpp"
#include "riftort/flow.hpp"

namespace riftort {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;   // unreadable/invalid configuration
constexpr int kExitNumeric = 3;  // numeric failure after partial progress

// Fully resolved experiment description.  Mirrors the config file sections;
// every field has a default so a minimal file stays minimal.
struct RunConfig {
    std::string name = "run";
    std::string source;  // distribution strings, e.g. "gaussian:mean=0;cov=1"
    std::string target;
    std::string cost = "quadratic";
    int n = 1000;
    std::uint64_t seed = 0;
    int iterations = 1;

    std::string coupling_type = "independent";  // or "rotation" (ignores target)
    double rotation_theta = 1.5707963267948966;

    FeatureMapConfig features;   // features.seed is derived per iteration from `seed`
    FitConfig fit;
    IntegratorConfig integrator;

    std::string output_dir = ".";  // RIFTORT_OUT overrides
    bool save_fields = true;
    bool save_couplings = false;

    bool diag_marginals = true;  // energy distances in the per-iteration rows
    bool diag_hj = false;        // evolution-equation residual per iteration
    bool diag_hopflax = false;   // inf-convolution check (d <= 2)

    static RunConfig from_file(const std::string& path);
    static RunConfig from_config(const ConfigFile& file);
};

// Subcommand entry points.  They write human/machine output to `out`,
// complaints to `err`, and return a process exit code instead of throwing.
int run_reflow(const std::string& config_path, std::ostream& out, std::ostream& err);
int run_counterexample(std::uint64_t seed, int n, std::ostream& out, std::ostream& err);
int run_oracle(const std::string& config_path, std::ostream& out, std::ostream& err);
int run_selftest(std::ostream& out, std::ostream& err);

}  // namespace riftort
