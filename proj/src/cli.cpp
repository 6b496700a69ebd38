#include "riftort/cli.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "riftort/costs.hpp"
#include "riftort/diagnostics.hpp"
#include "riftort/errors.hpp"
#include "riftort/rng.hpp"
#include "riftort/selftest.hpp"
#include "riftort/synthdata.hpp"
#include "riftort/training.hpp"

namespace riftort {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// seed streams reserved for the runner itself
constexpr std::uint64_t kStreamSource = 30;
constexpr std::uint64_t kStreamTarget = 31;
constexpr std::uint64_t kStreamPairing = 32;
constexpr std::uint64_t kStreamFresh0 = 33;
constexpr std::uint64_t kStreamFresh1 = 34;

std::uint64_t child_seed(std::uint64_t seed, std::uint64_t stream) {
    return CounterRng::derive(seed, stream).bits(0);
}

const std::vector<std::string> kReflowKeys = {
    "run.name", "run.seed", "run.cost", "run.n", "run.iterations",
    "source.dist", "target.dist",
    "coupling.type", "coupling.theta",
    "features.num_random", "features.bandwidth_x", "features.bandwidth_t", "features.affine",
    "fit.ridge_lambda", "fit.time_points", "fit.max_iters", "fit.grad_tol",
    "fit.armijo_c", "fit.armijo_backtrack", "fit.init_step",
    "integrator.method", "integrator.steps",
    "output.dir", "output.save_fields", "output.save_couplings",
    "diagnostics.marginals", "diagnostics.hj", "diagnostics.hopflax",
};

}  // namespace

RunConfig RunConfig::from_config(const ConfigFile& cf) {
    cf.require_known_keys(kReflowKeys);
    RunConfig rc;
    rc.name = cf.get_or("run", "name", "run");
    rc.seed = cf.get_u64("run", "seed", 0);
    rc.cost = cf.get_or("run", "cost", "quadratic");
    rc.n = cf.get_int("run", "n", 1000);
    rc.iterations = cf.get_int("run", "iterations", 1);
    rc.source = cf.get("source", "dist");
    rc.coupling_type = cf.get_or("coupling", "type", "independent");
    rc.rotation_theta = cf.get_double("coupling", "theta", rc.rotation_theta);

    if (rc.coupling_type == "independent") {
        rc.target = cf.get("target", "dist");
    } else if (rc.coupling_type == "rotation") {
        rc.target = cf.get_or("target", "dist", "");
        if (!rc.target.empty())
            cf.fail_at("target", "dist", "rotation coupling derives the target; drop [target]");
    } else {
        cf.fail_at("coupling", "type",
                   "unknown coupling type '" + rc.coupling_type + "' (independent|rotation)");
    }

    rc.features.num_random = cf.get_int("features", "num_random", rc.features.num_random);
    rc.features.bandwidth_x = cf.get_double("features", "bandwidth_x", rc.features.bandwidth_x);
    rc.features.bandwidth_t = cf.get_double("features", "bandwidth_t", rc.features.bandwidth_t);
    rc.features.affine_block = cf.get_bool("features", "affine", rc.features.affine_block);

    rc.fit.ridge_lambda = cf.get_double("fit", "ridge_lambda", rc.fit.ridge_lambda);
    rc.fit.time_points = cf.get_int("fit", "time_points", rc.fit.time_points);
    rc.fit.max_iters = cf.get_int("fit", "max_iters", rc.fit.max_iters);
    rc.fit.grad_tol = cf.get_double("fit", "grad_tol", rc.fit.grad_tol);
    rc.fit.armijo_c = cf.get_double("fit", "armijo_c", rc.fit.armijo_c);
    rc.fit.armijo_backtrack = cf.get_double("fit", "armijo_backtrack", rc.fit.armijo_backtrack);
    rc.fit.init_step = cf.get_double("fit", "init_step", rc.fit.init_step);

    const std::string method = cf.get_or("integrator", "method", "rk4");
    if (method == "rk4")
        rc.integrator.method = IntegratorConfig::Method::RK4;
    else if (method == "euler")
        rc.integrator.method = IntegratorConfig::Method::Euler;
    else
        cf.fail_at("integrator", "method", "unknown method '" + method + "' (euler|rk4)");
    rc.integrator.steps = cf.get_int("integrator", "steps", rc.integrator.steps);

    rc.output_dir = cf.get_or("output", "dir", ".");
    rc.save_fields = cf.get_bool("output", "save_fields", true);
    rc.save_couplings = cf.get_bool("output", "save_couplings", false);
    rc.diag_marginals = cf.get_bool("diagnostics", "marginals", true);
    rc.diag_hj = cf.get_bool("diagnostics", "hj", false);
    rc.diag_hopflax = cf.get_bool("diagnostics", "hopflax", false);

    // fail early, pointing at the offending entry
    if (rc.n < 2) cf.fail_at("run", "n", "need n >= 2");
    if (rc.iterations < 1) cf.fail_at("run", "iterations", "need iterations >= 1");
    if (rc.integrator.steps < 1) cf.fail_at("integrator", "steps", "need steps >= 1");
    try {
        CostFunction::parse(rc.cost);
    } catch (const ValidationError& e) {
        cf.fail_at("run", "cost", e.what());
    }
    try {
        DistributionSpec::parse(rc.source);
    } catch (const ValidationError& e) {
        cf.fail_at("source", "dist", e.what());
    }
    if (rc.coupling_type == "independent") {
        try {
            DistributionSpec::parse(rc.target);
        } catch (const ValidationError& e) {
            cf.fail_at("target", "dist", e.what());
        }
    }
    return rc;
}

RunConfig RunConfig::from_file(const std::string& path) {
    return from_config(ConfigFile::parse_file(path));
}

namespace {

std::string resolve_output_dir(const RunConfig& rc) {
    if (const char* env = std::getenv("RIFTORT_OUT"); env && *env) return env;
    return rc.output_dir;
}

json resolved_config_json(const RunConfig& rc) {
    json j;
    j["run"] = {{"name", rc.name}, {"seed", rc.seed}, {"cost", rc.cost},
                {"n", rc.n}, {"iterations", rc.iterations}};
    j["source"] = {{"dist", rc.source}};
    if (rc.coupling_type == "independent") j["target"] = {{"dist", rc.target}};
    j["coupling"] = {{"type", rc.coupling_type}};
    if (rc.coupling_type == "rotation") j["coupling"]["theta"] = rc.rotation_theta;
    j["features"] = {{"num_random", rc.features.num_random},
                     {"bandwidth_x", rc.features.bandwidth_x},
                     {"bandwidth_t", rc.features.bandwidth_t},
                     {"affine", rc.features.affine_block}};
    j["fit"] = {{"ridge_lambda", rc.fit.ridge_lambda},
                {"time_points", rc.fit.time_points},
                {"max_iters", rc.fit.max_iters},
                {"grad_tol", rc.fit.grad_tol},
                {"armijo_c", rc.fit.armijo_c},
                {"armijo_backtrack", rc.fit.armijo_backtrack},
                {"init_step", rc.fit.init_step}};
    j["integrator"] = {
        {"method", rc.integrator.method == IntegratorConfig::Method::RK4 ? "rk4" : "euler"},
        {"steps", rc.integrator.steps}};
    j["output"] = {{"dir", rc.output_dir}, {"save_fields", rc.save_fields},
                   {"save_couplings", rc.save_couplings}};
    j["diagnostics"] = {{"marginals", rc.diag_marginals}, {"hj", rc.diag_hj},
                        {"hopflax", rc.diag_hopflax}};
    return j;
}

PairedCoupling initial_coupling(const RunConfig& rc) {
    const DistributionSpec src = DistributionSpec::parse(rc.source);
    const SampleSet s0 = sample(src, rc.n, child_seed(rc.seed, kStreamSource));
    if (rc.coupling_type == "rotation") return rotation_coupling(s0, rc.rotation_theta);
    const DistributionSpec tgt = DistributionSpec::parse(rc.target);
    const SampleSet s1 = sample(tgt, rc.n, child_seed(rc.seed, kStreamTarget));
    return independent_coupling(s0, s1, child_seed(rc.seed, kStreamPairing));
}

MarginalReference fresh_reference(const RunConfig& rc) {
    const DistributionSpec src = DistributionSpec::parse(rc.source);
    MarginalReference ref;
    ref.fresh0 = sample(src, rc.n, child_seed(rc.seed, kStreamFresh0)).data;
    if (rc.coupling_type == "rotation") {
        // target law is the rotated source law
        const SampleSet extra = sample(src, rc.n, child_seed(rc.seed, kStreamFresh1));
        ref.fresh1 = rotation_coupling(extra, rc.rotation_theta).x1;
    } else {
        const DistributionSpec tgt = DistributionSpec::parse(rc.target);
        ref.fresh1 = sample(tgt, rc.n, child_seed(rc.seed, kStreamFresh1)).data;
    }
    return ref;
}

void write_coupling_csv(const fs::path& path, const PairedCoupling& cpl) {
    std::ofstream os(path);
    if (!os) throw NumericError("cannot open '" + path.string() + "' for writing");
    const int d = cpl.dim();
    for (int k = 0; k < d; ++k) os << "x0_" << k << ',';
    for (int k = 0; k < d; ++k) os << "x1_" << k << (k + 1 < d ? "," : "");
    os << '\n';
    os << std::setprecision(17);
    for (int i = 0; i < cpl.n(); ++i) {
        for (int k = 0; k < d; ++k) os << cpl.x0(i, k) << ',';
        for (int k = 0; k < d; ++k) os << cpl.x1(i, k) << (k + 1 < d ? "," : "");
        os << '\n';
    }
}

void write_report_files(const fs::path& dir, const RunConfig& rc, const ReflowReport& rep,
                        double total_seconds, const json& extra_diagnostics,
                        const std::string& failure) {
    {
        std::ofstream os(dir / "report.csv");
        if (!os) throw NumericError("cannot open report.csv for writing");
        rep.write_csv(os);
    }
    json j;
    j["schema_version"] = 1;
    j["experiment"] = rc.name;
    j["config"] = resolved_config_json(rc);
    j["initial_cost"] = rep.initial_cost;
    j["iterations"] = json::array();
    double cert_sum = 0.0;
    for (const ReflowIteration& it : rep.iterations) {
        cert_sum += it.ellstar + it.straightness;
        j["iterations"].push_back({{"k", it.k},
                                   {"cost", it.transport_cost},
                                   {"ellstar", it.ellstar},
                                   {"straightness", it.straightness},
                                   {"pathwise_cost", it.pathwise_cost},
                                   {"duality_gap", it.duality_gap},
                                   {"marg0", it.marginal_dist0},
                                   {"marg1", it.marginal_dist1},
                                   {"seconds", it.seconds}});
    }
    j["certificate_sum"] = cert_sum;
    if (!rep.iterations.empty()) j["final_cost"] = rep.iterations.back().transport_cost;
    j["total_seconds"] = total_seconds;
    if (!extra_diagnostics.empty()) j["extra_diagnostics"] = extra_diagnostics;
    if (!failure.empty()) j["failure"] = failure;
    std::ofstream js(dir / "summary.json");
    if (!js) throw NumericError("cannot open summary.json for writing");
    js << j.dump(2) << '\n';

    if (rc.save_fields) {
        for (std::size_t i = 0; i < rep.potentials.size(); ++i) {
            std::ostringstream name;
            name << "k" << (i + 1) << "_field.txt";
            save_field((dir / name.str()).string(), rep.potentials[i]);
        }
    }
    if (rc.save_couplings) {
        for (std::size_t i = 0; i < rep.couplings.size(); ++i) {
            std::ostringstream name;
            name << "k" << (i + 1) << "_coupling.csv";
            write_coupling_csv(dir / name.str(), rep.couplings[i]);
        }
    }
}

json extra_diagnostics_json(const RunConfig& rc, const CostFunction& cost,
                            const PairedCoupling& start, const ReflowReport& rep) {
    json extra = json::object();
    if (!rc.diag_hj && !rc.diag_hopflax) return extra;
    const int T = 5;  // probe slice count
    const Eigen::VectorXd grid = time_grid(T);
    for (std::size_t i = 0; i < rep.potentials.size(); ++i) {
        // probe each potential along the interpolation it was fitted on
        const PairedCoupling& cpl = i == 0 ? start : rep.couplings[i - 1];
        std::vector<TimeSlice> slices;
        const int probe_n = std::min(cpl.n(), 512);
        for (int k = 0; k < T; ++k)
            slices.push_back({grid[k], interpolate(cpl, grid[k]).position.topRows(probe_n)});
        if (rc.diag_hj) {
            const HjResidual r = hj_residual(rep.potentials[i], cost, slices);
            extra["hj"].push_back({{"k", i + 1},
                                   {"mean_grad_norm", r.mean_grad_norm},
                                   {"max_grad_norm", r.max_grad_norm}});
        }
        if (rc.diag_hopflax && cpl.dim() <= 2) {
            const Eigen::MatrixXd probes = cpl.x0.topRows(std::min(cpl.n(), 64));
            LatticeSpec lattice;
            const Eigen::MatrixXd all0 = rep.couplings[i].x0;
            const Eigen::MatrixXd all1 = rep.couplings[i].x1;
            lattice.lo = all0.colwise().minCoeff().cwiseMin(all1.colwise().minCoeff()).transpose();
            lattice.hi = all0.colwise().maxCoeff().cwiseMax(all1.colwise().maxCoeff()).transpose();
            const Eigen::VectorXd pad = 0.25 * (lattice.hi - lattice.lo);
            lattice.lo -= pad;
            lattice.hi += pad;
            lattice.points_per_dim = cpl.dim() == 1 ? 2001 : 151;
            extra["hopflax"].push_back(
                {{"k", i + 1},
                 {"gap", hopflax_gap(rep.potentials[i], cost, 0.5, probes, lattice)}});
        }
    }
    return extra;
}

}  // namespace

int run_reflow(const std::string& config_path, std::ostream& out, std::ostream& err) {
    RunConfig rc;
    try {
        rc = RunConfig::from_file(config_path);
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const ValidationError& e) {
        err << "config error: " << e.what() << '\n';
        return kExitConfig;
    }

    fs::path dir;
    try {
        dir = resolve_output_dir(rc);
        fs::create_directories(dir);
        const CostFunction cost = CostFunction::parse(rc.cost);
        const PairedCoupling start = initial_coupling(rc);
        MarginalReference ref;
        const MarginalReference* refp = nullptr;
        if (rc.diag_marginals) {
            ref = fresh_reference(rc);
            refp = &ref;
        }
        const FeatureMapBuilder features =
            make_reflow_feature_builder(rc.features, rc.fit.time_points, rc.seed);

        const auto begin = std::chrono::steady_clock::now();
        ReflowReport rep;
        try {
            rep = reflow(start, cost, rc.iterations, features, rc.fit, rc.integrator, refp);
        } catch (const ReflowError& e) {
            const double secs =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - begin).count();
            write_report_files(dir, rc, e.partial, secs, json::object(), e.what());
            err << "numeric failure: " << e.what() << '\n';
            err << "partial report written to " << (dir / "report.csv").string() << '\n';
            return kExitNumeric;
        }
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - begin).count();

        if (!rc.diag_marginals)
            for (ReflowIteration& it : rep.iterations) {
                it.marginal_dist0 = 0.0;
                it.marginal_dist1 = 0.0;
            }
        write_report_files(dir, rc, rep, secs, extra_diagnostics_json(rc, cost, start, rep), "");

        out << "experiment " << rc.name << ": " << rc.iterations << " iteration(s), cost "
            << std::setprecision(10) << rep.initial_cost << " -> "
            << rep.iterations.back().transport_cost << ", report in " << dir.string() << '\n';
        return kExitOk;
    } catch (const ValidationError& e) {
        err << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const NumericError& e) {
        err << "numeric failure: " << e.what() << '\n';
        return kExitNumeric;
    }
}

int run_counterexample(std::uint64_t seed, int n, std::ostream& out, std::ostream& err) {
    try {
        if (n < 2) throw ValidationError("counterexample: need n >= 2");
        if (n < 100)
            out << "warning: n = " << n
                << " is very small; certificates at this size are dominated by sampling noise\n";

        const CostFunction cost = CostFunction::quadratic();
        const double theta = 1.5707963267948966;  // quarter turn
        const SampleSet s0 = sample(DistributionSpec::parse("gaussian:mean=0,0;cov=I"), n,
                                    child_seed(seed, kStreamSource));
        const PairedCoupling cpl = rotation_coupling(s0, theta);

        FitConfig fit;
        IntegratorConfig integrator;
        integrator.steps = 32;
        FeatureMapConfig fmc;
        fmc.seed = child_seed(seed, streams::kReflowBase + 1);
        const FeatureMap fm = build_features(cpl, fmc, fit.time_points);

        const double cost0 = transport_cost(cpl, cost);
        const double gap = straightness_gap(cpl, fm, fit);
        const double scale = cost.value_rows(cpl.displacement()).mean() * 2.0;  // mean |xdot|^2
        const double normalized_gap = gap / scale;
        out << std::setprecision(10);
        out << "transport_cost " << cost0 << '\n';
        out << "straightness_gap " << gap << " (normalized " << normalized_gap << ")\n";

        const CRectifyResult step = c_rectify(cpl, cost, fm, fit, integrator);
        const double cost1 = transport_cost(step.coupling, cost);
        out << "rectified_cost " << cost1 << '\n';
        out << "ellstar " << step.fit.final_loss << '\n';

        if (n >= 100) {
            // straight (tiny drift-regression residual) yet far from optimal
            bool ok = true;
            if (normalized_gap > 0.05) {
                err << "FAIL: normalized straightness gap " << normalized_gap << " > 0.05\n";
                ok = false;
            }
            if (std::abs(cost0 - 2.0) > 0.1) {
                err << "FAIL: rotation transport cost " << cost0 << " not within 2.0 +- 0.1\n";
                ok = false;
            }
            if (!(cost1 < cost0 - std::max(0.0, step.fit.final_loss - 0.1))) {
                err << "FAIL: one rectification step did not reduce cost by ~ellstar ("
                    << cost0 << " -> " << cost1 << ", ellstar " << step.fit.final_loss << ")\n";
                ok = false;
            }
            if (!ok) return kExitNumeric;
            out << "straight-but-suboptimal confirmed: cost " << cost0 << " vs optimum 0, one step -> "
                << cost1 << '\n';
        }
        return kExitOk;
    } catch (const ValidationError& e) {
        err << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const NumericError& e) {
        err << "numeric failure: " << e.what() << '\n';
        return kExitNumeric;
    }
}

namespace {

const std::vector<std::string> kOracleKeys = {
    "run.name", "run.seed", "run.cost", "run.n",
    "source.dist", "target.dist",
    "oracles.quantile", "oracles.hungarian", "oracles.gauss",
};

}  // namespace

int run_oracle(const std::string& config_path, std::ostream& out, std::ostream& err) {
    try {
        const ConfigFile cf = ConfigFile::parse_file(config_path);
        cf.require_known_keys(kOracleKeys);
        const std::uint64_t seed = cf.get_u64("run", "seed", 0);
        const int n = cf.get_int("run", "n", 256);
        if (n < 2) cf.fail_at("run", "n", "need n >= 2");
        const CostFunction cost = CostFunction::parse(cf.get_or("run", "cost", "quadratic"));
        const DistributionSpec src = DistributionSpec::parse(cf.get("source", "dist"));
        const DistributionSpec tgt = DistributionSpec::parse(cf.get("target", "dist"));
        if (src.dim() != tgt.dim()) cf.fail_at("target", "dist", "source/target dimension mismatch");
        const int d = src.dim();

        const bool both_gauss = src.kind() == DistributionSpec::Kind::Gaussian &&
                                tgt.kind() == DistributionSpec::Kind::Gaussian;
        const bool gauss_applies =
            both_gauss && cost.kind() == CostFunction::Kind::Quadratic;
        // defaults: run whatever is applicable; explicit requests are validated
        const bool want_quantile = cf.get_bool("oracles", "quantile", d == 1);
        const bool want_hungarian = cf.get_bool("oracles", "hungarian", n <= 512);
        const bool want_gauss = cf.get_bool("oracles", "gauss", gauss_applies);
        if (want_quantile && d != 1)
            cf.fail_at("oracles", "quantile", "quantile oracle needs 1-d distributions");
        if (want_hungarian && n > 512)
            cf.fail_at("oracles", "hungarian", "assignment oracle capped at n = 512");
        if (want_gauss && !both_gauss)
            cf.fail_at("oracles", "gauss", "closed form needs gaussian source and target");
        if (want_gauss && cost.kind() != CostFunction::Kind::Quadratic)
            cf.fail_at("oracles", "gauss", "closed form is quadratic-cost only");

        const SampleSet s0 = sample(src, n, child_seed(seed, kStreamSource));
        const SampleSet s1 = sample(tgt, n, child_seed(seed, kStreamTarget));

        out << "oracle,value\n" << std::setprecision(17);
        if (want_quantile) out << "quantile," << oracle_quantile_1d(s0, s1, cost) << '\n';
        if (want_hungarian) out << "hungarian," << oracle_hungarian(s0, s1, cost).cost << '\n';
        if (want_gauss)
            out << "gauss," << oracle_gauss_quadratic(src.mean(), src.cov(), tgt.mean(), tgt.cov())
                << '\n';
        if (!want_quantile && !want_hungarian && !want_gauss) {
            err << "no applicable oracle for this configuration\n";
            return kExitConfig;
        }
        return kExitOk;
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const ValidationError& e) {
        err << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const NumericError& e) {
        err << "numeric failure: " << e.what() << '\n';
        return kExitNumeric;
    }
}

int run_selftest(std::ostream& out, std::ostream& err) {
    const auto results = run_property_suite();
    int failed = 0;
    for (const PropertyResult& r : results) {
        if (r.passed) {
            out << "PASS " << r.name << " (" << std::fixed << std::setprecision(2) << r.seconds
                << "s)\n";
            out.unsetf(std::ios::fixed);
        } else {
            ++failed;
            out << "FAIL " << r.name << ": " << r.detail << '\n';
        }
    }
    out << results.size() - failed << "/" << results.size() << " properties passed\n";
    if (failed) err << failed << " propert" << (failed == 1 ? "y" : "ies") << " failed\n";
    return failed == 0 ? kExitOk : kExitNumeric;
}

}  // namespace riftort
