#include "riftort/flow.hpp"

#include <chrono>
#include <cmath>
#include <iomanip>
#include <sstream>

#include "riftort/diagnostics.hpp"
#include "riftort/rng.hpp"

namespace riftort {

PairedCoupling Trajectory::endpoints() const {
    if (states.size() < 2) throw ValidationError("trajectory: too few states");
    PairedCoupling c{states.front(), states.back()};
    c.validate();
    return c;
}

Trajectory integrate(const BatchDrift& drift, const Eigen::MatrixXd& start,
                     const IntegratorConfig& config) {
    if (config.steps <= 0) throw ValidationError("integrate: need steps > 0");
    if (start.rows() == 0 || start.cols() == 0) throw ValidationError("integrate: empty start");
    if (!start.allFinite()) throw ValidationError("integrate: non-finite start");

    const int N = config.steps;
    const double h = 1.0 / N;
    Trajectory traj;
    traj.times.resize(N + 1);
    for (int i = 0; i <= N; ++i) traj.times[i] = static_cast<double>(i) / N;
    traj.states.reserve(N + 1);
    traj.states.push_back(start);

    Eigen::MatrixXd z = start;
    for (int i = 0; i < N; ++i) {
        const double t = traj.times[i];
        if (config.method == IntegratorConfig::Method::Euler) {
            z += h * drift(z, t);
        } else {
            const Eigen::MatrixXd k1 = drift(z, t);
            const Eigen::MatrixXd k2 = drift(z + (0.5 * h) * k1, t + 0.5 * h);
            const Eigen::MatrixXd k3 = drift(z + (0.5 * h) * k2, t + 0.5 * h);
            const Eigen::MatrixXd k4 = drift(z + h * k3, t + h);
            z += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        if (!z.allFinite()) {
            std::ostringstream os;
            os << "integration produced non-finite state at step " << i + 1 << " (t = "
               << traj.times[i + 1] << ")";
            throw NumericError(os.str());
        }
        traj.states.push_back(z);
    }
    return traj;
}

RectifyResult rectify(const PairedCoupling& coupling, const FeatureMap& map,
                      const FitConfig& fit_config, const IntegratorConfig& integrator) {
    coupling.validate();
    FreeFieldFit fit = fit_free_field(coupling, map, fit_config);
    const FreeVectorField& field = fit.field;
    const BatchDrift drift = [&field](const Eigen::MatrixXd& x, double t) {
        return field.eval_rows(x, Eigen::VectorXd::Constant(x.rows(), t));
    };
    RectifyResult out{{}, fit.field, fit.report, integrate(drift, coupling.x0, integrator)};
    out.coupling = out.trajectory.endpoints();
    return out;
}

CRectifyResult c_rectify(const PairedCoupling& coupling, const CostFunction& cost,
                         const FeatureMap& map, const FitConfig& fit_config,
                         const IntegratorConfig& integrator) {
    coupling.validate();
    PotentialFit fit = fit_potential(coupling, map, cost, fit_config);
    const PotentialField& field = fit.field;
    const BatchDrift drift = [&field, &cost](const Eigen::MatrixXd& x, double t) {
        return drift_from_potential_rows(cost, field, x,
                                         Eigen::VectorXd::Constant(x.rows(), t));
    };
    CRectifyResult out{{}, fit.field, fit.report, integrate(drift, coupling.x0, integrator)};
    out.coupling = out.trajectory.endpoints();
    return out;
}

void ReflowReport::write_csv(std::ostream& os) const {
    os << "k,cost,ellstar,straightness,pathwise_cost,duality_gap,marg0,marg1,seconds\n";
    os << std::setprecision(17);
    for (const ReflowIteration& it : iterations) {
        os << it.k << ',' << it.transport_cost << ',' << it.ellstar << ',' << it.straightness
           << ',' << it.pathwise_cost << ',' << it.duality_gap << ',' << it.marginal_dist0 << ','
           << it.marginal_dist1 << ',' << 0.0 << '\n';
    }
}

FeatureMapBuilder make_reflow_feature_builder(FeatureMapConfig base, int time_points,
                                              std::uint64_t run_seed) {
    return [base, time_points, run_seed](const PairedCoupling& coupling, int k) {
        FeatureMapConfig cfg = base;
        cfg.seed = CounterRng::derive(run_seed, streams::kReflowBase +
                                                    static_cast<std::uint64_t>(k))
                       .bits(0);
        return build_features(coupling, cfg, time_points);
    };
}

ReflowReport reflow(const PairedCoupling& start, const CostFunction& cost, int num_iterations,
                    const FeatureMapBuilder& features, const FitConfig& fit_config,
                    const IntegratorConfig& integrator, const MarginalReference* reference) {
    start.validate();
    if (num_iterations <= 0) throw ValidationError("reflow: need at least one iteration");
    if (reference) {
        if (reference->fresh0.cols() != start.dim() || reference->fresh1.cols() != start.dim())
            throw ValidationError("reflow: marginal reference dimension mismatch");
    }
    const Eigen::MatrixXd& ref0 = reference ? reference->fresh0 : start.x0;
    const Eigen::MatrixXd& ref1 = reference ? reference->fresh1 : start.x1;

    ReflowReport report;
    report.initial_cost = transport_cost(start, cost);

    PairedCoupling current = start;
    for (int k = 1; k <= num_iterations; ++k) {
        const auto begin = std::chrono::steady_clock::now();
        ReflowIteration row;
        row.k = k;
        try {
            CRectifyResult step =
                c_rectify(current, cost, features(current, k), fit_config, integrator);
            const double prev_cost =
                report.iterations.empty() ? report.initial_cost
                                          : report.iterations.back().transport_cost;
            row.transport_cost = transport_cost(step.coupling, cost);
            row.ellstar = step.fit.final_loss;
            row.pathwise_cost = pathwise_cost(step.trajectory, cost);
            row.straightness = row.pathwise_cost - row.transport_cost;
            row.duality_gap = row.ellstar - (prev_cost - row.pathwise_cost);
            row.marginal_dist0 = energy_distance(step.coupling.x0, ref0);
            row.marginal_dist1 = energy_distance(step.coupling.x1, ref1);
            row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - begin)
                              .count();
            report.iterations.push_back(row);
            report.couplings.push_back(step.coupling);
            report.potentials.push_back(std::move(step.potential));
            current = report.couplings.back();
        } catch (const NumericError& e) {
            std::ostringstream os;
            os << "reflow iteration " << k << " failed: " << e.what();
            throw ReflowError(os.str(), std::move(report));
        }
    }
    return report;
}

}  // namespace riftort
