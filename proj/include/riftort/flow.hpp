#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

#include "riftort/costs.hpp"
#include "riftort/errors.hpp"
#include "riftort/fields.hpp"
#include "riftort/synthdata.hpp"
#include "riftort/training.hpp"

namespace riftort {

struct IntegratorConfig {
    enum class Method { Euler, RK4 };
    Method method = Method::RK4;
    int steps = 100;
};

// Batched drift: maps an n x d state block and a scalar time to n x d velocities.
using BatchDrift = std::function<Eigen::MatrixXd(const Eigen::MatrixXd&, double)>;

// Fixed-step solve of dz/dt = drift(z, t) over [0, 1] for all particles at once.
struct Trajectory {
    Eigen::VectorXd times;                // steps + 1 uniform nodes
    std::vector<Eigen::MatrixXd> states;  // one n x d matrix per node

    PairedCoupling endpoints() const;  // first and last state
};

Trajectory integrate(const BatchDrift& drift, const Eigen::MatrixXd& start,
                     const IntegratorConfig& config);

// One rectification pass with an unconstrained field: regress the straight-line
// displacement onto the basis, then flow the start points through the fit.
struct RectifyResult {
    PairedCoupling coupling;  // start points paired with their flow endpoints
    FreeVectorField field;
    FitReport fit;
    Trajectory trajectory;
};
RectifyResult rectify(const PairedCoupling& coupling, const FeatureMap& map,
                      const FitConfig& fit_config, const IntegratorConfig& integrator);

// One rectification pass constrained to gradient-of-conjugate form: fit a
// potential by the matching objective and flow through grad c*(grad f).
struct CRectifyResult {
    PairedCoupling coupling;
    PotentialField potential;
    FitReport fit;
    Trajectory trajectory;
};
CRectifyResult c_rectify(const PairedCoupling& coupling, const CostFunction& cost,
                         const FeatureMap& map, const FitConfig& fit_config,
                         const IntegratorConfig& integrator);

// Per-iteration certificate row of the recursive procedure.
struct ReflowIteration {
    int k = 0;                    // 1-based iteration index
    double transport_cost = 0.0;  // endpoint cost of the new coupling
    double ellstar = 0.0;         // fitted matching-loss value
    double straightness = 0.0;    // pathwise minus endpoint cost of this flow
    double pathwise_cost = 0.0;
    double duality_gap = 0.0;     // ellstar - (previous cost - pathwise cost)
    double marginal_dist0 = 0.0;  // energy distance of new x0 to the reference
    double marginal_dist1 = 0.0;
    double seconds = 0.0;         // wall time (reported, never serialized)
};

// Reference samples the per-iteration marginals are compared against.  When
// absent, the starting coupling's own columns are used.
struct MarginalReference {
    Eigen::MatrixXd fresh0;
    Eigen::MatrixXd fresh1;
};

struct ReflowReport {
    double initial_cost = 0.0;
    std::vector<ReflowIteration> iterations;
    std::vector<PairedCoupling> couplings;     // coupling after iteration k
    std::vector<PotentialField> potentials;    // potential fitted at iteration k

    // Fixed schema: k,cost,ellstar,straightness,pathwise_cost,duality_gap,
    // marg0,marg1,seconds -- 17 significant digits.  The seconds column is
    // written as 0 so identical configurations produce identical bytes; real
    // timings stay in the in-memory report (and the run summary).
    void write_csv(std::ostream& os) const;
};

// Thrown when an iteration fails mid-run; carries everything completed so far.
struct ReflowError : NumericError {
    ReflowReport partial;
    ReflowError(const std::string& msg, ReflowReport done)
        : NumericError(msg), partial(std::move(done)) {}
};

// Supplies the (fresh) feature basis for iteration k = 1..K.
using FeatureMapBuilder = std::function<FeatureMap(const PairedCoupling&, int)>;

// Standard builder: data-driven bandwidth per iteration, seed derived from the
// run seed and k so every iteration sees decorrelated frequencies.
FeatureMapBuilder make_reflow_feature_builder(FeatureMapConfig base, int time_points,
                                              std::uint64_t run_seed);

// K recursive rectification passes under cost c.  Each pass keeps the current
// x0 column and replaces x1 by the flow endpoints, then re-fits on the new
// pairs.  Certificates are recorded per iteration.
ReflowReport reflow(const PairedCoupling& start, const CostFunction& cost, int num_iterations,
                    const FeatureMapBuilder& features, const FitConfig& fit_config,
                    const IntegratorConfig& integrator,
                    const MarginalReference* reference = nullptr);

}  // namespace riftort
