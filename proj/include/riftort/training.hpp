#pragma once

#include <Eigen/Dense>
#include <vector>

#include "riftort/costs.hpp"
#include "riftort/fields.hpp"
#include "riftort/synthdata.hpp"

namespace riftort {

struct FitConfig {
    double ridge_lambda = 1e-6;
    int time_points = 16;     // midpoint quadrature nodes over [0,1]
    int max_iters = 500;      // gradient-descent budget (non-quadratic costs)
    double grad_tol = 1e-7;
    double armijo_c = 1e-4;
    double armijo_backtrack = 0.5;
    double init_step = 1.0;
};

struct FitReport {
    double final_loss = 0.0;      // unregularized objective at the returned coefficients
    int iterations = 0;           // accepted descent steps (1 for closed-form solves)
    double final_grad_norm = 0.0; // regularized-objective gradient at exit
    bool converged = false;
    std::vector<double> loss_history;  // regularized objective per accepted iterate
};

struct FreeFieldFit {
    FreeVectorField field;
    FitReport report;
};

struct PotentialFit {
    PotentialField field;
    FitReport report;
};

// Least-squares drift regression: minimize the mean over the midpoint time
// grid and samples of |v(x_t, t) - (x1 - x0)|^2 plus ridge_lambda * |coef|_F^2,
// solved by normal equations.  final_loss reports the unregularized mean
// squared residual, which is also the straightness defect of the coupling as
// seen through this basis.
FreeFieldFit fit_free_field(const PairedCoupling& coupling, const FeatureMap& map,
                            const FitConfig& config);

// Empirical matching objective for a potential f:
//   mean over grid/samples of [ c*(grad f(x_t, t)) - <x1 - x0, grad f> + c(x1 - x0) ]
// Nonnegative by Fenchel-Young; zero exactly when grad c*(grad f) reproduces
// the displacement field on the data.
double matching_loss(const PairedCoupling& coupling, const PotentialField& f,
                     const CostFunction& cost, int time_points);

// Exact gradient of matching_loss in the potential coefficients (no ridge).
Eigen::VectorXd matching_loss_grad(const PairedCoupling& coupling, const PotentialField& f,
                                   const CostFunction& cost, int time_points);

// Minimize matching_loss + ridge_lambda * |theta|^2 over the feature basis.
// Quadratic cost reduces to linear least squares and is solved in closed form;
// other costs run full-batch gradient descent from theta = 0 with Armijo
// backtracking.  A line search that collapses below 1e-16 throws NumericError.
PotentialFit fit_potential(const PairedCoupling& coupling, const FeatureMap& map,
                           const CostFunction& cost, const FitConfig& config);

}  // namespace riftort
