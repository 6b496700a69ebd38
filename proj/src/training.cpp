#include "riftort/training.hpp"

#include <algorithm>
#include <cmath>

#include "riftort/errors.hpp"

namespace riftort {

namespace {

constexpr int kChunkRows = 8192;
// SIN caches beyond this many doubles are recomputed per pass instead
constexpr std::int64_t kCacheLimit = 40'000'000;

void check_config(const FitConfig& c) {
    if (c.time_points <= 0) throw ValidationError("fit: need time_points > 0");
    if (c.ridge_lambda < 0.0) throw ValidationError("fit: ridge_lambda must be >= 0");
    if (c.max_iters <= 0) throw ValidationError("fit: need max_iters > 0");
    if (!(c.armijo_c > 0.0 && c.armijo_c < 1.0) || !(c.armijo_backtrack > 0.0 && c.armijo_backtrack < 1.0))
        throw ValidationError("fit: armijo parameters out of range");
    if (!(c.init_step > 0.0)) throw ValidationError("fit: init_step must be positive");
}

// Visit the stacked training set (all samples at every grid time) in
// fixed-size row blocks, always in the same order: results are independent of
// chunk boundaries only up to rounding, so the order itself is part of the
// deterministic contract.
template <class Fn>
void for_each_block(const PairedCoupling& cpl, int T, const Eigen::MatrixXd& vel, Fn&& fn) {
    const Eigen::VectorXd grid = time_grid(T);
    const int n = cpl.n();
    for (int k = 0; k < T; ++k) {
        const double t = grid[k];
        for (int r0 = 0; r0 < n; r0 += kChunkRows) {
            const int m = std::min(kChunkRows, n - r0);
            const Eigen::MatrixXd pos =
                (1.0 - t) * cpl.x0.middleRows(r0, m) + t * cpl.x1.middleRows(r0, m);
            const Eigen::VectorXd tv = Eigen::VectorXd::Constant(m, t);
            fn(pos, tv, vel.middleRows(r0, m));
        }
    }
}

// Solve (gram + ridge I) X = rhs with gram symmetric PSD.  Cholesky first;
// on failure fall back to an eigenvalue solve with small eigenvalues clipped,
// unless there is no ridge at all, in which case the system is genuinely
// singular and we refuse.
Eigen::MatrixXd solve_regularized(Eigen::MatrixXd gram, const Eigen::MatrixXd& rhs, double ridge) {
    gram.diagonal().array() += ridge;
    {
        Eigen::LLT<Eigen::MatrixXd> llt(gram);
        if (llt.info() == Eigen::Success) {
            Eigen::MatrixXd sol = llt.solve(rhs);
            if (sol.allFinite()) return sol;
        }
    }
    if (ridge <= 0.0)
        throw NumericError(
            "normal equations are singular with ridge_lambda = 0; set ridge_lambda > 0");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram);
    if (es.info() != Eigen::Success) throw NumericError("eigendecomposition failed in solver");
    const Eigen::VectorXd inv = es.eigenvalues().unaryExpr(
        [](double l) { return l > 1e-12 ? 1.0 / l : 0.0; });
    return es.eigenvectors() * (inv.asDiagonal() * (es.eigenvectors().transpose() * rhs));
}

}  // namespace

FreeFieldFit fit_free_field(const PairedCoupling& cpl, const FeatureMap& map,
                            const FitConfig& config) {
    cpl.validate();
    check_config(config);
    if (map.dim() != cpl.dim()) throw ValidationError("fit_free_field: dimension mismatch");

    const int F = map.num_features();
    const int d = cpl.dim();
    const Eigen::Index P = static_cast<Eigen::Index>(cpl.n()) * config.time_points;
    const Eigen::MatrixXd vel = cpl.displacement();

    Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(F, F);
    Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(F, d);
    for_each_block(cpl, config.time_points,
                   vel, [&](const Eigen::MatrixXd& pos, const Eigen::VectorXd& tv,
                            const auto& v) {
                       const Eigen::MatrixXd phi = map.feature_rows(pos, tv);
                       gram.selfadjointView<Eigen::Lower>().rankUpdate(phi.transpose(), 1.0);
                       rhs.noalias() += phi.transpose() * v;
                   });
    gram = gram.selfadjointView<Eigen::Lower>();
    gram /= static_cast<double>(P);
    rhs /= static_cast<double>(P);

    FreeFieldFit out;
    out.field.map = map;
    out.field.coef = solve_regularized(gram, rhs, config.ridge_lambda);

    // report the honest residual rather than the algebraic shortcut, which
    // cancels catastrophically when the coupling is nearly straight
    double sq = 0.0;
    for_each_block(cpl, config.time_points, vel,
                   [&](const Eigen::MatrixXd& pos, const Eigen::VectorXd& tv, const auto& v) {
                       sq += (map.feature_rows(pos, tv) * out.field.coef - v).squaredNorm();
                   });
    out.report.final_loss = sq / static_cast<double>(P);
    const Eigen::MatrixXd g =
        2.0 * (gram * out.field.coef + config.ridge_lambda * out.field.coef - rhs);
    out.report.final_grad_norm = g.norm();
    out.report.iterations = 1;
    out.report.converged = true;
    out.report.loss_history = {out.report.final_loss +
                               config.ridge_lambda * out.field.coef.squaredNorm()};
    return out;
}

namespace {

// Shared accumulation for the matching objective and its gradient.  Works
// from the angle matrix so the potential's gradient and the chain rule reuse
// one sin() evaluation.
struct MatchingAccumulator {
    const CostFunction& cost;
    const PotentialField& f;
    double loss = 0.0;            // sum of c*(grad f) - <v, grad f>
    Eigen::VectorXd grad;         // unscaled gradient accumulator (length F)
    bool want_grad;

    MatchingAccumulator(const CostFunction& c, const PotentialField& field, bool g)
        : cost(c), f(field), want_grad(g) {
        if (g) grad = Eigen::VectorXd::Zero(field.map.num_features());
    }

    // sines: precomputed -scale * sin(angles) for this block, or empty to
    // compute on the fly
    void add(const Eigen::MatrixXd& pos, const Eigen::VectorXd& tv, const Eigen::MatrixXd& v,
             const Eigen::MatrixXd* sines) {
        const FeatureMap& map = f.map;
        const int M = map.num_random();
        const int d = map.dim();
        Eigen::MatrixXd local;
        if (!sines) {
            local = ((-map.scale()) * map.angles(pos, tv).array().sin()).matrix();
            sines = &local;
        }
        // grad f rows = S * (diag(theta_M) freq_x) (+ affine shift); folding the
        // coefficients into the small frequency matrix avoids touching the
        // block-sized sine matrix more than once
        Eigen::MatrixXd gf = (*sines) * (f.theta.head(M).asDiagonal() * map.freq_x());
        if (map.has_affine_block())
            gf.rowwise() += f.theta.segment(M + 1, d).transpose();

        loss += cost.conjugate_rows(gf).sum() - gf.cwiseProduct(v).sum();

        if (want_grad) {
            const Eigen::MatrixXd w = cost.conjugate_grad_rows(gf) - v;  // block x d
            // d(grad f)/dtheta_j = S_col_j freq_x_row_j, so the j-th gradient
            // entry is <freq_x_row_j, (S^T w)_row_j>
            grad.head(M).noalias() +=
                ((sines->transpose() * w).cwiseProduct(map.freq_x())).rowwise().sum();
            if (map.has_affine_block())
                grad.segment(M + 1, d) += w.colwise().sum().transpose();
        }
    }
};

double mean_displacement_cost(const CostFunction& cost, const Eigen::MatrixXd& vel) {
    return cost.value_rows(vel).mean();
}

}  // namespace

double matching_loss(const PairedCoupling& cpl, const PotentialField& f, const CostFunction& cost,
                     int time_points) {
    cpl.validate();
    if (time_points <= 0) throw ValidationError("matching_loss: need time_points > 0");
    if (f.map.dim() != cpl.dim()) throw ValidationError("matching_loss: dimension mismatch");
    const Eigen::MatrixXd vel = cpl.displacement();
    MatchingAccumulator acc(cost, f, false);
    for_each_block(cpl, time_points, vel,
                   [&](const Eigen::MatrixXd& pos, const Eigen::VectorXd& tv,
                       const auto& v) { acc.add(pos, tv, v, nullptr); });
    const double P = static_cast<double>(cpl.n()) * time_points;
    return acc.loss / P + mean_displacement_cost(cost, vel);
}

Eigen::VectorXd matching_loss_grad(const PairedCoupling& cpl, const PotentialField& f,
                                   const CostFunction& cost, int time_points) {
    cpl.validate();
    if (time_points <= 0) throw ValidationError("matching_loss_grad: need time_points > 0");
    if (f.map.dim() != cpl.dim()) throw ValidationError("matching_loss_grad: dimension mismatch");
    const Eigen::MatrixXd vel = cpl.displacement();
    MatchingAccumulator acc(cost, f, true);
    for_each_block(cpl, time_points, vel,
                   [&](const Eigen::MatrixXd& pos, const Eigen::VectorXd& tv,
                       const auto& v) { acc.add(pos, tv, v, nullptr); });
    const double P = static_cast<double>(cpl.n()) * time_points;
    return acc.grad / P;
}

namespace {

PotentialFit fit_potential_quadratic(const PairedCoupling& cpl, const FeatureMap& map,
                                     const CostFunction& cost, const FitConfig& config) {
    const int F = map.num_features();
    const int M = map.num_random();
    const int d = map.dim();
    const Eigen::Index P = static_cast<Eigen::Index>(cpl.n()) * config.time_points;
    const Eigen::MatrixXd vel = cpl.displacement();

    Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(F, F);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(F);
    Eigen::MatrixXd design;  // per-coordinate gradient design block, reused

    for_each_block(cpl, config.time_points, vel,
                   [&](const Eigen::MatrixXd& pos, const Eigen::VectorXd& tv, const auto& v) {
                       const Eigen::Index m = pos.rows();
                       const Eigen::MatrixXd sines =
                           ((-map.scale()) * map.angles(pos, tv).array().sin()).matrix();
                       design.resize(m, F);
                       for (int k = 0; k < d; ++k) {
                           design.leftCols(M) =
                               sines.array().rowwise() * map.freq_x().col(k).transpose().array();
                           if (map.has_affine_block()) {
                               design.middleCols(M, F - M).setZero();
                               design.col(M + 1 + k).setOnes();
                           }
                           gram.selfadjointView<Eigen::Lower>().rankUpdate(design.transpose(), 1.0);
                           rhs.noalias() += design.transpose() * v.col(k);
                       }
                   });
    gram = gram.selfadjointView<Eigen::Lower>();
    gram /= static_cast<double>(P);
    rhs /= static_cast<double>(P);

    PotentialFit out;
    out.field.map = map;
    // objective = matching + lambda |theta|^2; the quadratic matching term
    // carries a 1/2, so the ridge enters the normal equations doubled
    out.field.theta = solve_regularized(gram, rhs, 2.0 * config.ridge_lambda);

    out.report.final_loss = matching_loss(cpl, out.field, cost, config.time_points);
    const Eigen::VectorXd g = gram * out.field.theta - rhs +
                              2.0 * config.ridge_lambda * out.field.theta;
    out.report.final_grad_norm = g.norm();
    out.report.iterations = 1;
    out.report.converged = true;
    out.report.loss_history = {out.report.final_loss +
                               config.ridge_lambda * out.field.theta.squaredNorm()};
    return out;
}

// Cached stacked data for the descent path: precomputed sine blocks (when
// they fit) plus stacked velocities.  Keeps every pass allocation-free and in
// a fixed summation order.
struct DescentWorkspace {
    const FeatureMap& map;
    const CostFunction& cost;
    std::vector<Eigen::MatrixXd> sines;  // per block, empty if not cached
    std::vector<Eigen::MatrixXd> pos;    // retained only when sines are not cached
    std::vector<Eigen::VectorXd> times;
    std::vector<Eigen::MatrixXd> vels;
    double base_cost = 0.0;  // mean c(x1 - x0)
    Eigen::Index P = 0;
    bool cached = false;

    DescentWorkspace(const PairedCoupling& cpl, const FeatureMap& m, const CostFunction& c, int T)
        : map(m), cost(c) {
        const Eigen::MatrixXd vel = cpl.displacement();
        base_cost = mean_displacement_cost(cost, vel);
        P = static_cast<Eigen::Index>(cpl.n()) * T;
        cached = static_cast<std::int64_t>(P) * m.num_random() <= kCacheLimit;
        for_each_block(cpl, T, vel,
                       [&](const Eigen::MatrixXd& p, const Eigen::VectorXd& tv, const auto& v) {
                           times.push_back(tv);
                           vels.push_back(v);
                           if (cached)
                               sines.push_back(
                                   ((-m.scale()) * m.angles(p, tv).array().sin()).matrix());
                           else
                               pos.push_back(p);
                       });
    }

    // loss (unregularized) and optionally gradient (unregularized)
    double evaluate(const PotentialField& f, Eigen::VectorXd* grad) const {
        MatchingAccumulator acc(cost, f, grad != nullptr);
        for (std::size_t b = 0; b < times.size(); ++b) {
            if (cached)
                acc.add(Eigen::MatrixXd(), times[b], vels[b], &sines[b]);
            else
                acc.add(pos[b], times[b], vels[b], nullptr);
        }
        if (grad) *grad = acc.grad / static_cast<double>(P);
        return acc.loss / static_cast<double>(P) + base_cost;
    }
};

PotentialFit fit_potential_descent(const PairedCoupling& cpl, const FeatureMap& map,
                                   const CostFunction& cost, const FitConfig& config) {
    const int F = map.num_features();
    const DescentWorkspace ws(cpl, map, cost, config.time_points);
    const double lambda = config.ridge_lambda;

    PotentialFit out;
    out.field.map = map;
    out.field.theta = Eigen::VectorXd::Zero(F);

    double fit_term = ws.evaluate(out.field, nullptr);
    double objective = fit_term;  // theta = 0: no ridge contribution
    out.report.loss_history.push_back(objective);

    Eigen::VectorXd grad(F);
    PotentialField trial{map, Eigen::VectorXd(F)};
    int iters = 0;
    double grad_norm = 0.0;
    bool converged = false;

    while (iters < config.max_iters) {
        ws.evaluate(out.field, &grad);
        grad += 2.0 * lambda * out.field.theta;
        grad_norm = grad.norm();
        if (grad_norm <= config.grad_tol) {
            converged = true;
            break;
        }
        double step = config.init_step;
        const double gg = grad.squaredNorm();
        for (;;) {
            trial.theta = out.field.theta - step * grad;
            const double trial_fit = ws.evaluate(trial, nullptr);
            const double trial_obj = trial_fit + lambda * trial.theta.squaredNorm();
            if (trial_obj <= objective - config.armijo_c * step * gg) {
                out.field.theta.swap(trial.theta);
                fit_term = trial_fit;
                objective = trial_obj;
                break;
            }
            step *= config.armijo_backtrack;
            if (step < 1e-16)
                throw NumericError(
                    "line search collapsed (step < 1e-16); objective may be non-smooth here "
                    "or gradients are inconsistent");
        }
        ++iters;
        out.report.loss_history.push_back(objective);
    }
    if (!converged && iters == config.max_iters) {
        ws.evaluate(out.field, &grad);
        grad += 2.0 * lambda * out.field.theta;
        grad_norm = grad.norm();
        converged = grad_norm <= config.grad_tol;
    }

    out.report.final_loss = fit_term;
    out.report.iterations = iters;
    out.report.final_grad_norm = grad_norm;
    out.report.converged = converged;
    return out;
}

}  // namespace

PotentialFit fit_potential(const PairedCoupling& cpl, const FeatureMap& map,
                           const CostFunction& cost, const FitConfig& config) {
    cpl.validate();
    check_config(config);
    if (map.dim() != cpl.dim()) throw ValidationError("fit_potential: dimension mismatch");
    if (cost.kind() == CostFunction::Kind::Quadratic)
        return fit_potential_quadratic(cpl, map, cost, config);
    return fit_potential_descent(cpl, map, cost, config);
}

}  // namespace riftort
