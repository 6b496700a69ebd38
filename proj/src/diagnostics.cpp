#include "riftort/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "riftort/errors.hpp"
#include "riftort/rng.hpp"
#include "riftort/training.hpp"

namespace riftort {

double transport_cost(const PairedCoupling& coupling, const CostFunction& cost) {
    coupling.validate();
    return cost.value_rows(coupling.displacement()).mean();
}

double pathwise_cost(const Trajectory& traj, const CostFunction& cost) {
    if (traj.states.size() < 2) throw ValidationError("pathwise_cost: too few states");
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < traj.states.size(); ++i) {
        const double h = traj.times[static_cast<Eigen::Index>(i) + 1] -
                         traj.times[static_cast<Eigen::Index>(i)];
        // finite-difference velocity on this step; for straight paths this is
        // exact, so straightness of a linear interpolation is identically zero
        const Eigen::MatrixXd v = (traj.states[i + 1] - traj.states[i]) / h;
        acc += h * cost.value_rows(v).mean();
    }
    return acc;
}

double straightness(const Trajectory& traj, const CostFunction& cost) {
    return pathwise_cost(traj, cost) - transport_cost(traj.endpoints(), cost);
}

double straightness_gap(const PairedCoupling& coupling, const FeatureMap& map,
                        const FitConfig& fit_config) {
    return fit_free_field(coupling, map, fit_config).report.final_loss;
}

double marginal_preservation(const BatchDrift& residual, const std::vector<TimeSlice>& slices,
                             int num_test_functions, std::uint64_t seed) {
    if (slices.empty()) throw ValidationError("marginal_preservation: no slices");
    if (num_test_functions <= 0) throw ValidationError("marginal_preservation: need test functions");
    const int d = static_cast<int>(slices.front().x.cols());
    constexpr int kTestFeatures = 64;

    // one shared random basis, independent theta per test function
    const FeatureMap basis(d, kTestFeatures, 1.0, 1.0, false,
                           CounterRng::derive(seed, streams::kTestFunction).bits(0));
    const CounterRng thetas = CounterRng::derive(seed, streams::kTestFunction + 1);
    std::vector<Eigen::VectorXd> theta(static_cast<std::size_t>(num_test_functions));
    for (int j = 0; j < num_test_functions; ++j) {
        theta[j].resize(kTestFeatures);
        for (int m = 0; m < kTestFeatures; ++m)
            theta[j][m] = thetas.normal(static_cast<std::uint64_t>(j) * kTestFeatures + m);
    }

    std::vector<double> num(theta.size(), 0.0), den(theta.size(), 0.0);
    Eigen::Index total = 0;
    for (const TimeSlice& s : slices) {
        if (s.x.cols() != d) throw ValidationError("marginal_preservation: slice dim mismatch");
        const Eigen::MatrixXd r = residual(s.x, s.t);
        const Eigen::VectorXd rn = r.rowwise().norm();
        const Eigen::VectorXd tv = Eigen::VectorXd::Constant(s.x.rows(), 0.0);
        const Eigen::MatrixXd sines = ((-basis.scale()) * basis.angles(s.x, tv).array().sin()).matrix();
        for (std::size_t j = 0; j < theta.size(); ++j) {
            const Eigen::MatrixXd grads =
                sines * (theta[j].asDiagonal() * basis.freq_x());  // n x d
            num[j] += grads.cwiseProduct(r).sum();
            den[j] += grads.rowwise().norm().dot(rn);
        }
        total += s.x.rows();
    }

    double worst = 0.0;
    for (std::size_t j = 0; j < theta.size(); ++j) {
        const double mean_pair = std::abs(num[j]) / static_cast<double>(total);
        const double mean_scale = den[j] / static_cast<double>(total);
        worst = std::max(worst, mean_pair / std::max(mean_scale, 1e-300));
    }
    return worst;
}

double energy_distance(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    if (a.cols() != b.cols()) throw ValidationError("energy_distance: dimension mismatch");
    if (a.rows() == 0 || b.rows() == 0) throw ValidationError("energy_distance: empty sample");
    const auto n = a.rows(), m = b.rows();
    auto mean_cross = [](const Eigen::MatrixXd& u, const Eigen::MatrixXd& v) {
        double s = 0.0;
        for (Eigen::Index i = 0; i < u.rows(); ++i)
            s += (v.rowwise() - u.row(i)).rowwise().norm().sum();
        return s / (static_cast<double>(u.rows()) * static_cast<double>(v.rows()));
    };
    // full-grid means (V-statistic): nonnegative, exactly zero on identical input
    return 2.0 * mean_cross(a, b) - mean_cross(a, a) - mean_cross(b, b);
}

HjResidual hj_residual(const PotentialField& f, const CostFunction& cost,
                       const std::vector<TimeSlice>& slices) {
    if (slices.empty()) throw ValidationError("hj_residual: no slices");
    const int d = f.map.dim();
    const double h = 1e-4;

    auto equation_rows = [&](const Eigen::MatrixXd& x, const Eigen::VectorXd& tv) {
        return (f.time_deriv_rows(x, tv) + cost.conjugate_rows(f.grad_rows(x, tv))).eval();
    };

    HjResidual out;
    double sum = 0.0;
    Eigen::Index total = 0;
    for (const TimeSlice& s : slices) {
        if (s.x.cols() != d) throw ValidationError("hj_residual: slice dim mismatch");
        const Eigen::VectorXd tv = Eigen::VectorXd::Constant(s.x.rows(), s.t);
        Eigen::MatrixXd grad_sq = Eigen::MatrixXd::Zero(s.x.rows(), d);
        for (int k = 0; k < d; ++k) {
            Eigen::MatrixXd xp = s.x, xm = s.x;
            xp.col(k).array() += h;
            xm.col(k).array() -= h;
            grad_sq.col(k) = (equation_rows(xp, tv) - equation_rows(xm, tv)) / (2.0 * h);
        }
        const Eigen::VectorXd norms = grad_sq.rowwise().norm();
        sum += norms.sum();
        out.max_grad_norm = std::max(out.max_grad_norm, norms.maxCoeff());
        total += norms.size();
    }
    out.mean_grad_norm = sum / static_cast<double>(total);
    return out;
}

double hopflax_gap(const PotentialField& f, const CostFunction& cost, double t,
                   const Eigen::MatrixXd& probes, const LatticeSpec& grid) {
    const int d = f.map.dim();
    if (t < 0.1) throw ValidationError("hopflax_gap: needs t >= 0.1 (formula degenerates near 0)");
    if (d > 2) throw ValidationError("hopflax_gap: lattice minimization supports d <= 2 only");
    if (probes.cols() != d) throw ValidationError("hopflax_gap: probe dimension mismatch");
    if (grid.lo.size() != d || grid.hi.size() != d)
        throw ValidationError("hopflax_gap: lattice bounds dimension mismatch");
    if (grid.points_per_dim < 2) throw ValidationError("hopflax_gap: need >= 2 lattice points");

    const int G1 = grid.points_per_dim;
    const Eigen::Index G = d == 1 ? G1 : static_cast<Eigen::Index>(G1) * G1;
    Eigen::MatrixXd lattice(G, d);
    for (Eigen::Index g = 0; g < G; ++g)
        for (int k = 0; k < d; ++k) {
            const int idx = d == 1 ? static_cast<int>(g) : (k == 0 ? static_cast<int>(g) / G1
                                                                   : static_cast<int>(g) % G1);
            lattice(g, k) = grid.lo[k] + (grid.hi[k] - grid.lo[k]) * idx / (G1 - 1);
        }

    const Eigen::VectorXd f0 = f.value_rows(lattice, Eigen::VectorXd::Zero(G));
    const Eigen::VectorXd ft =
        f.value_rows(probes, Eigen::VectorXd::Constant(probes.rows(), t));

    double worst = 0.0;
    for (Eigen::Index p = 0; p < probes.rows(); ++p) {
        const Eigen::MatrixXd disp = ((-lattice).rowwise() + probes.row(p)) / t;
        const double best = (t * cost.value_rows(disp) + f0).minCoeff();
        worst = std::max(worst, std::abs(ft[p] - best));
    }
    const double spread = ft.maxCoeff() - ft.minCoeff();
    return worst / std::max(spread, 1e-12);
}

double oracle_quantile_1d(const SampleSet& s0, const SampleSet& s1, const CostFunction& cost) {
    if (s0.dim() != 1 || s1.dim() != 1)
        throw ValidationError("oracle_quantile_1d: requires 1-d samples");
    if (s0.n() != s1.n()) throw ValidationError("oracle_quantile_1d: sample counts differ");
    std::vector<double> a(s0.data.col(0).begin(), s0.data.col(0).end());
    std::vector<double> b(s1.data.col(0).begin(), s1.data.col(0).end());
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    Eigen::MatrixXd disp(static_cast<Eigen::Index>(a.size()), 1);
    for (std::size_t i = 0; i < a.size(); ++i) disp(static_cast<Eigen::Index>(i), 0) = b[i] - a[i];
    return cost.value_rows(disp).mean();
}

AssignmentResult oracle_hungarian(const SampleSet& s0, const SampleSet& s1,
                                  const CostFunction& cost) {
    if (s0.n() != s1.n()) throw ValidationError("oracle_hungarian: sample counts differ");
    if (s0.dim() != s1.dim()) throw ValidationError("oracle_hungarian: dimensions differ");
    const int n = s0.n();
    if (n > 512) throw ValidationError("oracle_hungarian: n > 512 (cubic algorithm guard)");

    Eigen::MatrixXd a(n, n);
    for (int i = 0; i < n; ++i)
        a.row(i) = cost.value_rows((s1.data.rowwise() - s0.data.row(i))).transpose();

    // shortest augmenting path with potentials, 1-indexed
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<int> p(n + 1, 0), way(n + 1, 0);
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::vector<double> minv(n + 1, inf);
        std::vector<char> used(n + 1, 0);
        do {
            used[j0] = 1;
            const int i0 = p[j0];
            int j1 = -1;
            double delta = inf;
            for (int j = 1; j <= n; ++j)
                if (!used[j]) {
                    const double cur = a(i0 - 1, j - 1) - u[i0] - v[j];
                    if (cur < minv[j]) {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if (minv[j] < delta) {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            for (int j = 0; j <= n; ++j)
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const int j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0);
    }

    AssignmentResult out;
    out.assignment.assign(n, -1);
    double total = 0.0;
    for (int j = 1; j <= n; ++j) {
        out.assignment[p[j] - 1] = j - 1;
        total += a(p[j] - 1, j - 1);
    }
    out.cost = total / n;
    return out;
}

namespace {

Eigen::MatrixXd sym_sqrt(const Eigen::MatrixXd& m) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
    if (es.info() != Eigen::Success) throw NumericError("matrix square root failed");
    if (es.eigenvalues().minCoeff() < -1e-10)
        throw ValidationError("matrix square root: input not PSD");
    return es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal() *
           es.eigenvectors().transpose();
}

}  // namespace

double oracle_gauss_quadratic(const Eigen::VectorXd& mean0, const Eigen::MatrixXd& cov0,
                              const Eigen::VectorXd& mean1, const Eigen::MatrixXd& cov1) {
    if (mean0.size() != mean1.size() || cov0.rows() != mean0.size() || cov1.rows() != mean1.size())
        throw ValidationError("oracle_gauss_quadratic: dimension mismatch");
    const Eigen::MatrixXd r1 = sym_sqrt(cov1);
    const Eigen::MatrixXd cross = sym_sqrt(r1 * cov0 * r1);
    const double tr = cov0.trace() + cov1.trace() - 2.0 * cross.trace();
    return 0.5 * ((mean1 - mean0).squaredNorm() + tr);
}

}  // namespace riftort
