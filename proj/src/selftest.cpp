#include "riftort/selftest.hpp"

#include <chrono>
#include <cmath>
#include <functional>
#include <sstream>

#include "riftort/config.hpp"
#include "riftort/costs.hpp"
#include "riftort/diagnostics.hpp"
#include "riftort/errors.hpp"
#include "riftort/fields.hpp"
#include "riftort/flow.hpp"
#include "riftort/rng.hpp"
#include "riftort/synthdata.hpp"
#include "riftort/training.hpp"

namespace riftort {

namespace {

constexpr std::uint64_t kSuiteSeed = 20240817ULL;

struct PropertyFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void expect(bool cond, const std::string& msg) {
    if (!cond) throw PropertyFailure(msg);
}

std::string fmt(double v) {
    std::ostringstream os;
    os << v;
    return os.str();
}

std::vector<CostFunction> suite_costs() {
    return {CostFunction::quadratic(), CostFunction::power(1.5), CostFunction::power(3.0)};
}

Eigen::VectorXd random_vec(const CounterRng& rng, std::uint64_t base, int d, double scale) {
    Eigen::VectorXd v(d);
    for (int k = 0; k < d; ++k) v[k] = scale * rng.normal(base + static_cast<std::uint64_t>(k));
    return v;
}

// ---- cost properties ------------------------------------------------------

void prop_fenchel_young() {
    const CounterRng rng = CounterRng::derive(kSuiteSeed, 101);
    for (const CostFunction& c : suite_costs()) {
        for (int i = 0; i < 10000; ++i) {
            const int d = 1 + i % 3;
            const Eigen::VectorXd x = random_vec(rng, 10ull * i, d, 2.0);
            const Eigen::VectorXd y = random_vec(rng, 10ull * i + 5, d, 2.0);
            const double m = c.matching(x, y);
            expect(m >= -1e-12, c.name() + ": matching value " + fmt(m) + " below -1e-12");
        }
    }
}

// independent brute-force conjugate: grid-maximize <x,y> - |x|^p/p directly
double grid_conjugate_1d(double y, double p, double radius, double spacing) {
    double best = -1e300;
    const long steps = std::lround(2.0 * radius / spacing);
    for (long i = 0; i <= steps; ++i) {
        const double x = -radius + static_cast<double>(i) * spacing;
        const double v = x * y - std::pow(std::abs(x), p) / p;
        if (v > best) best = v;
    }
    return best;
}

double grid_conjugate_2d(double y0, double y1, double p, double radius, double spacing) {
    double best = -1e300;
    const long steps = std::lround(2.0 * radius / spacing);
    for (long i = 0; i <= steps; ++i) {
        const double x0 = -radius + static_cast<double>(i) * spacing;
        for (long j = 0; j <= steps; ++j) {
            const double x1 = -radius + static_cast<double>(j) * spacing;
            const double v = x0 * y0 + x1 * y1 - std::pow(std::hypot(x0, x1), p) / p;
            if (v > best) best = v;
        }
    }
    return best;
}

void prop_conjugate_grid() {
    for (const CostFunction& c : suite_costs()) {
        const double p = c.exponent();
        for (double y : {-1.3, -0.4, 0.0, 0.7, 1.9}) {
            Eigen::VectorXd yv(1);
            yv[0] = y;
            const double brute = grid_conjugate_1d(y, p, 4.0, 1e-3);
            const double got = c.conjugate(yv);
            expect(std::abs(got - brute) <= 1e-3,
                   c.name() + ": conj(" + fmt(y) + ") = " + fmt(got) + " vs grid " + fmt(brute));
        }
        Eigen::VectorXd y2(2);
        y2 << 0.8, -0.5;
        const double brute2 = grid_conjugate_2d(y2[0], y2[1], p, 3.0, 2e-3);
        expect(std::abs(c.conjugate(y2) - brute2) <= 1e-3,
               c.name() + ": 2d conjugate vs grid: " + fmt(c.conjugate(y2)) + " vs " + fmt(brute2));
    }
}

void prop_conjugate_inversion() {
    const CounterRng rng = CounterRng::derive(kSuiteSeed, 102);
    for (const CostFunction& c : suite_costs()) {
        for (int i = 0; i < 500; ++i) {
            const int d = 1 + i % 3;
            Eigen::VectorXd x = random_vec(rng, 10ull * i, d, 1.0);
            if (x.norm() < 0.1) x.array() += 0.5;
            const Eigen::VectorXd back = c.conjugate_grad(c.grad(x));
            expect((back - x).norm() <= 1e-9,
                   c.name() + ": grad c* of grad c drifted by " + fmt((back - x).norm()));
        }
    }
}

// reusable checker so the mutation-sanity property can probe it
double max_gradient_error(const std::function<double(const Eigen::VectorXd&)>& value,
                          const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& grad,
                          const std::vector<Eigen::VectorXd>& points, double h) {
    double worst = 0.0;
    for (const Eigen::VectorXd& x : points) {
        const Eigen::VectorXd g = grad(x);
        for (int k = 0; k < x.size(); ++k) {
            Eigen::VectorXd xp = x, xm = x;
            xp[k] += h;
            xm[k] -= h;
            const double fd = (value(xp) - value(xm)) / (2.0 * h);
            const double scale = std::max({std::abs(fd), std::abs(g[k]), 1e-8});
            worst = std::max(worst, std::abs(fd - g[k]) / scale);
        }
    }
    return worst;
}

std::vector<Eigen::VectorXd> off_origin_points() {
    const CounterRng rng = CounterRng::derive(kSuiteSeed, 103);
    std::vector<Eigen::VectorXd> pts;
    for (int i = 0; i < 200; ++i) {
        const int d = 1 + i % 3;
        Eigen::VectorXd x = random_vec(rng, 10ull * i, d, 1.5);
        if (x.norm() < 0.1) x.array() += 0.7;  // gradient checks stay away from the kink
        pts.push_back(x);
    }
    return pts;
}

void prop_gradients() {
    const auto pts = off_origin_points();
    for (const CostFunction& c : suite_costs()) {
        const double err_c = max_gradient_error(
            [&](const Eigen::VectorXd& x) { return c.value(x); },
            [&](const Eigen::VectorXd& x) { return c.grad(x); }, pts, 1e-5);
        expect(err_c <= 1e-5, c.name() + ": grad mismatch rel " + fmt(err_c));
        const double err_j = max_gradient_error(
            [&](const Eigen::VectorXd& x) { return c.conjugate(x); },
            [&](const Eigen::VectorXd& x) { return c.conjugate_grad(x); }, pts, 1e-5);
        expect(err_j <= 1e-5, c.name() + ": conjugate grad mismatch rel " + fmt(err_j));
    }
}

void prop_matching_bregman() {
    const CounterRng rng = CounterRng::derive(kSuiteSeed, 104);
    for (const CostFunction& c : suite_costs()) {
        for (int i = 0; i < 1000; ++i) {
            const int d = 1 + i % 2;
            const Eigen::VectorXd x = random_vec(rng, 10ull * i, d, 1.5);
            Eigen::VectorXd y = random_vec(rng, 10ull * i + 4, d, 1.5);
            if (y.norm() < 1e-3) y.array() += 0.3;
            const double lhs = c.matching(x, y);
            const double rhs = c.bregman(x, c.conjugate_grad(y));
            expect(std::abs(lhs - rhs) <= 1e-9,
                   c.name() + ": matching vs bregman differ by " + fmt(std::abs(lhs - rhs)));
        }
    }
}

void prop_mutation_sanity() {
    const CostFunction c = CostFunction::power(3.0);
    const auto pts = off_origin_points();
    const double honest = max_gradient_error(
        [&](const Eigen::VectorXd& x) { return c.value(x); },
        [&](const Eigen::VectorXd& x) { return c.grad(x); }, pts, 1e-5);
    expect(honest <= 1e-5, "checker rejected the true gradient (err " + fmt(honest) + ")");
    // a sign-flipped gradient must be flagged loudly, or the checker is dead
    const double flipped = max_gradient_error(
        [&](const Eigen::VectorXd& x) { return c.value(x); },
        [&](const Eigen::VectorXd& x) { return (-c.grad(x)).eval(); }, pts, 1e-5);
    expect(flipped > 0.5, "checker failed to flag a sign-flipped gradient (err only " +
                              fmt(flipped) + ")");
}

// ---- synthetic data properties -------------------------------------------

void prop_sampling_determinism() {
    const auto specs = {
        DistributionSpec::parse("gaussian:mean=0,0;cov=I"),
        DistributionSpec::parse("uniform:lo=-1;hi=2"),
        DistributionSpec::parse("twopoint:a=-1,0;b=1,1"),
        DistributionSpec::parse("mixture:weights=0.3,0.7;means=-2|2;covs=0.5|0.25"),
    };
    for (const DistributionSpec& s : specs) {
        const SampleSet a = sample(s, 64, 7);
        const SampleSet b = sample(s, 64, 7);
        expect(a.data == b.data, s.name() + ": same seed gave different samples");
        const SampleSet c = sample(s, 64, 8);
        expect(a.data != c.data, s.name() + ": different seeds gave identical samples");
    }
}

void prop_gaussian_moments() {
    const DistributionSpec s = DistributionSpec::parse("gaussian:mean=1.5;cov=2.25");
    const SampleSet x = sample(s, 20000, kSuiteSeed);
    const double mean = x.data.col(0).mean();
    const double var = (x.data.col(0).array() - mean).square().mean();
    expect(std::abs(mean - 1.5) <= 0.05, "gaussian mean off: " + fmt(mean));
    expect(std::abs(var - 2.25) <= 0.15, "gaussian variance off: " + fmt(var));
}

void prop_coupling_marginals() {
    const SampleSet s0 = sample(DistributionSpec::parse("gaussian:mean=0;cov=1"), 257, 11);
    const SampleSet s1 = sample(DistributionSpec::parse("gaussian:mean=3;cov=2"), 257, 12);
    const PairedCoupling cpl = independent_coupling(s0, s1, 13);
    expect(cpl.x0 == s0.data, "coupling altered x0");
    std::vector<double> a(s1.data.col(0).begin(), s1.data.col(0).end());
    std::vector<double> b(cpl.x1.col(0).begin(), cpl.x1.col(0).end());
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    expect(a == b, "coupling x1 is not a permutation of the target sample");
}

void prop_interpolation_endpoints() {
    const SampleSet s0 = sample(DistributionSpec::parse("gaussian:mean=0,0;cov=I"), 50, 3);
    const SampleSet s1 = sample(DistributionSpec::parse("gaussian:mean=2,0;cov=I"), 50, 4);
    const PairedCoupling cpl = independent_coupling(s0, s1, 5);
    expect(interpolate(cpl, 0.0).position == cpl.x0, "interpolation at 0 is not x0");
    expect(interpolate(cpl, 1.0).position == cpl.x1, "interpolation at 1 is not x1");
    const Eigen::MatrixXd mid = interpolate(cpl, 0.5).position;
    expect((mid - 0.5 * (cpl.x0 + cpl.x1)).cwiseAbs().maxCoeff() <= 1e-15,
           "midpoint interpolation mismatch");
    const Eigen::VectorXd grid = time_grid(4);
    expect(grid.size() == 4 && std::abs(grid[0] - 0.125) < 1e-15 &&
               std::abs(grid[3] - 0.875) < 1e-15,
           "midpoint time grid wrong");
}

// ---- feature/field properties --------------------------------------------

void prop_feature_gradients() {
    const FeatureMap fm(2, 64, 1.3, 0.6, true, kSuiteSeed + 1);
    PotentialField f{fm, {}};
    const CounterRng rng = CounterRng::derive(kSuiteSeed, 105);
    f.theta = random_vec(rng, 0, fm.num_features(), 1.0);
    const double h = 1e-6;
    double worst = 0.0, worst_t = 0.0;
    for (int i = 0; i < 40; ++i) {
        const Eigen::VectorXd x = random_vec(rng, 1000 + 10ull * i, 2, 1.5);
        const double t = rng.uniform(5000 + static_cast<std::uint64_t>(i));
        const Eigen::VectorXd g = f.grad(x, t);
        for (int k = 0; k < 2; ++k) {
            Eigen::VectorXd xp = x, xm = x;
            xp[k] += h;
            xm[k] -= h;
            const double fd = (f.value(xp, t) - f.value(xm, t)) / (2.0 * h);
            worst = std::max(worst, std::abs(fd - g[k]));
        }
        const double fdt = (f.value(x, t + h) - f.value(x, t - h)) / (2.0 * h);
        worst_t = std::max(worst_t, std::abs(fdt - f.time_deriv(x, t)));
    }
    expect(worst <= 1e-6, "potential spatial gradient vs FD: " + fmt(worst));
    expect(worst_t <= 1e-6, "potential time derivative vs FD: " + fmt(worst_t));
}

void prop_representation_sanity() {
    // fit the closed-form drift of the independent-gaussian flow on its range
    const int P = 4000, M = 512;
    const CounterRng rng = CounterRng::derive(kSuiteSeed, 106);
    Eigen::MatrixXd x(P, 1);
    Eigen::VectorXd t(P), target(P);
    for (int i = 0; i < P; ++i) {
        x(i, 0) = -3.0 + 6.0 * rng.uniform(2ull * i);
        t[i] = 0.02 + 0.96 * rng.uniform(2ull * i + 1);
        const double tt = t[i];
        target[i] = x(i, 0) * (2.0 * tt - 1.0) / (tt * tt + (1.0 - tt) * (1.0 - tt));
    }
    const double bw = 2.0 * median_pairwise_distance(x);
    const FeatureMap fm(1, M, bw, 0.5, true, kSuiteSeed + 2);
    const Eigen::MatrixXd phi = fm.feature_rows(x, t);
    Eigen::MatrixXd gram = (phi.transpose() * phi) / P;
    gram.diagonal().array() += 1e-8;
    const Eigen::VectorXd coef = gram.llt().solve(phi.transpose() * target / P);
    const double mse = (phi * coef - target).squaredNorm() / P;
    expect(mse <= 1e-2, "drift representation MSE " + fmt(mse) + " above 1e-2 at M=512");
}

void prop_field_roundtrip() {
    const FeatureMap fm(2, 48, 0.9, 0.4, true, kSuiteSeed + 3);
    const CounterRng rng = CounterRng::derive(kSuiteSeed, 107);
    PotentialField f{fm, random_vec(rng, 0, fm.num_features(), 0.7)};
    std::stringstream buf;
    save_field(buf, f);
    const PotentialField g = load_potential_field(buf);
    expect(g.map.freq_x() == fm.freq_x() && g.map.freq_t() == fm.freq_t() &&
               g.map.phase() == fm.phase() && g.theta == f.theta,
           "potential round-trip is not bitwise");

    FreeVectorField v{fm, Eigen::MatrixXd(fm.num_features(), 2)};
    for (int j = 0; j < v.coef.rows(); ++j)
        v.coef.row(j) = random_vec(rng, 1000 + 2ull * j, 2, 0.5).transpose();
    std::stringstream buf2;
    save_field(buf2, v);
    const FreeVectorField w = load_free_field(buf2);
    expect(w.coef == v.coef && w.map.freq_x() == fm.freq_x(),
           "free field round-trip is not bitwise");
    const Eigen::VectorXd probe = random_vec(rng, 5000, 2, 1.0);
    expect(v.eval(probe, 0.3) == w.eval(probe, 0.3), "round-tripped field evaluates differently");
}

// ---- training properties --------------------------------------------------

// exact two-point crossing: half the particles run -1 -> 1, half 1 -> -1
PairedCoupling crossing_coupling(int half) {
    PairedCoupling cpl;
    cpl.x0.resize(2 * half, 1);
    cpl.x1.resize(2 * half, 1);
    for (int i = 0; i < half; ++i) {
        cpl.x0(i, 0) = -1.0;
        cpl.x1(i, 0) = 1.0;
        cpl.x0(half + i, 0) = 1.0;
        cpl.x1(half + i, 0) = -1.0;
    }
    return cpl;
}

void prop_pythagorean_identity() {
    // On the crossing coupling with the T=3 midpoint grid (which contains
    // t=1/2, the only time where paths meet), the conditional mean velocity is
    // the plain velocity except at the crossing, where it is 0.  The matching
    // objective must then split exactly:
    //   E M(xdot; y) = E M(vbar; y) + E[c(xdot) - c(vbar)]
    const PairedCoupling cpl = crossing_coupling(8);
    const int T = 3;
    const Eigen::VectorXd grid = time_grid(T);
    const FeatureMap fm(1, 32, 1.1, 0.7, true, kSuiteSeed + 4);
    const CounterRng rng = CounterRng::derive(kSuiteSeed, 108);

    for (const CostFunction& c : suite_costs()) {
        PotentialField f{fm, random_vec(rng, 7777, fm.num_features(), 0.4)};
        const double lhs = matching_loss(cpl, f, c, T);

        double rhs = 0.0;
        Eigen::VectorXd one(1);
        for (int k = 0; k < T; ++k) {
            const double t = grid[k];
            const InterpolationSlice s = interpolate(cpl, t);
            for (int i = 0; i < cpl.n(); ++i) {
                const Eigen::VectorXd pos = s.position.row(i);
                const Eigen::VectorXd vel = s.velocity.row(i);
                const bool crossing = std::abs(t - 0.5) < 1e-12;
                const Eigen::VectorXd vbar =
                    crossing ? Eigen::VectorXd::Zero(1) : vel;  // group mean at the node
                const Eigen::VectorXd y = f.grad(pos, t);
                rhs += c.matching(vbar, y) + (c.value(vel) - c.value(vbar));
            }
        }
        rhs /= static_cast<double>(cpl.n()) * T;
        expect(std::abs(lhs - rhs) <= 1e-9,
               c.name() + ": matching decomposition violated by " + fmt(std::abs(lhs - rhs)));
    }
}

void prop_matching_convexity() {
    const SampleSet s0 = sample(DistributionSpec::parse("gaussian:mean=0;cov=1"), 40, 21);
    const SampleSet s1 = sample(DistributionSpec::parse("gaussian:mean=1;cov=0.5"), 40, 22);
    const PairedCoupling cpl = independent_coupling(s0, s1, 23);
    const FeatureMap fm(1, 24, 1.2, 0.6, true, kSuiteSeed + 5);
    const CounterRng rng = CounterRng::derive(kSuiteSeed, 109);
    for (const CostFunction& c : suite_costs()) {
        for (int trial = 0; trial < 5; ++trial) {
            PotentialField fa{fm, random_vec(rng, 100ull * trial, fm.num_features(), 0.3)};
            PotentialField fb{fm, random_vec(rng, 100ull * trial + 50, fm.num_features(), 0.3)};
            const double la = matching_loss(cpl, fa, c, 6);
            const double lb = matching_loss(cpl, fb, c, 6);
            for (double w : {0.25, 0.5, 0.75}) {
                PotentialField fc{fm, w * fa.theta + (1.0 - w) * fb.theta};
                const double lc = matching_loss(cpl, fc, c, 6);
                expect(lc <= w * la + (1.0 - w) * lb + 1e-10,
                       c.name() + ": convexity chord violated by " +
                           fmt(lc - (w * la + (1.0 - w) * lb)));
            }
        }
    }
}

void prop_fit_determinism() {
    const SampleSet s0 = sample(DistributionSpec::parse("gaussian:mean=0;cov=1"), 120, 31);
    const SampleSet s1 = sample(DistributionSpec::parse("gaussian:mean=2;cov=1"), 120, 32);
    const PairedCoupling cpl = independent_coupling(s0, s1, 33);
    const FeatureMap fm(1, 64, 1.5, 0.5, true, kSuiteSeed + 6);
    FitConfig fc;
    fc.time_points = 4;

    const PotentialFit a = fit_potential(cpl, fm, CostFunction::quadratic(), fc);
    const PotentialFit b = fit_potential(cpl, fm, CostFunction::quadratic(), fc);
    expect(a.field.theta == b.field.theta && a.report.final_loss == b.report.final_loss,
           "closed-form fit is not bitwise deterministic");

    FitConfig gd = fc;
    gd.max_iters = 40;
    const PotentialFit c1 = fit_potential(cpl, fm, CostFunction::power(1.5), gd);
    const PotentialFit c2 = fit_potential(cpl, fm, CostFunction::power(1.5), gd);
    expect(c1.field.theta == c2.field.theta &&
               c1.report.loss_history == c2.report.loss_history,
           "descent fit is not bitwise deterministic");

    const FreeFieldFit v1 = fit_free_field(cpl, fm, fc);
    const FreeFieldFit v2 = fit_free_field(cpl, fm, fc);
    expect(v1.field.coef == v2.field.coef, "free-field fit is not bitwise deterministic");
}

void prop_descent_monotone() {
    const SampleSet s0 = sample(DistributionSpec::parse("gaussian:mean=0;cov=1"), 150, 41);
    const SampleSet s1 = sample(DistributionSpec::parse("gaussian:mean=1.5;cov=1"), 150, 42);
    const PairedCoupling cpl = independent_coupling(s0, s1, 43);
    const FeatureMap fm(1, 64, 1.5, 0.5, true, kSuiteSeed + 7);
    FitConfig fc;
    fc.time_points = 6;
    fc.max_iters = 60;
    const PotentialFit fit = fit_potential(cpl, fm, CostFunction::power(1.5), fc);
    const auto& h = fit.report.loss_history;
    expect(h.size() >= 2, "descent recorded no steps");
    for (std::size_t i = 1; i < h.size(); ++i)
        expect(h[i] <= h[i - 1] + 1e-14,
               "objective increased at step " + std::to_string(i) + ": " + fmt(h[i - 1]) +
                   " -> " + fmt(h[i]));
    expect(fit.report.final_loss >= -1e-12, "matching loss went negative");
}

void prop_free_fit_loss_consistency() {
    const SampleSet s0 = sample(DistributionSpec::parse("gaussian:mean=0,0;cov=I"), 90, 51);
    const SampleSet s1 = sample(DistributionSpec::parse("gaussian:mean=1,1;cov=I"), 90, 52);
    const PairedCoupling cpl = independent_coupling(s0, s1, 53);
    const FeatureMap fm(2, 48, 1.4, 0.5, true, kSuiteSeed + 8);
    FitConfig fc;
    fc.time_points = 5;
    const FreeFieldFit fit = fit_free_field(cpl, fm, fc);

    const Eigen::VectorXd grid = time_grid(fc.time_points);
    double sq = 0.0;
    for (int k = 0; k < fc.time_points; ++k) {
        const InterpolationSlice s = interpolate(cpl, grid[k]);
        const Eigen::VectorXd tv = Eigen::VectorXd::Constant(cpl.n(), grid[k]);
        sq += (fit.field.eval_rows(s.position, tv) - s.velocity).squaredNorm();
    }
    sq /= static_cast<double>(cpl.n()) * fc.time_points;
    expect(std::abs(sq - fit.report.final_loss) <= 1e-12 * (1.0 + sq),
           "reported residual " + fmt(fit.report.final_loss) + " vs recomputed " + fmt(sq));
}

// ---- flow properties -------------------------------------------------------

void prop_rk4_order() {
    const BatchDrift growth = [](const Eigen::MatrixXd& z, double) { return z; };
    Eigen::MatrixXd z0(1, 1);
    z0 << 1.0;
    IntegratorConfig cfg;
    cfg.method = IntegratorConfig::Method::RK4;
    cfg.steps = 100;
    const Trajectory traj = integrate(growth, z0, cfg);
    const double err = std::abs(traj.states.back()(0, 0) - std::exp(1.0));
    expect(err <= 1e-8, "RK4 e error " + fmt(err));
}

void prop_euler_first_order() {
    const BatchDrift growth = [](const Eigen::MatrixXd& z, double) { return z; };
    Eigen::MatrixXd z0(1, 1);
    z0 << 1.0;
    IntegratorConfig a;
    a.method = IntegratorConfig::Method::Euler;
    a.steps = 200;
    IntegratorConfig b = a;
    b.steps = 400;
    const double e1 = std::abs(integrate(growth, z0, a).states.back()(0, 0) - std::exp(1.0));
    const double e2 = std::abs(integrate(growth, z0, b).states.back()(0, 0) - std::exp(1.0));
    const double ratio = e1 / e2;
    expect(ratio > 1.6 && ratio < 2.4, "euler halving ratio " + fmt(ratio) + " not ~2");
}

void prop_straight_fixed_point() {
    // a pure translation is already straight and optimal: rectifying it must
    // keep the transport cost essentially unchanged
    const SampleSet s0 = sample(DistributionSpec::parse("gaussian:mean=0;cov=1"), 400, 61);
    PairedCoupling cpl;
    cpl.x0 = s0.data;
    cpl.x1 = s0.data.array() + 2.0;
    const FeatureMapConfig fmc{256, 0.0, 0.5, true, kSuiteSeed + 9};
    FitConfig fc;
    fc.time_points = 8;
    IntegratorConfig ic;
    ic.steps = 32;
    const FeatureMap fm = build_features(cpl, fmc, fc.time_points);
    const RectifyResult r = rectify(cpl, fm, fc, ic);
    const CostFunction c = CostFunction::quadratic();
    const double before = transport_cost(cpl, c);
    const double after = transport_cost(r.coupling, c);
    expect(std::abs(after - before) <= 0.02 * before,
           "translation coupling moved: " + fmt(before) + " -> " + fmt(after));
    expect(std::abs(straightness(r.trajectory, c)) <= 1e-3,
           "translation flow is not straight: " + fmt(straightness(r.trajectory, c)));
}

// ---- diagnostics properties ------------------------------------------------

void prop_energy_distance() {
    const SampleSet a = sample(DistributionSpec::parse("gaussian:mean=0;cov=1"), 2000, 71);
    const SampleSet b = sample(DistributionSpec::parse("gaussian:mean=5;cov=1"), 2000, 72);
    expect(energy_distance(a.data, a.data) == 0.0, "identical samples gave nonzero distance");
    const double ab = energy_distance(a.data, b.data);
    const double ba = energy_distance(b.data, a.data);
    expect(std::abs(ab - ba) <= 1e-12, "energy distance asymmetric");
    // E|N(5,2)| = 5 erf(2.5) + 2/sqrt(pi) e^{-25/4}, E|N(0,2)| = 2/sqrt(pi):
    // distance = 2*5.000144 - 2*1.128379 = 7.74353
    expect(std::abs(ab - 7.74353) <= 0.5, "shifted-gaussian energy distance " + fmt(ab));
    const SampleSet c = sample(DistributionSpec::parse("gaussian:mean=0;cov=1"), 2000, 73);
    const double same = energy_distance(a.data, c.data);
    expect(same >= 0.0 && same < 0.2, "same-law energy distance suspicious: " + fmt(same));
}

void prop_pathwise_straight() {
    // linear trajectory assembled by hand: pathwise cost must equal endpoint cost
    const SampleSet s0 = sample(DistributionSpec::parse("gaussian:mean=0,0;cov=I"), 100, 81);
    const SampleSet s1 = sample(DistributionSpec::parse("gaussian:mean=2,1;cov=0.5"), 100, 82);
    const PairedCoupling cpl = independent_coupling(s0, s1, 83);
    Trajectory traj;
    const int N = 16;
    traj.times.resize(N + 1);
    for (int i = 0; i <= N; ++i) {
        traj.times[i] = static_cast<double>(i) / N;
        traj.states.push_back(interpolate(cpl, traj.times[i]).position);
    }
    const CostFunction c = CostFunction::quadratic();
    const double pw = pathwise_cost(traj, c);
    const double tc = transport_cost(cpl, c);
    expect(std::abs(pw - tc) <= 1e-12 * (1.0 + tc),
           "straight path energy " + fmt(pw) + " vs endpoint " + fmt(tc));
}

void prop_marginal_preservation_metric() {
    const SampleSet s = sample(DistributionSpec::parse("gaussian:mean=0,0;cov=I"), 2000, 91);
    std::vector<TimeSlice> slices;
    for (double t : {0.25, 0.5, 0.75}) slices.push_back({t, s.data});
    // rotation field: divergence-free against the standard normal
    const BatchDrift rotation = [](const Eigen::MatrixXd& x, double) {
        Eigen::MatrixXd r(x.rows(), 2);
        r.col(0) = -x.col(1);
        r.col(1) = x.col(0);
        return r;
    };
    // radial field: maximally mass-moving
    const BatchDrift radial = [](const Eigen::MatrixXd& x, double) { return x; };
    const double quiet = marginal_preservation(rotation, slices, 32, kSuiteSeed + 10);
    const double loud = marginal_preservation(radial, slices, 32, kSuiteSeed + 10);
    expect(quiet <= 0.1, "divergence-free field scored " + fmt(quiet));
    expect(loud >= 0.3, "radial field scored only " + fmt(loud));
    expect(loud > 3.0 * quiet, "metric does not separate the two fields");
}

void prop_quantile_vs_hungarian() {
    const CounterRng rng = CounterRng::derive(kSuiteSeed, 110);
    for (int trial = 0; trial < 5; ++trial) {
        const std::uint64_t s = rng.bits(static_cast<std::uint64_t>(trial));
        const SampleSet a = sample(DistributionSpec::parse("gaussian:mean=0;cov=1"), 32, s);
        const SampleSet b = sample(DistributionSpec::parse("mixture:weights=0.5,0.5;means=-1|3;covs=0.5|0.5"),
                                   32, s + 1);
        for (const CostFunction& c : {CostFunction::quadratic(), CostFunction::power(1.5)}) {
            const double q = oracle_quantile_1d(a, b, c);
            const double h = oracle_hungarian(a, b, c).cost;
            expect(std::abs(q - h) <= 1e-9,
                   c.name() + ": quantile " + fmt(q) + " vs assignment " + fmt(h));
        }
    }
}

void prop_gauss_oracle_values() {
    Eigen::VectorXd m0(1), m1(1);
    m0 << 0.0;
    m1 << 2.0;
    Eigen::MatrixXd c0(1, 1), c1(1, 1);
    c0 << 1.0;
    c1 << 1.0;
    expect(std::abs(oracle_gauss_quadratic(m0, c0, m1, c1) - 2.0) <= 1e-12,
           "1d equal-variance optimum is not 2.0");
    Eigen::VectorXd mm0(2), mm1(2);
    mm0 << 0.0, 0.0;
    mm1 << 3.0, 0.0;
    Eigen::MatrixXd cc0 = Eigen::MatrixXd::Identity(2, 2);
    Eigen::MatrixXd cc1 = Eigen::MatrixXd::Zero(2, 2);
    cc1(0, 0) = 2.0;
    cc1(1, 1) = 0.5;
    // 0.5*(9 + (1-sqrt2)^2 + (1-sqrt0.5)^2)
    expect(std::abs(oracle_gauss_quadratic(mm0, cc0, mm1, cc1) - 4.6286796564403574) <= 1e-12,
           "2d diagonal-case optimum mismatch");
}

void prop_hj_and_hopflax_linear() {
    // affine potential solving the evolution equation exactly:
    //   f(x,t) = <a,x> - t c*(a)   =>   d_t f + c*(grad f) = 0
    const CostFunction c = CostFunction::quadratic();
    const FeatureMap fm(1, 16, 1.0, 0.5, true, kSuiteSeed + 11);
    PotentialField f{fm, Eigen::VectorXd::Zero(fm.num_features())};
    const double a = 0.8;
    f.theta[fm.num_random() + 1] = a;                  // linear-in-x feature
    f.theta[fm.num_features() - 1] = -0.5 * a * a;     // bare-t feature

    const SampleSet pts = sample(DistributionSpec::parse("uniform:lo=-1;hi=1"), 50, 95);
    std::vector<TimeSlice> slices{{0.3, pts.data}, {0.7, pts.data}};
    const HjResidual res = hj_residual(f, c, slices);
    expect(res.max_grad_norm <= 1e-10, "exact solution has residual " + fmt(res.max_grad_norm));

    LatticeSpec grid;
    grid.lo = Eigen::VectorXd::Constant(1, -4.0);
    grid.hi = Eigen::VectorXd::Constant(1, 4.0);
    grid.points_per_dim = 801;
    const double gap = hopflax_gap(f, c, 0.5, pts.data, grid);
    expect(gap <= 1e-2, "inf-convolution gap " + fmt(gap) + " for the exact solution");

    // shift freedom: adding a pure function of time must not change the
    // spatial-gradient residual
    PotentialField g = f;
    g.theta[fm.num_features() - 1] += 0.37;
    const HjResidual res2 = hj_residual(g, c, slices);
    expect(std::abs(res2.max_grad_norm - res.max_grad_norm) <= 1e-12,
           "time-shift changed the residual");
}

void prop_reflow_report_consistency() {
    const SampleSet s0 = sample(DistributionSpec::parse("gaussian:mean=0;cov=1"), 256, 201);
    const SampleSet s1 = sample(DistributionSpec::parse("gaussian:mean=2;cov=1"), 256, 202);
    const PairedCoupling cpl = independent_coupling(s0, s1, 203);
    const CostFunction c = CostFunction::quadratic();
    FitConfig fc;
    fc.time_points = 8;
    IntegratorConfig ic;
    ic.steps = 24;
    const FeatureMapConfig fmc{128, 0.0, 0.5, true, 0};
    const ReflowReport rep =
        reflow(cpl, c, 2, make_reflow_feature_builder(fmc, fc.time_points, 204), fc, ic);

    expect(rep.iterations.size() == 2 && rep.couplings.size() == 2, "wrong report shape");
    double prev = rep.initial_cost;
    for (std::size_t i = 0; i < rep.iterations.size(); ++i) {
        const ReflowIteration& row = rep.iterations[i];
        expect(row.k == static_cast<int>(i) + 1, "iteration numbering broken");
        expect(row.transport_cost == transport_cost(rep.couplings[i], c),
               "row cost disagrees with the retained coupling");
        expect(row.transport_cost <= prev + 0.05 * rep.initial_cost,
               "cost increased beyond slack at iteration " + std::to_string(row.k));
        expect(row.ellstar >= -1e-12 && row.straightness >= -1e-6,
               "negative certificate entries");
        const double gap = row.ellstar - (prev - row.pathwise_cost);
        expect(row.duality_gap == gap, "stored duality gap is not the defining identity");
        prev = row.transport_cost;
    }
}

void prop_config_errors() {
    bool threw = false;
    try {
        ConfigFile::parse_string("[run]\nseed 7\n", "test.cfg");
    } catch (const ConfigError& e) {
        threw = true;
        expect(e.line() == 2, "wrong error line: " + std::to_string(e.line()));
    }
    expect(threw, "missing '=' accepted");

    const ConfigFile ok = ConfigFile::parse_string("[run]\nseed = 7\nname = demo # tail\n", "t");
    expect(ok.get_u64("run", "seed", 0) == 7, "seed parse failed");
    expect(ok.get("run", "name") == "demo", "comment stripping failed");

    threw = false;
    try {
        ConfigFile::parse_string("[a]\nx = 1\nx = 2\n", "t");
    } catch (const ConfigError& e) {
        threw = true;
        expect(e.line() == 3, "duplicate reported at wrong line");
    }
    expect(threw, "duplicate key accepted");
}

struct Property {
    const char* name;
    void (*body)();
};

const Property kProperties[] = {
    {"cost-fenchel-young-floor", prop_fenchel_young},
    {"cost-conjugate-vs-grid", prop_conjugate_grid},
    {"cost-conjugate-inversion", prop_conjugate_inversion},
    {"cost-gradients-vs-central-diff", prop_gradients},
    {"cost-matching-equals-bregman", prop_matching_bregman},
    {"gradient-checker-mutation-sanity", prop_mutation_sanity},
    {"sampling-determinism", prop_sampling_determinism},
    {"sampling-gaussian-moments", prop_gaussian_moments},
    {"coupling-preserves-marginals", prop_coupling_marginals},
    {"interpolation-endpoints", prop_interpolation_endpoints},
    {"feature-gradients-vs-central-diff", prop_feature_gradients},
    {"drift-representation-sanity", prop_representation_sanity},
    {"field-persistence-roundtrip", prop_field_roundtrip},
    {"matching-pythagorean-split", prop_pythagorean_identity},
    {"matching-convexity-chords", prop_matching_convexity},
    {"fit-bitwise-determinism", prop_fit_determinism},
    {"descent-monotone-objective", prop_descent_monotone},
    {"free-fit-loss-consistency", prop_free_fit_loss_consistency},
    {"rk4-exponential-order", prop_rk4_order},
    {"euler-first-order", prop_euler_first_order},
    {"straight-coupling-fixed-point", prop_straight_fixed_point},
    {"energy-distance-contract", prop_energy_distance},
    {"pathwise-cost-straight-paths", prop_pathwise_straight},
    {"marginal-preservation-metric", prop_marginal_preservation_metric},
    {"oracle-quantile-vs-assignment", prop_quantile_vs_hungarian},
    {"oracle-gauss-closed-form", prop_gauss_oracle_values},
    {"evolution-equation-linear-case", prop_hj_and_hopflax_linear},
    {"reflow-report-consistency", prop_reflow_report_consistency},
    {"config-parse-errors", prop_config_errors},
};

}  // namespace

std::vector<PropertyResult> run_property_suite() {
    std::vector<PropertyResult> results;
    for (const Property& p : kProperties) {
        PropertyResult r;
        r.name = p.name;
        const auto begin = std::chrono::steady_clock::now();
        try {
            p.body();
            r.passed = true;
        } catch (const PropertyFailure& e) {
            r.passed = false;
            r.detail = e.what();
        } catch (const std::exception& e) {
            r.passed = false;
            r.detail = std::string("unexpected exception: ") + e.what();
        }
        r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - begin).count();
        results.push_back(std::move(r));
    }
    return results;
}

}  // namespace riftort
