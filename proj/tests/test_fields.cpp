#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "riftort/errors.hpp"
#include "riftort/fields.hpp"
#include "riftort/rng.hpp"
#include "test_support.hpp"

using namespace riftort;
using riftort::testing::vec;

namespace {

Eigen::VectorXd random_point(const CounterRng& rng, std::uint64_t base, int d) {
    Eigen::VectorXd x(d);
    for (int k = 0; k < d; ++k) x[k] = rng.normal(base + k);
    return x;
}

}  // namespace

TEST_CASE("feature maps are deterministic in their seed") {
    FeatureMap a(2, 64, 1.0, 0.5, true, 42);
    FeatureMap b(2, 64, 1.0, 0.5, true, 42);
    FeatureMap c(2, 64, 1.0, 0.5, true, 43);
    CHECK(a.freq_x() == b.freq_x());
    CHECK(a.freq_t() == b.freq_t());
    CHECK(a.phase() == b.phase());
    CHECK(a.freq_x() != c.freq_x());
}

TEST_CASE("single random feature is a bounded cosine") {
    FeatureMap fm(1, 1, 1.0, 1.0, false, 7);
    CHECK(fm.num_features() == 1);
    CounterRng rng(1);
    for (int i = 0; i < 50; ++i) {
        Eigen::VectorXd x(1);
        x << 3.0 * rng.normal(i);
        double t = 0.02 * (i % 50);
        CHECK(std::abs(fm.features(x, t)[0]) <= std::sqrt(2.0) + 1e-12);
    }
}

TEST_CASE("frequency matrix has near-zero column means") {
    FeatureMap fm(2, 256, 1.0, 0.5, false, 7);
    Eigen::VectorXd col_mean = fm.freq_x().colwise().mean();
    const double bound = 4.0 / (std::sqrt(256.0) * 1.0);
    CHECK(std::abs(col_mean[0]) <= bound);
    CHECK(std::abs(col_mean[1]) <= bound);
    // scale check: entries are N(0, bandwidth^-2)
    FeatureMap wide(2, 256, 2.0, 0.5, false, 7);
    double sd = std::sqrt(wide.freq_x().array().square().mean());
    CHECK(sd >= 0.35);
    CHECK(sd <= 0.65);
}

TEST_CASE("feature map validates its arguments") {
    CHECK_THROWS_AS(FeatureMap(0, 8, 1.0, 1.0, true, 1), ValidationError);
    CHECK_THROWS_AS(FeatureMap(2, 0, 1.0, 1.0, true, 1), ValidationError);
    CHECK_THROWS_AS(FeatureMap(2, 8, 0.0, 1.0, true, 1), ValidationError);
    CHECK_THROWS_AS(FeatureMap(2, 8, 1.0, -1.0, true, 1), ValidationError);
}

TEST_CASE("feature derivatives match central differences") {
    FeatureMap fm(2, 32, 0.8, 0.4, true, 11);
    CounterRng rng(2);
    const double h = 1e-6;
    for (int i = 0; i < 8; ++i) {
        Eigen::VectorXd x = random_point(rng, 8 * i, 2);
        double t = 0.1 + 0.1 * i;

        Eigen::MatrixXd grads = fm.feature_grads(x, t);
        for (int k = 0; k < 2; ++k) {
            Eigen::VectorXd xp = x, xm = x;
            xp[k] += h;
            xm[k] -= h;
            Eigen::VectorXd fd = (fm.features(xp, t) - fm.features(xm, t)) / (2 * h);
            CHECK((fd - grads.col(k)).lpNorm<Eigen::Infinity>() <= 1e-6);
        }

        Eigen::VectorXd dt = fm.feature_time_derivs(x, t);
        Eigen::VectorXd fd = (fm.features(x, t + h) - fm.features(x, t - h)) / (2 * h);
        CHECK((fd - dt).lpNorm<Eigen::Infinity>() <= 1e-6);
    }
}

TEST_CASE("zero frequencies give constant features") {
    FeatureMap fm = FeatureMap::from_parts(Eigen::MatrixXd::Zero(8, 2), Eigen::VectorXd::Zero(8),
                                           Eigen::VectorXd::Zero(8), 1.0, 1.0, false, 0);
    Eigen::VectorXd at_origin = fm.features(vec({0, 0}), 0.0);
    Eigen::VectorXd elsewhere = fm.features(vec({5, -3}), 0.7);
    CHECK(at_origin == elsewhere);
    CHECK(fm.feature_grads(vec({5, -3}), 0.7).lpNorm<Eigen::Infinity>() == 0.0);
    CHECK(fm.feature_time_derivs(vec({5, -3}), 0.7).lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("batch feature rows agree with the scalar path") {
    FeatureMap fm(2, 24, 1.2, 0.5, true, 19);
    CounterRng rng(3);
    Eigen::MatrixXd pts(6, 2);
    Eigen::VectorXd times(6);
    for (int i = 0; i < 6; ++i) {
        pts.row(i) = random_point(rng, 4 * i, 2).transpose();
        times[i] = 0.15 * i;
    }
    Eigen::MatrixXd batch = fm.feature_rows(pts, times);
    for (int i = 0; i < 6; ++i) {
        Eigen::VectorXd single = fm.features(pts.row(i).transpose(), times[i]);
        CHECK((batch.row(i).transpose() - single).lpNorm<Eigen::Infinity>() <= 1e-14);
    }
}

TEST_CASE("potential gradient is linear and matches finite differences") {
    FeatureMap fm(2, 48, 1.0, 0.5, true, 23);
    CounterRng rng(4);
    Eigen::VectorXd theta(fm.num_features());
    for (int j = 0; j < theta.size(); ++j) theta[j] = rng.normal(j);
    PotentialField f{fm, theta};
    PotentialField zero{fm, Eigen::VectorXd::Zero(fm.num_features())};
    PotentialField twice{fm, 2.0 * theta};

    CounterRng pts = CounterRng::derive(4, 2);
    const double h = 1e-6;
    for (int i = 0; i < 6; ++i) {
        Eigen::VectorXd x = random_point(pts, 8 * i, 2);
        double t = 0.1 * i;

        CHECK(zero.grad(x, t).norm() == 0.0);
        CHECK((twice.grad(x, t) - 2.0 * f.grad(x, t)).lpNorm<Eigen::Infinity>() <= 1e-12);

        Eigen::VectorXd g = f.grad(x, t);
        for (int k = 0; k < 2; ++k) {
            Eigen::VectorXd xp = x, xm = x;
            xp[k] += h;
            xm[k] -= h;
            double fd = (f.value(xp, t) - f.value(xm, t)) / (2 * h);
            CHECK(std::abs(fd - g[k]) <= 1e-6 * std::max(1.0, std::abs(g[k])));
        }
        double fdt = (f.value(x, t + h) - f.value(x, t - h)) / (2 * h);
        CHECK(std::abs(fdt - f.time_deriv(x, t)) <= 1e-6 * std::max(1.0, std::abs(fdt)));
    }
}

TEST_CASE("potential values respect the coefficient-norm bound") {
    FeatureMap fm(2, 64, 1.0, 0.5, false, 29);
    CounterRng rng(5);
    Eigen::VectorXd theta(fm.num_features());
    for (int j = 0; j < theta.size(); ++j) theta[j] = rng.normal(j);
    PotentialField f{fm, theta};
    CounterRng pts = CounterRng::derive(5, 2);
    for (int i = 0; i < 40; ++i) {
        Eigen::VectorXd x = 3.0 * random_point(pts, 2 * i, 2);
        CHECK(std::abs(f.value(x, 0.4)) <= std::sqrt(2.0) * theta.norm() + 1e-12);
    }
}

TEST_CASE("drift from a potential") {
    FeatureMap fm(2, 32, 1.0, 0.5, true, 31);
    CounterRng rng(6);
    Eigen::VectorXd theta(fm.num_features());
    for (int j = 0; j < theta.size(); ++j) theta[j] = 0.5 * rng.normal(j);
    PotentialField f{fm, theta};
    PotentialField zero{fm, Eigen::VectorXd::Zero(fm.num_features())};

    CostFunction quad = CostFunction::quadratic();
    CostFunction p4 = CostFunction::power(4.0);

    CounterRng pts = CounterRng::derive(6, 2);
    for (int i = 0; i < 6; ++i) {
        Eigen::VectorXd x = random_point(pts, 8 * i, 2);
        double t = 0.15 * i;

        // quadratic cost: conjugate gradient is the identity
        CHECK(drift_from_potential(quad, f, x, t) == f.grad(x, t));
        CHECK(drift_from_potential(quad, zero, x, t).norm() == 0.0);
        CHECK(drift_from_potential(p4, zero, x, t).norm() == 0.0);

        // power cost: |g|^(q-2) g with q = 4/3
        Eigen::VectorXd g = f.grad(x, t);
        double q = p4.conjugate_exponent();
        Eigen::VectorXd manual = std::pow(g.norm(), q - 2.0) * g;
        CHECK((drift_from_potential(p4, f, x, t) - manual).lpNorm<Eigen::Infinity>() <=
              1e-12 * std::max(1.0, manual.lpNorm<Eigen::Infinity>()));
    }
}

TEST_CASE("free field evaluation") {
    FeatureMap fm(2, 16, 1.0, 0.5, true, 37);
    CounterRng rng(7);
    Eigen::MatrixXd coef(fm.num_features(), 2);
    for (int j = 0; j < coef.size(); ++j) coef.data()[j] = rng.normal(j);
    FreeVectorField v{fm, coef};
    FreeVectorField zero{fm, Eigen::MatrixXd::Zero(fm.num_features(), 2)};
    FreeVectorField sum{fm, 2.0 * coef};

    CounterRng pts = CounterRng::derive(7, 2);
    for (int i = 0; i < 6; ++i) {
        Eigen::VectorXd x = random_point(pts, 8 * i, 2);
        double t = 0.15 * i;
        CHECK(zero.eval(x, t).norm() == 0.0);
        CHECK((sum.eval(x, t) - 2.0 * v.eval(x, t)).lpNorm<Eigen::Infinity>() <= 1e-12);
    }

    // single cosine reproduced exactly
    Eigen::MatrixXd w(1, 1);
    w << 1.3;
    FeatureMap single = FeatureMap::from_parts(w, vec({0.4}), vec({0.2}), 1.0, 1.0, false, 0);
    Eigen::MatrixXd c1(1, 1);
    c1 << 2.5;
    FreeVectorField cosine{single, c1};
    for (double x = -2.0; x <= 2.0; x += 0.37) {
        double expected = 2.5 * std::sqrt(2.0) * std::cos(1.3 * x + 0.4 * 0.6 + 0.2);
        Eigen::VectorXd xv(1);
        xv << x;
        CHECK(cosine.eval(xv, 0.6)[0] == doctest::Approx(expected).epsilon(1e-14));
    }

    // batch form agrees with the scalar path
    Eigen::MatrixXd bp(5, 2);
    Eigen::VectorXd bt(5);
    for (int i = 0; i < 5; ++i) {
        bp.row(i) = random_point(pts, 100 + 8 * i, 2).transpose();
        bt[i] = 0.2 * i;
    }
    Eigen::MatrixXd rows = v.eval_rows(bp, bt);
    for (int i = 0; i < 5; ++i) {
        CHECK((rows.row(i).transpose() - v.eval(bp.row(i).transpose(), bt[i]))
                  .lpNorm<Eigen::Infinity>() <= 1e-12);
    }
}

TEST_CASE("median pairwise distance") {
    Eigen::MatrixXd two(2, 1);
    two << 0.0, 3.0;
    CHECK(median_pairwise_distance(two) == doctest::Approx(3.0).epsilon(1e-15));
    Eigen::MatrixXd same = Eigen::MatrixXd::Zero(5, 2);
    CHECK(median_pairwise_distance(same) == 0.0);
    Eigen::MatrixXd one(1, 1);
    CHECK_THROWS_AS(median_pairwise_distance(one), ValidationError);
}

TEST_CASE("field persistence round-trips bitwise") {
    FeatureMap fm(2, 12, 1.7, 0.4, true, 91);
    CounterRng rng(8);
    Eigen::VectorXd theta(fm.num_features());
    for (int j = 0; j < theta.size(); ++j) theta[j] = rng.normal(j);
    PotentialField f{fm, theta};

    std::stringstream buf;
    save_field(buf, f);
    PotentialField back = load_potential_field(buf);
    CHECK(back.theta == f.theta);
    CHECK(back.map.freq_x() == fm.freq_x());
    CHECK(back.map.freq_t() == fm.freq_t());
    CHECK(back.map.phase() == fm.phase());
    CHECK(back.map.bandwidth_x() == fm.bandwidth_x());
    CHECK(back.map.has_affine_block() == fm.has_affine_block());
    CHECK(back.value(vec({0.3, -1.2}), 0.45) == f.value(vec({0.3, -1.2}), 0.45));

    Eigen::MatrixXd coef(fm.num_features(), 2);
    for (int j = 0; j < coef.size(); ++j) coef.data()[j] = rng.normal(1000 + j);
    FreeVectorField v{fm, coef};
    std::stringstream buf2;
    save_field(buf2, v);
    FreeVectorField vback = load_free_field(buf2);
    CHECK(vback.coef == v.coef);
    CHECK(vback.eval(vec({0.3, -1.2}), 0.45) == v.eval(vec({0.3, -1.2}), 0.45));

    // file-path overloads
    const char* path = "riftort_test_field.txt";
    save_field(std::string(path), f);
    PotentialField from_disk = load_potential_field(std::string(path));
    CHECK(from_disk.theta == f.theta);
    std::remove(path);
}

TEST_CASE("field persistence rejects malformed input") {
    std::stringstream bad_magic("not-a-field v1 kind=potential d=1 M=1\n");
    CHECK_THROWS_AS(load_potential_field(bad_magic), ValidationError);

    std::stringstream empty("");
    CHECK_THROWS_AS(load_potential_field(empty), ValidationError);

    FeatureMap fm(1, 4, 1.0, 1.0, false, 3);
    PotentialField f{fm, Eigen::VectorXd::Ones(4)};
    std::stringstream buf;
    save_field(buf, f);
    // wrong-kind load is refused
    CHECK_THROWS_AS(load_free_field(buf), ValidationError);

    std::stringstream truncated;
    save_field(truncated, f);
    std::string text = truncated.str();
    std::stringstream cut(text.substr(0, text.size() / 2));
    CHECK_THROWS_AS(load_potential_field(cut), ValidationError);
}

TEST_CASE("build_features resolves the bandwidth from the data") {
    auto spec = DistributionSpec::gaussian(vec({0}), Eigen::MatrixXd::Identity(1, 1));
    SampleSet s0 = sample(spec, 128, 1);
    SampleSet s1 = sample(spec, 128, 2);
    PairedCoupling cpl = independent_coupling(s0, s1, 3);

    FeatureMapConfig cfg;
    cfg.num_random = 32;
    cfg.seed = 5;
    FeatureMap fm = build_features(cpl, cfg, 8);
    CHECK(fm.bandwidth_x() > 0.0);
    FeatureMap again = build_features(cpl, cfg, 8);
    CHECK(fm.freq_x() == again.freq_x());
    CHECK(fm.bandwidth_x() == again.bandwidth_x());

    cfg.bandwidth_x = 2.5;  // explicit bandwidth wins over the heuristic
    FeatureMap fixed = build_features(cpl, cfg, 8);
    CHECK(fixed.bandwidth_x() == 2.5);
}
