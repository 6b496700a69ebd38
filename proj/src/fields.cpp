#include "riftort/fields.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <vector>

#include "riftort/errors.hpp"
#include "riftort/rng.hpp"

namespace riftort {

FeatureMap::FeatureMap(int dim, int num_random, double bandwidth_x, double bandwidth_t,
                       bool affine_block, std::uint64_t seed) {
    if (dim <= 0) throw ValidationError("feature map: need dim > 0");
    if (num_random <= 0) throw ValidationError("feature map: need num_random > 0");
    if (!(bandwidth_x > 0.0) || !(bandwidth_t > 0.0))
        throw ValidationError("feature map: bandwidths must be positive");

    const CounterRng rx = CounterRng::derive(seed, streams::kFreqX);
    const CounterRng rt = CounterRng::derive(seed, streams::kFreqT);
    const CounterRng rp = CounterRng::derive(seed, streams::kPhase);

    freq_x_.resize(num_random, dim);
    freq_t_.resize(num_random);
    phase_.resize(num_random);
    for (int j = 0; j < num_random; ++j) {
        for (int k = 0; k < dim; ++k)
            freq_x_(j, k) = rx.normal(static_cast<std::uint64_t>(j) * dim + k) / bandwidth_x;
        freq_t_[j] = rt.normal(static_cast<std::uint64_t>(j)) / bandwidth_t;
        phase_[j] = rp.angle(static_cast<std::uint64_t>(j));
    }
    bandwidth_x_ = bandwidth_x;
    bandwidth_t_ = bandwidth_t;
    affine_ = affine_block;
    seed_ = seed;
    scale_ = std::sqrt(2.0 / num_random);
}

FeatureMap FeatureMap::from_parts(Eigen::MatrixXd freq_x, Eigen::VectorXd freq_t,
                                  Eigen::VectorXd phase, double bandwidth_x, double bandwidth_t,
                                  bool affine_block, std::uint64_t seed) {
    if (freq_x.rows() == 0 || freq_x.cols() == 0)
        throw ValidationError("feature map: empty frequency matrix");
    if (freq_t.size() != freq_x.rows() || phase.size() != freq_x.rows())
        throw ValidationError("feature map: freq_t/phase length mismatch");
    FeatureMap fm;
    fm.freq_x_ = std::move(freq_x);
    fm.freq_t_ = std::move(freq_t);
    fm.phase_ = std::move(phase);
    fm.bandwidth_x_ = bandwidth_x;
    fm.bandwidth_t_ = bandwidth_t;
    fm.affine_ = affine_block;
    fm.seed_ = seed;
    fm.scale_ = std::sqrt(2.0 / static_cast<double>(fm.freq_x_.rows()));
    return fm;
}

Eigen::MatrixXd FeatureMap::angles(const Eigen::MatrixXd& x, const Eigen::VectorXd& t) const {
    if (x.cols() != dim()) throw ValidationError("feature map: point dimension mismatch");
    if (t.size() != x.rows()) throw ValidationError("feature map: times/rows mismatch");
    Eigen::MatrixXd a = x * freq_x_.transpose();   // P x M
    a.noalias() += t * freq_t_.transpose();        // outer product
    a.rowwise() += phase_.transpose();
    return a;
}

Eigen::MatrixXd FeatureMap::feature_rows(const Eigen::MatrixXd& x, const Eigen::VectorXd& t) const {
    const int P = static_cast<int>(x.rows());
    Eigen::MatrixXd phi(P, num_features());
    phi.leftCols(num_random()) = scale_ * angles(x, t).array().cos();
    if (affine_) {
        const int base = num_random();
        phi.col(base).setOnes();
        phi.middleCols(base + 1, dim()) = x;
        phi.col(base + 1 + dim()) = t;
    }
    return phi;
}

Eigen::VectorXd FeatureMap::features(const Eigen::VectorXd& x, double t) const {
    Eigen::VectorXd tv(1);
    tv[0] = t;
    return feature_rows(x.transpose(), tv).row(0);
}

Eigen::MatrixXd FeatureMap::feature_grads(const Eigen::VectorXd& x, double t) const {
    Eigen::VectorXd tv(1);
    tv[0] = t;
    const Eigen::MatrixXd a = angles(x.transpose(), tv);  // 1 x M
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(num_features(), dim());
    g.topRows(num_random()) =
        (-scale_ * a.row(0).transpose().array().sin()).matrix().asDiagonal() * freq_x_;
    if (affine_)
        g.block(num_random() + 1, 0, dim(), dim()).setIdentity();
    return g;
}

Eigen::VectorXd FeatureMap::feature_time_derivs(const Eigen::VectorXd& x, double t) const {
    Eigen::VectorXd tv(1);
    tv[0] = t;
    const Eigen::MatrixXd a = angles(x.transpose(), tv);
    Eigen::VectorXd dt = Eigen::VectorXd::Zero(num_features());
    dt.head(num_random()) =
        ((-scale_) * a.row(0).transpose().array().sin() * freq_t_.array()).matrix();
    if (affine_) dt[num_features() - 1] = 1.0;  // the appended bare-t feature
    return dt;
}

double median_pairwise_distance(const Eigen::MatrixXd& points, int max_points) {
    const auto P = points.rows();
    if (P < 2) throw ValidationError("median_pairwise_distance: need at least 2 points");
    const int K = static_cast<int>(std::min<Eigen::Index>(max_points, P));
    std::vector<double> dist;
    dist.reserve(static_cast<std::size_t>(K) * (K - 1) / 2);
    auto pick = [&](int k) {
        return static_cast<Eigen::Index>(static_cast<double>(k) * static_cast<double>(P) / K);
    };
    for (int i = 0; i < K; ++i)
        for (int j = i + 1; j < K; ++j)
            dist.push_back((points.row(pick(i)) - points.row(pick(j))).norm());
    auto mid = dist.begin() + static_cast<std::ptrdiff_t>(dist.size() / 2);
    std::nth_element(dist.begin(), mid, dist.end());
    return *mid;
}

FeatureMap build_features(const PairedCoupling& coupling, const FeatureMapConfig& config,
                          int time_points) {
    coupling.validate();
    double bx = config.bandwidth_x;
    if (!(bx > 0.0)) {
        const Eigen::VectorXd grid = time_grid(time_points);
        const int n = coupling.n();
        Eigen::MatrixXd stacked(static_cast<Eigen::Index>(n) * time_points, coupling.dim());
        for (int k = 0; k < time_points; ++k)
            stacked.middleRows(static_cast<Eigen::Index>(k) * n, n) =
                interpolate(coupling, grid[k]).position;
        const double med = median_pairwise_distance(stacked);
        bx = med > 1e-8 ? 2.0 * med : 1.0;  // degenerate data: fall back to unit bandwidth
    }
    return FeatureMap(coupling.dim(), config.num_random, bx, config.bandwidth_t,
                      config.affine_block, config.seed);
}

double PotentialField::value(const Eigen::VectorXd& x, double t) const {
    return map.features(x, t).dot(theta);
}

Eigen::VectorXd PotentialField::grad(const Eigen::VectorXd& x, double t) const {
    return map.feature_grads(x, t).transpose() * theta;
}

double PotentialField::time_deriv(const Eigen::VectorXd& x, double t) const {
    return map.feature_time_derivs(x, t).dot(theta);
}

Eigen::MatrixXd PotentialField::grad_rows(const Eigen::MatrixXd& x, const Eigen::VectorXd& t) const {
    const int M = map.num_random();
    const Eigen::MatrixXd a = map.angles(x, t);
    // sum_j theta_j * (-scale * sin(a_j)) * w_j  ->  (S .* theta^T) * freq_x
    Eigen::MatrixXd s = (-map.scale()) * a.array().sin();
    s.array().rowwise() *= theta.head(M).transpose().array();
    Eigen::MatrixXd g = s * map.freq_x();  // P x d
    if (map.has_affine_block())
        g.rowwise() += theta.segment(M + 1, map.dim()).transpose();
    return g;
}

Eigen::VectorXd PotentialField::value_rows(const Eigen::MatrixXd& x, const Eigen::VectorXd& t) const {
    return map.feature_rows(x, t) * theta;
}

Eigen::VectorXd PotentialField::time_deriv_rows(const Eigen::MatrixXd& x,
                                                const Eigen::VectorXd& t) const {
    const int M = map.num_random();
    const Eigen::MatrixXd a = map.angles(x, t);
    Eigen::MatrixXd s = (-map.scale()) * a.array().sin();
    s.array().rowwise() *= theta.head(M).transpose().array();
    Eigen::VectorXd dt = s * map.freq_t();
    if (map.has_affine_block()) dt.array() += theta[map.num_features() - 1];
    return dt;
}

Eigen::VectorXd FreeVectorField::eval(const Eigen::VectorXd& x, double t) const {
    return coef.transpose() * map.features(x, t);
}

Eigen::MatrixXd FreeVectorField::eval_rows(const Eigen::MatrixXd& x, const Eigen::VectorXd& t) const {
    return map.feature_rows(x, t) * coef;
}

Eigen::VectorXd drift_from_potential(const CostFunction& cost, const PotentialField& f,
                                     const Eigen::VectorXd& x, double t) {
    return cost.conjugate_grad(f.grad(x, t));
}

Eigen::MatrixXd drift_from_potential_rows(const CostFunction& cost, const PotentialField& f,
                                          const Eigen::MatrixXd& x, const Eigen::VectorXd& t) {
    return cost.conjugate_grad_rows(f.grad_rows(x, t));
}

namespace {

void write_row(std::ostream& os, const Eigen::VectorXd& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (i) os << ' ';
        os << v[i];
    }
    os << '\n';
}

void write_map_body(std::ostream& os, const FeatureMap& fm) {
    for (int j = 0; j < fm.num_random(); ++j) write_row(os, fm.freq_x().row(j));
    write_row(os, fm.freq_t());
    write_row(os, fm.phase());
}

void write_header(std::ostream& os, const char* kind, const FeatureMap& fm) {
    os << "riftort-field v1 kind=" << kind << " d=" << fm.dim() << " M=" << fm.num_random()
       << " affine=" << (fm.has_affine_block() ? 1 : 0) << " bandwidth_x=" << fm.bandwidth_x()
       << " bandwidth_t=" << fm.bandwidth_t() << " seed=" << fm.seed() << '\n';
}

struct Header {
    std::string kind;
    int d = 0;
    int M = 0;
    bool affine = true;
    double bandwidth_x = 1.0;
    double bandwidth_t = 1.0;
    std::uint64_t seed = 0;
};

Header read_header(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw ValidationError("field file: empty");
    std::istringstream ls(line);
    std::string magic, version;
    ls >> magic >> version;
    if (magic != "riftort-field" || version != "v1")
        throw ValidationError("field file: bad header '" + line + "'");
    Header h;
    std::string tok;
    while (ls >> tok) {
        const auto eq = tok.find('=');
        if (eq == std::string::npos) throw ValidationError("field file: bad token '" + tok + "'");
        const std::string key = tok.substr(0, eq), val = tok.substr(eq + 1);
        if (key == "kind") h.kind = val;
        else if (key == "d") h.d = std::stoi(val);
        else if (key == "M") h.M = std::stoi(val);
        else if (key == "affine") h.affine = std::stoi(val) != 0;
        else if (key == "bandwidth_x") h.bandwidth_x = std::stod(val);
        else if (key == "bandwidth_t") h.bandwidth_t = std::stod(val);
        else if (key == "seed") h.seed = std::stoull(val);
        else throw ValidationError("field file: unknown header key '" + key + "'");
    }
    if (h.kind.empty() || h.d <= 0 || h.M <= 0)
        throw ValidationError("field file: header missing kind/d/M");
    return h;
}

Eigen::VectorXd read_row(std::istream& is, Eigen::Index count, const char* what) {
    std::string line;
    if (!std::getline(is, line)) throw ValidationError(std::string("field file: truncated at ") + what);
    std::istringstream ls(line);
    Eigen::VectorXd v(count);
    for (Eigen::Index i = 0; i < count; ++i)
        if (!(ls >> v[i]))
            throw ValidationError(std::string("field file: short row at ") + what);
    double extra;
    if (ls >> extra) throw ValidationError(std::string("field file: long row at ") + what);
    return v;
}

FeatureMap read_map(std::istream& is, const Header& h) {
    Eigen::MatrixXd freq_x(h.M, h.d);
    for (int j = 0; j < h.M; ++j) freq_x.row(j) = read_row(is, h.d, "freq_x");
    Eigen::VectorXd freq_t = read_row(is, h.M, "freq_t");
    Eigen::VectorXd phase = read_row(is, h.M, "phase");
    return FeatureMap::from_parts(std::move(freq_x), std::move(freq_t), std::move(phase),
                                  h.bandwidth_x, h.bandwidth_t, h.affine, h.seed);
}

void set_precision(std::ostream& os) {
    os << std::setprecision(17);
}

}  // namespace

void save_field(std::ostream& os, const PotentialField& f) {
    set_precision(os);
    write_header(os, "potential", f.map);
    write_map_body(os, f.map);
    write_row(os, f.theta);
}

void save_field(std::ostream& os, const FreeVectorField& v) {
    set_precision(os);
    write_header(os, "free", v.map);
    write_map_body(os, v.map);
    for (Eigen::Index j = 0; j < v.coef.rows(); ++j) write_row(os, v.coef.row(j));
}

PotentialField load_potential_field(std::istream& is) {
    const Header h = read_header(is);
    if (h.kind != "potential") throw ValidationError("field file: expected kind=potential");
    PotentialField f{read_map(is, h), {}};
    f.theta = read_row(is, f.map.num_features(), "theta");
    return f;
}

FreeVectorField load_free_field(std::istream& is) {
    const Header h = read_header(is);
    if (h.kind != "free") throw ValidationError("field file: expected kind=free");
    FreeVectorField v{read_map(is, h), {}};
    v.coef.resize(v.map.num_features(), v.map.dim());
    for (Eigen::Index j = 0; j < v.coef.rows(); ++j)
        v.coef.row(j) = read_row(is, v.map.dim(), "coef");
    return v;
}

namespace {
template <class Field>
void save_to_path(const std::string& path, const Field& f) {
    std::ofstream os(path);
    if (!os) throw ValidationError("cannot open '" + path + "' for writing");
    save_field(os, f);
    if (!os) throw NumericError("write failed for '" + path + "'");
}
}  // namespace

void save_field(const std::string& path, const PotentialField& f) { save_to_path(path, f); }
void save_field(const std::string& path, const FreeVectorField& v) { save_to_path(path, v); }

PotentialField load_potential_field(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ValidationError("cannot open '" + path + "'");
    return load_potential_field(is);
}

FreeVectorField load_free_field(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ValidationError("cannot open '" + path + "'");
    return load_free_field(is);
}

}  // namespace riftort
