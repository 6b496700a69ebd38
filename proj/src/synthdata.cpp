#include "riftort/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "riftort/errors.hpp"
#include "riftort/rng.hpp"

namespace riftort {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Cholesky when PD; eigen-decomposition square root for merely PSD input.
// Eigenvalues below -1e-10 mean the matrix is not a covariance: reject.
Eigen::MatrixXd psd_factor(const Eigen::MatrixXd& cov) {
    if (cov.rows() != cov.cols()) throw ValidationError("covariance must be square");
    if ((cov - cov.transpose()).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + cov.cwiseAbs().maxCoeff()))
        throw ValidationError("covariance must be symmetric");
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() == Eigen::Success) return llt.matrixL();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
    if (es.eigenvalues().minCoeff() < -1e-10)
        throw ValidationError("covariance must be positive semidefinite");
    Eigen::VectorXd lam = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return es.eigenvectors() * lam.asDiagonal();
}

std::string format_vector(const Eigen::VectorXd& v) {
    std::ostringstream os;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (i) os << ',';
        os << v[i];
    }
    return os.str();
}

std::string format_cov(const Eigen::MatrixXd& c) {
    const int d = static_cast<int>(c.rows());
    if (c.isIdentity(0.0)) return "I";
    if (c.isDiagonal(0.0)) {
        if (d == 1) return format_vector(c.diagonal());
        bool scalar = true;
        for (int i = 1; i < d; ++i) scalar = scalar && c(i, i) == c(0, 0);
        if (scalar) {
            std::ostringstream os;
            os << c(0, 0);
            return os.str();
        }
        return format_vector(c.diagonal());
    }
    std::ostringstream os;
    for (int i = 0; i < d; ++i) {
        if (i) os << '|';
        os << format_vector(c.row(i));
    }
    return os.str();
}

std::vector<double> parse_number_list(const std::string& text, const std::string& ctx) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(item, &used);
        } catch (const std::exception&) {
            throw ValidationError(ctx + ": cannot parse number '" + item + "'");
        }
        if (used != item.size()) throw ValidationError(ctx + ": trailing characters in '" + item + "'");
        out.push_back(v);
    }
    if (out.empty()) throw ValidationError(ctx + ": empty number list");
    return out;
}

Eigen::VectorXd to_vector(const std::vector<double>& v) {
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

// "I" | scalar | diagonal list | '|'-separated rows
Eigen::MatrixXd parse_cov(const std::string& text, int d, const std::string& ctx) {
    if (text == "I") return Eigen::MatrixXd::Identity(d, d);
    if (text.find('|') != std::string::npos) {
        std::vector<std::vector<double>> rows;
        std::stringstream ss(text);
        std::string row;
        while (std::getline(ss, row, '|')) rows.push_back(parse_number_list(row, ctx));
        if (static_cast<int>(rows.size()) != d)
            throw ValidationError(ctx + ": covariance needs " + std::to_string(d) + " rows");
        Eigen::MatrixXd cov(d, d);
        for (int i = 0; i < d; ++i) {
            if (static_cast<int>(rows[i].size()) != d)
                throw ValidationError(ctx + ": covariance rows must have " + std::to_string(d) + " entries");
            cov.row(i) = to_vector(rows[i]);
        }
        return cov;
    }
    std::vector<double> nums = parse_number_list(text, ctx);
    if (nums.size() == 1) return nums[0] * Eigen::MatrixXd::Identity(d, d);
    if (static_cast<int>(nums.size()) == d) {
        Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(d, d);
        cov.diagonal() = to_vector(nums);
        return cov;
    }
    throw ValidationError(ctx + ": covariance list length must be 1 or " + std::to_string(d));
}

// key=value pairs separated by ';'
std::vector<std::pair<std::string, std::string>> parse_fields(const std::string& text,
                                                              const std::string& ctx) {
    std::vector<std::pair<std::string, std::string>> out;
    std::stringstream ss(text);
    std::string piece;
    while (std::getline(ss, piece, ';')) {
        auto eq = piece.find('=');
        if (eq == std::string::npos)
            throw ValidationError(ctx + ": expected key=value, got '" + piece + "'");
        out.emplace_back(piece.substr(0, eq), piece.substr(eq + 1));
    }
    return out;
}

std::string find_field(const std::vector<std::pair<std::string, std::string>>& fields,
                       const std::string& key, const std::string& ctx) {
    for (const auto& [k, v] : fields)
        if (k == key) return v;
    throw ValidationError(ctx + ": missing field '" + key + "'");
}

}  // namespace

void PairedCoupling::validate() const {
    if (x0.rows() != x1.rows() || x0.cols() != x1.cols())
        throw ValidationError("coupling: x0 and x1 shapes differ");
    if (x0.rows() == 0 || x0.cols() == 0) throw ValidationError("coupling: empty");
    if (!x0.allFinite() || !x1.allFinite())
        throw ValidationError("coupling: non-finite entries");
}

DistributionSpec DistributionSpec::gaussian(Eigen::VectorXd mean, Eigen::MatrixXd cov) {
    return mixture({1.0}, {std::move(mean)}, {std::move(cov)});
}

DistributionSpec DistributionSpec::mixture(std::vector<double> weights,
                                           std::vector<Eigen::VectorXd> means,
                                           std::vector<Eigen::MatrixXd> covs) {
    if (weights.empty() || weights.size() != means.size() || weights.size() != covs.size())
        throw ValidationError("mixture: weights/means/covs must be non-empty and equally sized");
    const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
    if (std::abs(total - 1.0) > 1e-12) throw ValidationError("mixture: weights must sum to 1");
    for (double w : weights)
        if (w < 0.0) throw ValidationError("mixture: negative weight");

    DistributionSpec s;
    s.kind_ = weights.size() == 1 ? Kind::Gaussian : Kind::GaussianMixture;
    s.dim_ = static_cast<int>(means[0].size());
    if (s.dim_ == 0) throw ValidationError("mixture: zero-dimensional mean");
    for (std::size_t i = 0; i < means.size(); ++i) {
        if (means[i].size() != s.dim_) throw ValidationError("mixture: mean dimensions differ");
        if (covs[i].rows() != s.dim_) throw ValidationError("mixture: cov dimension mismatch");
        s.factors_.push_back(psd_factor(covs[i]));
    }
    s.weights_ = std::move(weights);
    s.means_ = std::move(means);
    s.covs_ = std::move(covs);
    return s;
}

DistributionSpec DistributionSpec::uniform_box(Eigen::VectorXd lo, Eigen::VectorXd hi) {
    if (lo.size() == 0 || lo.size() != hi.size())
        throw ValidationError("uniform: lo/hi must be non-empty and equally sized");
    if (((hi - lo).array() <= 0.0).any()) throw ValidationError("uniform: need hi > lo per axis");
    DistributionSpec s;
    s.kind_ = Kind::UniformBox;
    s.dim_ = static_cast<int>(lo.size());
    s.lo_ = std::move(lo);
    s.hi_ = std::move(hi);
    return s;
}

DistributionSpec DistributionSpec::two_point(Eigen::VectorXd a, Eigen::VectorXd b) {
    if (a.size() == 0 || a.size() != b.size())
        throw ValidationError("twopoint: a/b must be non-empty and equally sized");
    DistributionSpec s;
    s.kind_ = Kind::TwoPoint;
    s.dim_ = static_cast<int>(a.size());
    s.a_ = std::move(a);
    s.b_ = std::move(b);
    return s;
}

DistributionSpec DistributionSpec::parse(const std::string& text) {
    const auto colon = text.find(':');
    if (colon == std::string::npos)
        throw ValidationError("distribution: expected '<kind>:<fields>', got '" + text + "'");
    const std::string kind = text.substr(0, colon);
    const std::string rest = text.substr(colon + 1);
    const auto fields = parse_fields(rest, "distribution " + kind);

    if (kind == "gaussian") {
        Eigen::VectorXd mean = to_vector(parse_number_list(
            find_field(fields, "mean", "gaussian"), "gaussian mean"));
        Eigen::MatrixXd cov = parse_cov(find_field(fields, "cov", "gaussian"),
                                        static_cast<int>(mean.size()), "gaussian cov");
        return gaussian(std::move(mean), std::move(cov));
    }
    if (kind == "uniform") {
        Eigen::VectorXd lo = to_vector(parse_number_list(find_field(fields, "lo", "uniform"), "uniform lo"));
        Eigen::VectorXd hi = to_vector(parse_number_list(find_field(fields, "hi", "uniform"), "uniform hi"));
        return uniform_box(std::move(lo), std::move(hi));
    }
    if (kind == "twopoint") {
        Eigen::VectorXd a = to_vector(parse_number_list(find_field(fields, "a", "twopoint"), "twopoint a"));
        Eigen::VectorXd b = to_vector(parse_number_list(find_field(fields, "b", "twopoint"), "twopoint b"));
        return two_point(std::move(a), std::move(b));
    }
    if (kind == "mixture") {
        std::vector<double> weights =
            parse_number_list(find_field(fields, "weights", "mixture"), "mixture weights");
        std::vector<Eigen::VectorXd> means;
        {
            std::stringstream ss(find_field(fields, "means", "mixture"));
            std::string piece;
            while (std::getline(ss, piece, '|'))
                means.push_back(to_vector(parse_number_list(piece, "mixture means")));
        }
        if (means.empty()) throw ValidationError("mixture: empty means");
        const int d = static_cast<int>(means[0].size());
        std::vector<Eigen::MatrixXd> covs;
        {
            std::stringstream ss(find_field(fields, "covs", "mixture"));
            std::string piece;
            while (std::getline(ss, piece, '|'))
                covs.push_back(parse_cov(piece, d, "mixture covs"));
        }
        return mixture(std::move(weights), std::move(means), std::move(covs));
    }
    throw ValidationError("distribution: unknown kind '" + kind + "'");
}

std::string DistributionSpec::name() const {
    std::ostringstream os;
    switch (kind_) {
        case Kind::Gaussian:
            os << "gaussian:mean=" << format_vector(means_[0]) << ";cov=" << format_cov(covs_[0]);
            break;
        case Kind::UniformBox:
            os << "uniform:lo=" << format_vector(lo_) << ";hi=" << format_vector(hi_);
            break;
        case Kind::TwoPoint:
            os << "twopoint:a=" << format_vector(a_) << ";b=" << format_vector(b_);
            break;
        case Kind::GaussianMixture: {
            os << "mixture:weights=";
            for (std::size_t i = 0; i < weights_.size(); ++i) {
                if (i) os << ',';
                os << weights_[i];
            }
            os << ";means=";
            for (std::size_t i = 0; i < means_.size(); ++i) {
                if (i) os << '|';
                os << format_vector(means_[i]);
            }
            os << ";covs=";
            for (std::size_t i = 0; i < covs_.size(); ++i) {
                if (i) os << '|';
                os << format_cov(covs_[i]);
            }
            break;
        }
    }
    return os.str();
}

const Eigen::VectorXd& DistributionSpec::mean() const {
    if (kind_ != Kind::Gaussian) throw ValidationError("mean(): not a gaussian");
    return means_[0];
}

const Eigen::MatrixXd& DistributionSpec::cov() const {
    if (kind_ != Kind::Gaussian) throw ValidationError("cov(): not a gaussian");
    return covs_[0];
}

SampleSet sample(const DistributionSpec& spec, int n, std::uint64_t seed) {
    if (n <= 0) throw ValidationError("sample: need n > 0");
    const int d = spec.dim_;
    SampleSet out;
    out.seed = seed;
    out.data.resize(n, d);
    const CounterRng draws = CounterRng::derive(seed, streams::kSampleDraw);

    switch (spec.kind_) {
        case DistributionSpec::Kind::Gaussian:
        case DistributionSpec::Kind::GaussianMixture: {
            const CounterRng comp = CounterRng::derive(seed, streams::kSampleComponent);
            Eigen::VectorXd z(d);
            for (int i = 0; i < n; ++i) {
                std::size_t c = 0;
                if (spec.weights_.size() > 1) {
                    const double u = comp.uniform(static_cast<std::uint64_t>(i));
                    double acc = 0.0;
                    for (std::size_t j = 0; j < spec.weights_.size(); ++j) {
                        acc += spec.weights_[j];
                        if (u < acc) {
                            c = j;
                            break;
                        }
                        c = j;  // rounding: fall through to last component
                    }
                }
                for (int j = 0; j < d; ++j)
                    z[j] = draws.normal(static_cast<std::uint64_t>(i) * d + j);
                out.data.row(i) = (spec.means_[c] + spec.factors_[c] * z).transpose();
            }
            break;
        }
        case DistributionSpec::Kind::UniformBox: {
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < d; ++j)
                    out.data(i, j) = spec.lo_[j] +
                                     (spec.hi_[j] - spec.lo_[j]) *
                                         draws.uniform(static_cast<std::uint64_t>(i) * d + j);
            break;
        }
        case DistributionSpec::Kind::TwoPoint: {
            for (int i = 0; i < n; ++i) {
                const bool first = draws.uniform(static_cast<std::uint64_t>(i)) < 0.5;
                out.data.row(i) = (first ? spec.a_ : spec.b_).transpose();
            }
            break;
        }
    }
    return out;
}

PairedCoupling independent_coupling(const SampleSet& s0, const SampleSet& s1, std::uint64_t seed) {
    if (s0.n() != s1.n()) throw ValidationError("independent_coupling: sample counts differ");
    if (s0.dim() != s1.dim()) throw ValidationError("independent_coupling: dimensions differ");
    const int n = s0.n();

    // Fisher-Yates with counter-indexed draws
    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    const CounterRng rng = CounterRng::derive(seed, streams::kPermutation);
    for (int i = n - 1; i > 0; --i) {
        const auto j = static_cast<int>(rng.below(static_cast<std::uint64_t>(i),
                                                  static_cast<std::uint64_t>(i) + 1));
        std::swap(perm[i], perm[j]);
    }

    PairedCoupling out;
    out.x0 = s0.data;
    out.x1.resize(n, s1.dim());
    for (int i = 0; i < n; ++i) out.x1.row(i) = s1.data.row(perm[i]);
    out.validate();
    return out;
}

PairedCoupling rotation_coupling(const SampleSet& s0, double theta) {
    if (s0.dim() != 2) throw ValidationError("rotation_coupling: requires d == 2");
    double m = std::fmod(theta, 2.0 * kPi);
    if (m < 0) m += 2.0 * kPi;
    if (std::min({m, std::abs(m - kPi), 2.0 * kPi - m}) < 1e-9)
        throw ValidationError("rotation_coupling: theta must not be 0 or pi (mod 2pi)");

    Eigen::Matrix2d rot;
    rot << std::cos(theta), -std::sin(theta), std::sin(theta), std::cos(theta);
    PairedCoupling out;
    out.x0 = s0.data;
    out.x1 = s0.data * rot.transpose();
    out.validate();
    return out;
}

InterpolationSlice interpolate(const PairedCoupling& coupling, double t) {
    if (!(t >= 0.0 && t <= 1.0)) throw ValidationError("interpolate: t must lie in [0,1]");
    InterpolationSlice s;
    s.position = (1.0 - t) * coupling.x0 + t * coupling.x1;
    s.velocity = coupling.x1 - coupling.x0;
    return s;
}

Eigen::VectorXd time_grid(int T) {
    if (T <= 0) throw ValidationError("time_grid: need T > 0");
    Eigen::VectorXd g(T);
    for (int k = 0; k < T; ++k) g[k] = (k + 0.5) / T;
    return g;
}

}  // namespace riftort
