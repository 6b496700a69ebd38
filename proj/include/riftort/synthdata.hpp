#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

namespace riftort {

// n x d matrix of samples (one per row) plus the seed that produced it.
struct SampleSet {
    Eigen::MatrixXd data;
    std::uint64_t seed = 0;

    int n() const { return static_cast<int>(data.rows()); }
    int dim() const { return static_cast<int>(data.cols()); }
};

// Paired draw (x0_i, x1_i) from a coupling; both matrices n x d.
struct PairedCoupling {
    Eigen::MatrixXd x0;
    Eigen::MatrixXd x1;

    int n() const { return static_cast<int>(x0.rows()); }
    int dim() const { return static_cast<int>(x0.cols()); }
    Eigen::MatrixXd displacement() const { return x1 - x0; }  // straight-line velocity
    void validate() const;  // shape agreement + finiteness
};

// Closed-form sampleable distribution used to set up experiments.
class DistributionSpec {
  public:
    enum class Kind { Gaussian, UniformBox, GaussianMixture, TwoPoint };

    static DistributionSpec gaussian(Eigen::VectorXd mean, Eigen::MatrixXd cov);
    static DistributionSpec uniform_box(Eigen::VectorXd lo, Eigen::VectorXd hi);
    static DistributionSpec mixture(std::vector<double> weights,
                                    std::vector<Eigen::VectorXd> means,
                                    std::vector<Eigen::MatrixXd> covs);
    static DistributionSpec two_point(Eigen::VectorXd a, Eigen::VectorXd b);

    // Accepts e.g. "gaussian:mean=0,0;cov=I", "uniform:lo=-1,-1;hi=1,1",
    // "twopoint:a=-1;b=1", "mixture:weights=0.5,0.5;means=-2|2;covs=0.25|0.25".
    // Covariances: "I", a scalar (var * I), a diagonal list, or '|'-separated rows.
    static DistributionSpec parse(const std::string& text);

    Kind kind() const { return kind_; }
    int dim() const { return dim_; }
    std::string name() const;  // canonical config string

    // Gaussian-only accessors (first component for mixtures is not exposed;
    // these throw unless kind() == Gaussian).
    const Eigen::VectorXd& mean() const;
    const Eigen::MatrixXd& cov() const;

    friend SampleSet sample(const DistributionSpec& spec, int n, std::uint64_t seed);

  private:
    DistributionSpec() = default;

    Kind kind_ = Kind::Gaussian;
    int dim_ = 0;
    // gaussian / mixture components
    std::vector<double> weights_;
    std::vector<Eigen::VectorXd> means_;
    std::vector<Eigen::MatrixXd> covs_;
    std::vector<Eigen::MatrixXd> factors_;  // cov = L L^T, computed on construction
    // uniform box
    Eigen::VectorXd lo_, hi_;
    // two-point
    Eigen::VectorXd a_, b_;
};

// n iid draws; identical output for identical (spec, n, seed)
SampleSet sample(const DistributionSpec& spec, int n, std::uint64_t seed);

// Product coupling: pairs s0 row i with a seeded random permutation of s1.
PairedCoupling independent_coupling(const SampleSet& s0, const SampleSet& s1,
                                    std::uint64_t seed);

// Deterministic planar rotation x1 = R(theta) x0; requires d == 2 and theta
// not congruent to 0 or pi (those degenerate to identity / antipodal map).
PairedCoupling rotation_coupling(const SampleSet& s0, double theta);

// Linear interpolation path at time t in [0,1]: position (1-t) x0 + t x1 and
// its (constant) velocity x1 - x0.
struct InterpolationSlice {
    Eigen::MatrixXd position;
    Eigen::MatrixXd velocity;
};
InterpolationSlice interpolate(const PairedCoupling& coupling, double t);

// Midpoint grid { (k + 1/2) / T : k = 0..T-1 }; avoids the endpoints where
// interpolation collapses onto the marginals.
Eigen::VectorXd time_grid(int T);

}  // namespace riftort
