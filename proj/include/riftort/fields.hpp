#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <string>

#include "riftort/costs.hpp"
#include "riftort/synthdata.hpp"

namespace riftort {

// Random Fourier feature basis over (x, t):
//
//   phi_j(x, t) = sqrt(2/M) * cos(<w_j, x> + w_t_j * t + b_j),   j < M
//
// with w_j ~ N(0, bandwidth_x^-2 I), w_t_j ~ N(0, bandwidth_t^-2) and
// b_j ~ U[0, 2pi), all drawn deterministically from the seed.  With the
// affine block enabled, the features (1, x_1, ..., x_d, t) are appended so
// exact affine structure does not have to be synthesised from cosines.
class FeatureMap {
  public:
    FeatureMap() = default;  // empty map; any evaluation rejects it by dimension
    FeatureMap(int dim, int num_random, double bandwidth_x, double bandwidth_t,
               bool affine_block, std::uint64_t seed);

    static FeatureMap from_parts(Eigen::MatrixXd freq_x, Eigen::VectorXd freq_t,
                                 Eigen::VectorXd phase, double bandwidth_x,
                                 double bandwidth_t, bool affine_block, std::uint64_t seed);

    int dim() const { return static_cast<int>(freq_x_.cols()); }
    int num_random() const { return static_cast<int>(freq_x_.rows()); }
    int num_features() const { return num_random() + (affine_ ? dim() + 2 : 0); }
    bool has_affine_block() const { return affine_; }
    double bandwidth_x() const { return bandwidth_x_; }
    double bandwidth_t() const { return bandwidth_t_; }
    std::uint64_t seed() const { return seed_; }
    const Eigen::MatrixXd& freq_x() const { return freq_x_; }
    const Eigen::VectorXd& freq_t() const { return freq_t_; }
    const Eigen::VectorXd& phase() const { return phase_; }
    double scale() const { return scale_; }

    // cos arguments for a batch: X * freq_x^T + t * freq_t^T + phase^T, P x M
    Eigen::MatrixXd angles(const Eigen::MatrixXd& x, const Eigen::VectorXd& t) const;

    Eigen::VectorXd features(const Eigen::VectorXd& x, double t) const;
    // d(phi_j)/dx as an F x d matrix (rows follow feature order)
    Eigen::MatrixXd feature_grads(const Eigen::VectorXd& x, double t) const;
    Eigen::VectorXd feature_time_derivs(const Eigen::VectorXd& x, double t) const;

    // batch: one row per point, times aligned with rows; result P x F
    Eigen::MatrixXd feature_rows(const Eigen::MatrixXd& x, const Eigen::VectorXd& t) const;

  private:
    Eigen::MatrixXd freq_x_;  // M x d
    Eigen::VectorXd freq_t_;  // M
    Eigen::VectorXd phase_;   // M
    double bandwidth_x_ = 1.0;
    double bandwidth_t_ = 1.0;
    bool affine_ = true;
    std::uint64_t seed_ = 0;
    double scale_ = 1.0;  // sqrt(2/M)
};

struct FeatureMapConfig {
    int num_random = 1024;
    double bandwidth_x = 0.0;  // <= 0: resolved to 2 * median pairwise distance
    double bandwidth_t = 0.5;
    bool affine_block = true;
    std::uint64_t seed = 0;
};

// Median pairwise distance over (a deterministic subsample of) the rows;
// used as the data-driven bandwidth heuristic.
double median_pairwise_distance(const Eigen::MatrixXd& points, int max_points = 256);

// Build a feature map sized for this coupling: bandwidth_x <= 0 is replaced by
// twice the median pairwise distance of interpolation positions over the
// midpoint time grid with `time_points` entries.
FeatureMap build_features(const PairedCoupling& coupling, const FeatureMapConfig& config,
                          int time_points);

// Scalar potential f(x, t) = <theta, phi(x, t)>.
struct PotentialField {
    FeatureMap map;
    Eigen::VectorXd theta;  // length map.num_features()

    double value(const Eigen::VectorXd& x, double t) const;
    Eigen::VectorXd grad(const Eigen::VectorXd& x, double t) const;
    double time_deriv(const Eigen::VectorXd& x, double t) const;

    Eigen::MatrixXd grad_rows(const Eigen::MatrixXd& x, const Eigen::VectorXd& t) const;
    Eigen::VectorXd value_rows(const Eigen::MatrixXd& x, const Eigen::VectorXd& t) const;
    Eigen::VectorXd time_deriv_rows(const Eigen::MatrixXd& x, const Eigen::VectorXd& t) const;
};

// Unconstrained vector field v(x, t) = coef^T phi(x, t).
struct FreeVectorField {
    FeatureMap map;
    Eigen::MatrixXd coef;  // F x d

    Eigen::VectorXd eval(const Eigen::VectorXd& x, double t) const;
    Eigen::MatrixXd eval_rows(const Eigen::MatrixXd& x, const Eigen::VectorXd& t) const;
};

// Drift induced by a potential under cost c: grad c*(grad_x f(x, t)).
Eigen::VectorXd drift_from_potential(const CostFunction& cost, const PotentialField& f,
                                     const Eigen::VectorXd& x, double t);
Eigen::MatrixXd drift_from_potential_rows(const CostFunction& cost, const PotentialField& f,
                                          const Eigen::MatrixXd& x, const Eigen::VectorXd& t);

// Plain-text persistence.  Header line:
//   riftort-field v1 kind=<potential|free> d=<d> M=<M> affine=<0|1>
//     bandwidth_x=<..> bandwidth_t=<..> seed=<..>
// followed by freq_x rows, freq_t, phase, then coefficients; numbers carry 17
// significant digits so save/load round-trips bitwise.
void save_field(std::ostream& os, const PotentialField& f);
void save_field(std::ostream& os, const FreeVectorField& v);
void save_field(const std::string& path, const PotentialField& f);
void save_field(const std::string& path, const FreeVectorField& v);
PotentialField load_potential_field(std::istream& is);
FreeVectorField load_free_field(std::istream& is);
PotentialField load_potential_field(const std::string& path);
FreeVectorField load_free_field(const std::string& path);

}  // namespace riftort
