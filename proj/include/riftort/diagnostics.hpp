#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "riftort/costs.hpp"
#include "riftort/fields.hpp"
#include "riftort/flow.hpp"
#include "riftort/synthdata.hpp"

namespace riftort {

// Mean endpoint cost  (1/n) sum_i c(x1_i - x0_i).
double transport_cost(const PairedCoupling& coupling, const CostFunction& cost);

// Path energy along a trajectory: finite-difference velocities on each step,
// cost averaged over particles, summed against the step quadrature.  Exactly
// equals the endpoint cost when every particle moves on a straight line.
double pathwise_cost(const Trajectory& trajectory, const CostFunction& cost);

// Convexity surplus of the realized paths: pathwise minus endpoint cost (>= 0
// up to discretization).
double straightness(const Trajectory& trajectory, const CostFunction& cost);

// How far the coupling is from being representable by a single velocity
// field: the residual mean squared error of the drift regression.
double straightness_gap(const PairedCoupling& coupling, const FeatureMap& map,
                        const FitConfig& fit_config);

// Snapshot of particle positions at one time.
struct TimeSlice {
    double t = 0.0;
    Eigen::MatrixXd x;  // n x d
};

// Weak-form check that `residual` moves no mass at these slices: the largest
// normalized pairing  |mean <grad h, r>| / mean(|grad h| |r|)  over random
// smooth test functions h.  Near zero when the field is divergence-free
// against the sampled measure.
double marginal_preservation(const BatchDrift& residual, const std::vector<TimeSlice>& slices,
                             int num_test_functions, std::uint64_t seed);

// Energy distance between the empirical measures of two samples (rows):
//   2 E|a - b| - E|a - a'| - E|b - b'|
// with all means taken over the full index grids.  Nonnegative; exactly zero
// when the samples coincide as multisets.
double energy_distance(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

// Residual of the evolution equation  d_t f + c*(grad_x f) = 0  measured
// through its spatial gradient (the equation itself only holds up to a
// time-dependent shift, which the gradient quotients out).  Central
// differences in x with step 1e-4.
struct HjResidual {
    double mean_grad_norm = 0.0;
    double max_grad_norm = 0.0;
};
HjResidual hj_residual(const PotentialField& f, const CostFunction& cost,
                       const std::vector<TimeSlice>& slices);

// Inf-convolution check of the same equation: compares f(y, t) with
//   min_z [ t c((y - z)/t) + f(z, 0) ]
// minimized over a lattice, normalized by the spread of f over the probes.
// Only meaningful away from t = 0 and in low dimension (grids).
struct LatticeSpec {
    Eigen::VectorXd lo;
    Eigen::VectorXd hi;
    int points_per_dim = 101;
};
double hopflax_gap(const PotentialField& f, const CostFunction& cost, double t,
                   const Eigen::MatrixXd& probes, const LatticeSpec& grid);

// Exact optimal cost for 1-d samples of equal size: sort both sides and pair
// by rank (optimal for convex costs of the displacement).
double oracle_quantile_1d(const SampleSet& s0, const SampleSet& s1, const CostFunction& cost);

// Exact optimal assignment between equal-size samples (O(n^3), n <= 512).
struct AssignmentResult {
    double cost = 0.0;            // mean cost under the optimal assignment
    std::vector<int> assignment;  // row i of s0 matched to assignment[i] of s1
};
AssignmentResult oracle_hungarian(const SampleSet& s0, const SampleSet& s1,
                                  const CostFunction& cost);

// Closed-form optimal quadratic cost between Gaussians:
//   (|m1 - m0|^2 + tr(S0 + S1 - 2 (S1^1/2 S0 S1^1/2)^1/2)) / 2.
double oracle_gauss_quadratic(const Eigen::VectorXd& mean0, const Eigen::MatrixXd& cov0,
                              const Eigen::VectorXd& mean1, const Eigen::MatrixXd& cov1);

}  // namespace riftort
