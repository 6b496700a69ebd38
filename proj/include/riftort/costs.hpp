#pragma once

#include <Eigen/Dense>
#include <string>

namespace riftort {

// Convex transport cost c on displacement vectors, with its convex conjugate
// c*(y) = sup_x <x,y> - c(x) available in closed form.
//
//   quadratic : c(x) = |x|^2 / 2          (self-conjugate)
//   power:<p> : c(x) = |x|^p / p,  p > 1  (conjugate |y|^q / q, 1/p + 1/q = 1)
//
// Both are strictly convex with superlinear growth, so grad and conjugate_grad
// are mutually inverse bijections.  For p < 2 the gradient at the origin is
// taken as 0 (the unique subgradient there, and the continuous limit).
class CostFunction {
  public:
    enum class Kind { Quadratic, Power };

    static CostFunction quadratic();
    static CostFunction power(double p);  // requires p > 1

    // "quadratic" or "power:<p>"; malformed text or p <= 1 throws ValidationError
    static CostFunction parse(const std::string& text);

    Kind kind() const { return kind_; }
    double exponent() const { return p_; }            // p (2 for quadratic)
    double conjugate_exponent() const { return q_; }  // q = p/(p-1)
    std::string name() const;                         // canonical config string

    // c and grad c reject non-finite inputs (domain error); the conjugate side
    // is only ever fed values we computed ourselves.
    double value(const Eigen::VectorXd& x) const;
    Eigen::VectorXd grad(const Eigen::VectorXd& x) const;
    double conjugate(const Eigen::VectorXd& y) const;
    Eigen::VectorXd conjugate_grad(const Eigen::VectorXd& y) const;

    // Bregman divergence of c: c(x) - c(z) - <grad c(z), x - z>
    double bregman(const Eigen::VectorXd& x, const Eigen::VectorXd& z) const;
    // matching integrand c(x) - <x,y> + c*(y); equals bregman(x, conjugate_grad(y))
    double matching(const Eigen::VectorXd& x, const Eigen::VectorXd& y) const;

    // Row-wise batch forms (one displacement per row) for the hot loops.
    Eigen::VectorXd value_rows(const Eigen::MatrixXd& x) const;
    Eigen::VectorXd conjugate_rows(const Eigen::MatrixXd& y) const;
    Eigen::MatrixXd grad_rows(const Eigen::MatrixXd& x) const;
    Eigen::MatrixXd conjugate_grad_rows(const Eigen::MatrixXd& y) const;

  private:
    CostFunction(Kind kind, double p);

    Kind kind_;
    double p_;
    double q_;
};

}  // namespace riftort
