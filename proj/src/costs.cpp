#include "riftort/costs.hpp"

#include <cmath>
#include <sstream>

#include "riftort/errors.hpp"

namespace riftort {

namespace {

void require_finite(const Eigen::VectorXd& x, const char* what) {
    if (!x.allFinite()) throw ValidationError(std::string(what) + ": input has non-finite entries");
}

// |x|^(e-1) * x evaluated without forming |x|^(e-2), which blows up at the
// origin for e < 2.  Returns 0 at the origin (valid subgradient for e > 1).
Eigen::VectorXd power_grad(const Eigen::VectorXd& x, double e) {
    const double n = x.norm();
    if (n == 0.0) return Eigen::VectorXd::Zero(x.size());
    return std::pow(n, e - 1.0) * (x / n);
}

Eigen::VectorXd row_norms(const Eigen::MatrixXd& x) {
    return x.rowwise().norm();
}

}  // namespace

CostFunction::CostFunction(Kind kind, double p) : kind_(kind), p_(p), q_(p / (p - 1.0)) {}

CostFunction CostFunction::quadratic() { return CostFunction(Kind::Quadratic, 2.0); }

CostFunction CostFunction::power(double p) {
    if (!(p > 1.0) || !std::isfinite(p))
        throw ValidationError("power cost requires exponent p > 1");
    return CostFunction(Kind::Power, p);
}

CostFunction CostFunction::parse(const std::string& text) {
    if (text == "quadratic") return quadratic();
    const std::string prefix = "power:";
    if (text.rfind(prefix, 0) == 0) {
        const std::string num = text.substr(prefix.size());
        std::size_t used = 0;
        double p = 0.0;
        try {
            p = std::stod(num, &used);
        } catch (const std::exception&) {
            throw ValidationError("cost: cannot parse exponent in '" + text + "'");
        }
        if (used != num.size())
            throw ValidationError("cost: trailing characters in '" + text + "'");
        return power(p);
    }
    throw ValidationError("cost: unknown spec '" + text + "' (expected 'quadratic' or 'power:<p>')");
}

std::string CostFunction::name() const {
    if (kind_ == Kind::Quadratic) return "quadratic";
    std::ostringstream os;
    os << "power:" << p_;
    return os.str();
}

double CostFunction::value(const Eigen::VectorXd& x) const {
    require_finite(x, "cost value");
    if (kind_ == Kind::Quadratic) return 0.5 * x.squaredNorm();
    return std::pow(x.norm(), p_) / p_;
}

Eigen::VectorXd CostFunction::grad(const Eigen::VectorXd& x) const {
    require_finite(x, "cost grad");
    if (kind_ == Kind::Quadratic) return x;
    return power_grad(x, p_);
}

double CostFunction::conjugate(const Eigen::VectorXd& y) const {
    if (kind_ == Kind::Quadratic) return 0.5 * y.squaredNorm();
    return std::pow(y.norm(), q_) / q_;
}

Eigen::VectorXd CostFunction::conjugate_grad(const Eigen::VectorXd& y) const {
    if (kind_ == Kind::Quadratic) return y;
    return power_grad(y, q_);
}

double CostFunction::bregman(const Eigen::VectorXd& x, const Eigen::VectorXd& z) const {
    return value(x) - value(z) - grad(z).dot(x - z);
}

double CostFunction::matching(const Eigen::VectorXd& x, const Eigen::VectorXd& y) const {
    return value(x) - x.dot(y) + conjugate(y);
}

Eigen::VectorXd CostFunction::value_rows(const Eigen::MatrixXd& x) const {
    if (kind_ == Kind::Quadratic) return 0.5 * x.rowwise().squaredNorm();
    return row_norms(x).array().pow(p_) / p_;
}

Eigen::VectorXd CostFunction::conjugate_rows(const Eigen::MatrixXd& y) const {
    if (kind_ == Kind::Quadratic) return 0.5 * y.rowwise().squaredNorm();
    return row_norms(y).array().pow(q_) / q_;
}

namespace {

// row-wise |x|^(e-1) * unit(x); same arithmetic as power_grad so single-point
// and batch paths agree bitwise
Eigen::MatrixXd power_grad_rows(const Eigen::MatrixXd& x, double e) {
    Eigen::MatrixXd out(x.rows(), x.cols());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        const double n = x.row(i).norm();
        if (n == 0.0)
            out.row(i).setZero();
        else
            out.row(i) = std::pow(n, e - 1.0) * (x.row(i) / n);
    }
    return out;
}

}  // namespace

Eigen::MatrixXd CostFunction::grad_rows(const Eigen::MatrixXd& x) const {
    if (kind_ == Kind::Quadratic) return x;
    return power_grad_rows(x, p_);
}

Eigen::MatrixXd CostFunction::conjugate_grad_rows(const Eigen::MatrixXd& y) const {
    if (kind_ == Kind::Quadratic) return y;
    return power_grad_rows(y, q_);
}

}  // namespace riftort
