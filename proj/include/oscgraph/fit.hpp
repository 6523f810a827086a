#ifndef OSCGRAPH_FIT_HPP
#define OSCGRAPH_FIT_HPP

#include <cmath>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

namespace oscgraph {

struct SlopeFit {
    double slope = 0.0;      // coefficient of the abscissa
    double intercept = 0.0;
    double log_coeff = 0.0;  // coefficient of log(abscissa), when requested
    double rms_residual = 0.0;
    int n = 0;
};

/// Least squares on log-transformed data:
///   log y = intercept + slope * x                 (with_log_term = false)
///   log y = intercept + slope * x + c * log x     (with_log_term = true)
/// The log-x regressor absorbs algebraic prefactors of exponential laws.
inline SlopeFit fit_log_decay(const std::vector<double>& x, const std::vector<double>& y,
                              bool with_log_term) {
    if (x.size() != y.size() || x.size() < (with_log_term ? 4u : 2u))
        throw std::invalid_argument("fit needs matching arrays and enough points");
    const int cols = with_log_term ? 3 : 2;
    Eigen::MatrixXd A(long(x.size()), cols);
    Eigen::VectorXd b(long(x.size()));
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!(y[i] > 0.0) || !(x[i] > 0.0))
            throw std::domain_error("fit_log_decay needs positive data");
        A(long(i), 0) = 1.0;
        A(long(i), 1) = x[i];
        if (with_log_term) A(long(i), 2) = std::log(x[i]);
        b(long(i)) = std::log(y[i]);
    }
    Eigen::VectorXd coef = A.colPivHouseholderQr().solve(b);
    SlopeFit f;
    f.intercept = coef(0);
    f.slope = coef(1);
    if (with_log_term) f.log_coeff = coef(2);
    f.rms_residual = std::sqrt((A * coef - b).squaredNorm() / double(x.size()));
    f.n = int(x.size());
    return f;
}

/// Power-law fit: log y = intercept + slope * log x.
inline SlopeFit fit_power_law(const std::vector<double>& x, const std::vector<double>& y) {
    std::vector<double> lx(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!(x[i] > 0.0)) throw std::domain_error("fit_power_law needs positive abscissae");
        lx[i] = std::log(x[i]);
    }
    // reuse the linear machinery on (log x, y)
    if (lx.size() != y.size() || lx.size() < 2)
        throw std::invalid_argument("fit needs matching arrays and enough points");
    Eigen::MatrixXd A(long(lx.size()), 2);
    Eigen::VectorXd b(long(lx.size()));
    for (std::size_t i = 0; i < lx.size(); ++i) {
        if (!(y[i] > 0.0)) throw std::domain_error("fit_power_law needs positive data");
        A(long(i), 0) = 1.0;
        A(long(i), 1) = lx[i];
        b(long(i)) = std::log(y[i]);
    }
    Eigen::VectorXd coef = A.colPivHouseholderQr().solve(b);
    SlopeFit f;
    f.intercept = coef(0);
    f.slope = coef(1);
    f.rms_residual = std::sqrt((A * coef - b).squaredNorm() / double(lx.size()));
    f.n = int(lx.size());
    return f;
}

} // namespace oscgraph

#endif
