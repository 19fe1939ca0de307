#pragma once

#include <Eigen/Core>
#include <functional>

namespace critscore {

struct NelderMeadResult {
    Eigen::VectorXd x;
    double f = 0.0;
    int evaluations = 0;
    bool converged = false;  // simplex tolerances met before the iteration cap
};

/// Minimize f by the Nelder-Mead simplex method. `step` sets the initial
/// simplex edge per coordinate. Stops when the simplex function spread and
/// diameter drop below f_tol and x_tol, or after max_iter iterations.
NelderMeadResult nelder_mead(const std::function<double(const Eigen::VectorXd&)>& f,
                             const Eigen::VectorXd& x0, const Eigen::VectorXd& step,
                             int max_iter = 500, double f_tol = 1e-11, double x_tol = 1e-9);

}  // namespace critscore
