#pragma once

#include <Eigen/Core>
#include <utility>
#include <vector>

namespace critscore {

/// Result of a positive-definite solve: solution plus spectrum diagnostics.
struct SpdSolve {
    Eigen::VectorXd x;
    double condition_number;  // max eigenvalue / min eigenvalue
    double min_eigenvalue;
    double max_eigenvalue;
};

/// Solve M x = b for symmetric M with a positive-definiteness check: the
/// smallest eigenvalue must exceed rel_threshold times the largest diagonal
/// entry of M, otherwise SingularInformation is thrown. The failed check is a
/// diagnostic, not a recoverable state; no pseudo-inverse fallback.
SpdSolve spd_solve(const Eigen::MatrixXd& M, const Eigen::VectorXd& b,
                   double rel_threshold = 1e-12);

/// Schur complement M/M_rest = M_kk - M_kr M_rr^{-1} M_rk over the kept
/// indices. With an empty complement this is M restricted to `keep`.
/// Throws SingularInformation when the complement block is numerically
/// singular.
Eigen::MatrixXd schur_complement(const Eigen::MatrixXd& M, const std::vector<int>& keep,
                                 double rel_threshold = 1e-12);

/// Eigenpairs of a symmetric matrix with eigenvalue <= rel_threshold times
/// the largest eigenvalue, sorted by eigenvalue. Numerical route to critical
/// directions when they are not known analytically.
std::vector<std::pair<double, Eigen::VectorXd>> detect_critical_numeric(
    const Eigen::MatrixXd& info, double rel_threshold);

}  // namespace critscore
