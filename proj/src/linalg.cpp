#include "critscore/linalg.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "critscore/errors.hpp"

namespace critscore {

namespace {

void check_symmetric(const Eigen::MatrixXd& M, const char* who) {
    if (M.rows() != M.cols()) throw Error(std::string(who) + ": matrix must be square");
}

}  // namespace

SpdSolve spd_solve(const Eigen::MatrixXd& M, const Eigen::VectorXd& b, double rel_threshold) {
    check_symmetric(M, "spd_solve");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M);
    const Eigen::VectorXd& ev = es.eigenvalues();
    const double min_eig = ev.minCoeff();
    const double max_eig = ev.maxCoeff();
    const double max_diag = M.diagonal().maxCoeff();
    const double pivot_floor = rel_threshold * std::max(max_diag, 0.0);
    if (!(min_eig > pivot_floor) || !(max_diag > 0.0)) {
        throw SingularInformation(
            "information matrix failed the positive-definiteness check (min eigenvalue " +
                std::to_string(min_eig) + ", threshold " + std::to_string(pivot_floor) +
                "); likely an undetected critical direction at this point",
            min_eig, max_eig);
    }
    SpdSolve out;
    out.x = es.eigenvectors() * (es.eigenvectors().transpose() * b).cwiseQuotient(ev);
    out.condition_number = max_eig / min_eig;
    out.min_eigenvalue = min_eig;
    out.max_eigenvalue = max_eig;
    return out;
}

Eigen::MatrixXd schur_complement(const Eigen::MatrixXd& M, const std::vector<int>& keep,
                                 double rel_threshold) {
    check_symmetric(M, "schur_complement");
    const int d = static_cast<int>(M.rows());
    std::vector<char> kept(d, 0);
    for (int j : keep) {
        if (j < 0 || j >= d) throw Error("schur_complement: keep index out of range");
        kept[j] = 1;
    }
    std::vector<int> rest;
    for (int j = 0; j < d; ++j)
        if (!kept[j]) rest.push_back(j);

    const int nk = static_cast<int>(keep.size());
    const int nr = static_cast<int>(rest.size());
    Eigen::MatrixXd Mkk(nk, nk), Mkr(nk, nr), Mrr(nr, nr);
    for (int a = 0; a < nk; ++a) {
        for (int b = 0; b < nk; ++b) Mkk(a, b) = M(keep[a], keep[b]);
        for (int b = 0; b < nr; ++b) Mkr(a, b) = M(keep[a], rest[b]);
    }
    for (int a = 0; a < nr; ++a)
        for (int b = 0; b < nr; ++b) Mrr(a, b) = M(rest[a], rest[b]);

    if (nr == 0) return Mkk;

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Mrr);
    const Eigen::VectorXd& ev = es.eigenvalues();
    const double max_diag = Mrr.diagonal().cwiseAbs().maxCoeff();
    if (!(ev.cwiseAbs().minCoeff() > rel_threshold * std::max(max_diag, 1e-300))) {
        throw SingularInformation("schur_complement: nuisance block is numerically singular",
                                  ev.minCoeff(), ev.maxCoeff());
    }
    Eigen::MatrixXd tmp = es.eigenvectors().transpose() * Mkr.transpose();
    tmp.array().colwise() /= ev.array();
    const Eigen::MatrixXd MrrInvMrk = es.eigenvectors() * tmp;
    Eigen::MatrixXd S = Mkk - Mkr * MrrInvMrk;
    S = 0.5 * (S + S.transpose()).eval();
    return S;
}

std::vector<std::pair<double, Eigen::VectorXd>> detect_critical_numeric(
    const Eigen::MatrixXd& info, double rel_threshold) {
    check_symmetric(info, "detect_critical_numeric");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(info);
    const Eigen::VectorXd& ev = es.eigenvalues();
    const double max_eig = ev.cwiseAbs().maxCoeff();
    std::vector<std::pair<double, Eigen::VectorXd>> out;
    for (int j = 0; j < ev.size(); ++j) {
        if (ev[j] <= rel_threshold * max_eig) out.emplace_back(ev[j], es.eigenvectors().col(j));
    }
    std::sort(out.begin(), out.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    return out;
}

}  // namespace critscore
