#include "critscore/lmm_model.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <limits>

#include "critscore/errors.hpp"
#include "critscore/inference.hpp"
#include "critscore/nelder_mead.hpp"
#include "critscore/rng.hpp"

namespace critscore {

namespace {

constexpr double kLog2Pi = 1.8378770664093453;

Eigen::MatrixXd sigma_fast(const Eigen::VectorXd& lambda, double sigma, const Eigen::MatrixXd& Z,
                           const std::vector<int>& scale_map) {
    const int r = static_cast<int>(Z.rows());
    Eigen::MatrixXd Zs = Z;
    for (int k = 0; k < Z.cols(); ++k) Zs.col(k) *= lambda[scale_map[k]];
    Eigen::MatrixXd S = (sigma * sigma) * Eigen::MatrixXd::Identity(r, r);
    S.selfadjointView<Eigen::Lower>().rankUpdate(Zs);
    return Eigen::MatrixXd(S.selfadjointView<Eigen::Lower>());
}

struct GroupWork {
    Eigen::MatrixXd A;   // Sigma^{-1}
    Eigen::MatrixXd G;   // Z' A Z
    Eigen::MatrixXd M;   // A Z
    Eigen::VectorXd eps;
    Eigen::VectorXd Aeps;
    Eigen::VectorXd u;  // Z' A eps
};

GroupWork group_work(const Group& g, const Eigen::VectorXd& lambda, double sigma,
                     const Eigen::VectorXd& psi, const std::vector<int>& scale_map) {
    GroupWork w;
    const Eigen::MatrixXd S = sigma_fast(lambda, sigma, g.Z, scale_map);
    Eigen::LLT<Eigen::MatrixXd> llt(S);
    if (llt.info() != Eigen::Success)
        throw Error("lmm: covariance factorization failed (sigma too small?)");
    w.A = llt.solve(Eigen::MatrixXd::Identity(S.rows(), S.cols()));
    w.M = w.A * g.Z;
    w.G = g.Z.transpose() * w.M;
    w.eps = psi.size() > 0 ? (g.y - g.X * psi).eval() : g.y;
    w.Aeps = w.A * w.eps;
    w.u = g.Z.transpose() * w.Aeps;
    return w;
}

}  // namespace

Eigen::MatrixXd build_sigma(const Eigen::VectorXd& lambda, double sigma, const Eigen::MatrixXd& Z,
                            const std::vector<int>& scale_map,
                            std::vector<Eigen::MatrixXd>* h_out) {
    if (!(sigma > 0.0)) throw std::domain_error("build_sigma: sigma must be > 0");
    if (static_cast<int>(scale_map.size()) != Z.cols())
        throw Error("build_sigma: scale_map must assign every Z column");
    if (h_out) {
        const int d1 = static_cast<int>(lambda.size());
        const int r = static_cast<int>(Z.rows());
        h_out->assign(d1, Eigen::MatrixXd::Zero(r, r));
        for (int k = 0; k < Z.cols(); ++k)
            (*h_out)[scale_map[k]] += Z.col(k) * Z.col(k).transpose();
    }
    return sigma_fast(lambda, sigma, Z, scale_map);
}

Eigen::MatrixXd InfoBlocks::full() const {
    const int dls = static_cast<int>(lambda_block.rows());
    const int d2 = static_cast<int>(psi_block.rows());
    const bool has_sigma = includes_error_scale;
    const int d1 = dls - (has_sigma ? 1 : 0);
    const int d = dls + d2;
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(d, d);
    // Flat order (lambda, psi, sigma); the sigma row of lambda_block goes last.
    auto pos = [&](int a) { return a < d1 ? a : d1 + d2; };
    for (int a = 0; a < dls; ++a)
        for (int b = 0; b < dls; ++b) out(pos(a), pos(b)) = lambda_block(a, b);
    out.block(d1, d1, d2, d2) = psi_block;
    return out;
}

LmmModel::LmmModel(GroupedDataset data, double known_sigma)
    : data_(std::move(data)), known_sigma_(known_sigma) {
    if (!(known_sigma > 0.0)) throw std::domain_error("lmm: known sigma must be > 0");
    data_.validate();
    d1_ = data_.n_scales();
    d2_ = data_.n_fixed();
    q_ = data_.n_random();
}

LmmModel::LmmModel(GroupedDataset data) : data_(std::move(data)) {
    data_.validate();
    d1_ = data_.n_scales();
    d2_ = data_.n_fixed();
    q_ = data_.n_random();
}

ParameterLayout LmmModel::layout() const { return {d1_, d2_, !known_sigma_.has_value()}; }

double LmmModel::sigma_at(const ParameterPoint& theta) const {
    if (known_sigma_) return *known_sigma_;
    if (!theta.sigma) throw Error("lmm: theta.sigma required in unknown-sigma mode");
    return *theta.sigma;
}

double LmmModel::loglik(const ParameterPoint& theta) const {
    theta.validate();
    const double sigma = sigma_at(theta);
    double ll = 0.0;
    for (const auto& g : data_.groups) {
        const Eigen::MatrixXd S = sigma_fast(theta.lambda, sigma, g.Z, data_.scale_map);
        Eigen::LLT<Eigen::MatrixXd> llt(S);
        if (llt.info() != Eigen::Success) throw Error("lmm: covariance factorization failed");
        const Eigen::VectorXd eps = d2_ > 0 ? (g.y - g.X * theta.psi).eval() : g.y;
        double logdet = 0.0;
        for (int i = 0; i < S.rows(); ++i) logdet += std::log(llt.matrixL()(i, i));
        logdet *= 2.0;
        ll += -0.5 * (g.y.size() * kLog2Pi + logdet + eps.dot(llt.solve(eps)));
    }
    return ll;
}

Eigen::VectorXd LmmModel::modified_score_term(const ParameterPoint& theta, const CriticalPattern&,
                                              int group) const {
    const double sigma = sigma_at(theta);
    const auto& g = data_.groups[group];
    const GroupWork w = group_work(g, theta.lambda, sigma, theta.psi, data_.scale_map);
    const auto lay = layout();
    Eigen::VectorXd out = Eigen::VectorXd::Zero(lay.dim());
    // xi_j: quadratic form minus trace, equal to s_lambda_j / lambda_j off
    // the boundary and to the second lambda_j-derivative on it.
    for (int k = 0; k < q_; ++k) {
        const int j = data_.scale_map[k];
        out[j] += w.u[k] * w.u[k] - w.G(k, k);
    }
    if (d2_ > 0) out.segment(d1_, d2_) = g.X.transpose() * w.Aeps;
    if (!known_sigma_)
        out[lay.dim() - 1] = sigma * (w.Aeps.squaredNorm() - w.A.trace());
    return out;
}

InfoBlocks LmmModel::modified_info_blocks(const ParameterPoint& theta) const {
    theta.validate();
    const double sigma = sigma_at(theta);
    const bool with_sigma = !known_sigma_.has_value();
    const int dls = d1_ + (with_sigma ? 1 : 0);
    InfoBlocks blocks;
    blocks.includes_error_scale = with_sigma;
    blocks.lambda_block = Eigen::MatrixXd::Zero(dls, dls);
    blocks.psi_block = Eigen::MatrixXd::Zero(d2_, d2_);
    const Eigen::VectorXd psi_zero = Eigen::VectorXd::Zero(d2_);
    for (const auto& g : data_.groups) {
        const GroupWork w = group_work(g, theta.lambda, sigma, psi_zero, data_.scale_map);
        for (int k = 0; k < q_; ++k) {
            const int j = data_.scale_map[k];
            for (int k2 = 0; k2 < q_; ++k2)
                blocks.lambda_block(j, data_.scale_map[k2]) += 2.0 * w.G(k, k2) * w.G(k, k2);
        }
        if (d2_ > 0) blocks.psi_block += g.X.transpose() * (w.A * g.X);
        if (with_sigma) {
            const Eigen::MatrixXd MtM = w.M.transpose() * w.M;  // Z' A^2 Z
            for (int k = 0; k < q_; ++k) {
                const int j = data_.scale_map[k];
                blocks.lambda_block(j, d1_) += 2.0 * sigma * MtM(k, k);
            }
            blocks.lambda_block(d1_, d1_) += 2.0 * sigma * sigma * w.A.squaredNorm();
        }
    }
    if (with_sigma)
        blocks.lambda_block.col(d1_).head(d1_) = blocks.lambda_block.row(d1_).head(d1_).transpose();
    return blocks;
}

Eigen::MatrixXd LmmModel::modified_info(const ParameterPoint& theta,
                                        const CriticalPattern&) const {
    return modified_info_blocks(theta).full();
}

Eigen::VectorXd LmmModel::score(const ParameterPoint& theta) const {
    theta.validate();
    const auto lay = layout();
    const CriticalPattern pat = critical_pattern(theta, 0.0);
    Eigen::VectorXd s = Eigen::VectorXd::Zero(lay.dim());
    for (int i = 0; i < group_count(); ++i) s += modified_score_term(theta, pat, i);
    for (int j = 0; j < d1_; ++j) s[j] *= theta.lambda[j];
    return s;
}

Eigen::VectorXd LmmModel::xi(const ParameterPoint& theta) const {
    theta.validate();
    const auto lay = layout();
    const CriticalPattern pat = critical_pattern(theta, 0.0);
    Eigen::VectorXd full = Eigen::VectorXd::Zero(lay.dim());
    for (int i = 0; i < group_count(); ++i) full += modified_score_term(theta, pat, i);
    const bool with_sigma = !known_sigma_.has_value();
    Eigen::VectorXd out(d1_ + (with_sigma ? 1 : 0));
    out.head(d1_) = full.head(d1_);
    if (with_sigma) out[d1_] = full[lay.dim() - 1];
    return out;
}

TestResult LmmModel::statistic_lambda(const Eigen::VectorXd& lambda,
                                      const Eigen::VectorXd& psi_hat,
                                      std::optional<double> sigma) const {
    ParameterPoint theta(lambda, psi_hat);
    if (!known_sigma_) {
        if (!sigma) throw Error("statistic_lambda: sigma plug-in required in unknown-sigma mode");
        theta.sigma = *sigma;
    }
    std::vector<int> interest(d1_);
    for (int j = 0; j < d1_; ++j) interest[j] = j;
    return subvector_statistic(*this, theta, interest);
}

namespace {

Eigen::VectorXd solve_normal_equations(const Eigen::MatrixXd& XtX, const Eigen::VectorXd& Xty) {
    if (XtX.rows() == 0) return Eigen::VectorXd(0);
    Eigen::FullPivLU<Eigen::MatrixXd> lu(XtX);
    lu.setThreshold(1e-10);
    if (lu.rank() < XtX.rows())
        throw RankDeficientDesign("design matrix is numerically rank deficient");
    return lu.solve(Xty);
}

}  // namespace

Eigen::VectorXd LmmModel::ols() const {
    Eigen::MatrixXd XtX = Eigen::MatrixXd::Zero(d2_, d2_);
    Eigen::VectorXd Xty = Eigen::VectorXd::Zero(d2_);
    for (const auto& g : data_.groups) {
        XtX += g.X.transpose() * g.X;
        Xty += g.X.transpose() * g.y;
    }
    return solve_normal_equations(XtX, Xty);
}

Eigen::VectorXd LmmModel::gls(const Eigen::VectorXd& lambda, double sigma) const {
    Eigen::MatrixXd XtSX = Eigen::MatrixXd::Zero(d2_, d2_);
    Eigen::VectorXd XtSy = Eigen::VectorXd::Zero(d2_);
    for (const auto& g : data_.groups) {
        const Eigen::MatrixXd S = sigma_fast(lambda, sigma, g.Z, data_.scale_map);
        Eigen::LLT<Eigen::MatrixXd> llt(S);
        if (llt.info() != Eigen::Success) throw Error("lmm: covariance factorization failed");
        const Eigen::MatrixXd SiX = llt.solve(g.X);
        XtSX += g.X.transpose() * SiX;
        XtSy += SiX.transpose() * g.y;
    }
    return solve_normal_equations(XtSX, XtSy);
}

double LmmModel::profiled_loglik(const Eigen::VectorXd& lambda, double sigma) const {
    double logdet_total = 0.0, yy = 0.0;
    long total_rows = 0;
    Eigen::MatrixXd XtSX = Eigen::MatrixXd::Zero(d2_, d2_);
    Eigen::VectorXd XtSy = Eigen::VectorXd::Zero(d2_);
    for (const auto& g : data_.groups) {
        const Eigen::MatrixXd S = sigma_fast(lambda, sigma, g.Z, data_.scale_map);
        Eigen::LLT<Eigen::MatrixXd> llt(S);
        if (llt.info() != Eigen::Success) throw Error("lmm: covariance factorization failed");
        for (int i = 0; i < S.rows(); ++i) logdet_total += 2.0 * std::log(llt.matrixL()(i, i));
        const Eigen::VectorXd Siy = llt.solve(g.y);
        yy += g.y.dot(Siy);
        if (d2_ > 0) {
            const Eigen::MatrixXd SiX = llt.solve(g.X);
            XtSX += g.X.transpose() * SiX;
            XtSy += g.X.transpose() * Siy;
        }
        total_rows += g.y.size();
    }
    double quad = yy;
    if (d2_ > 0) {
        const Eigen::VectorXd psi = solve_normal_equations(XtSX, XtSy);
        quad = yy - 2.0 * psi.dot(XtSy) + psi.dot(XtSX * psi);
    }
    return -0.5 * (total_rows * kLog2Pi + logdet_total + quad);
}

LmmFit LmmModel::mle(const MleConfig& config) const {
    const bool with_sigma = !known_sigma_.has_value();
    const int p = d1_ + (with_sigma ? 1 : 0);

    // Residual moment starting values from the OLS fit.
    const Eigen::VectorXd psi0 = d2_ > 0 ? ols() : Eigen::VectorXd(0);
    double rss = 0.0;
    long total_rows = 0;
    Eigen::VectorXd htr = Eigen::VectorXd::Zero(d1_);
    for (const auto& g : data_.groups) {
        const Eigen::VectorXd eps = d2_ > 0 ? (g.y - g.X * psi0).eval() : g.y;
        rss += eps.squaredNorm();
        total_rows += g.y.size();
        for (int k = 0; k < q_; ++k) htr[data_.scale_map[k]] += g.Z.col(k).squaredNorm();
    }
    const double vbar = rss / total_rows;
    const double sigma0 = with_sigma ? std::sqrt(std::max(vbar / 2.0, 1e-8)) : *known_sigma_;
    const double excess = std::max(vbar - sigma0 * sigma0, 0.0);
    Eigen::VectorXd lambda0(d1_);
    for (int j = 0; j < d1_; ++j) {
        const double hbar = htr[j] / total_rows;
        lambda0[j] = hbar > 1e-12 ? std::sqrt(excess / (d1_ * hbar)) : 0.0;
    }

    auto objective = [&](const Eigen::VectorXd& v) {
        const Eigen::VectorXd lam = v.head(d1_).cwiseMax(0.0);
        const double sig = with_sigma ? std::exp(v[d1_]) : *known_sigma_;
        return -profiled_loglik(lam, sig);
    };

    std::vector<Eigen::VectorXd> starts;
    {
        Eigen::VectorXd s(p);
        s.head(d1_) = lambda0;
        if (with_sigma) s[d1_] = std::log(sigma0);
        starts.push_back(s);
        s.head(d1_) = 0.5 * lambda0;
        starts.push_back(s);
        s.head(d1_).setZero();
        if (with_sigma) s[d1_] = 0.5 * std::log(std::max(vbar, 1e-8));
        starts.push_back(s);
    }

    LmmFit fit;
    Eigen::VectorXd best_v;
    double best_f = std::numeric_limits<double>::infinity();
    for (const auto& s : starts) {
        Eigen::VectorXd step(p);
        for (int j = 0; j < d1_; ++j) step[j] = std::max(0.05, 0.3 * std::fabs(s[j]));
        if (with_sigma) step[d1_] = 0.2;
        const NelderMeadResult nm =
            nelder_mead(objective, s, step, config.max_iter * p, config.f_tol, config.x_tol);
        fit.evaluations += nm.evaluations;
        if (nm.f < best_f) {
            best_f = nm.f;
            best_v = nm.x;
        }
    }

    Eigen::VectorXd lambda_hat = best_v.head(d1_).cwiseMax(0.0);
    double sigma_hat = with_sigma ? std::exp(best_v[d1_]) : *known_sigma_;

    // Boundary polish: treat sub-tolerance differences as ties and prefer the
    // boundary, so estimates that belong at zero land exactly on it.
    for (int j = 0; j < d1_; ++j) {
        if (lambda_hat[j] == 0.0) continue;
        Eigen::VectorXd trial = lambda_hat;
        trial[j] = 0.0;
        const double f0 = -profiled_loglik(trial, sigma_hat);
        if (f0 <= best_f + 1e-9 * (1.0 + std::fabs(best_f))) {
            lambda_hat = trial;
            best_f = std::min(best_f, f0);
        }
    }

    fit.theta.lambda = lambda_hat;
    fit.theta.psi = d2_ > 0 ? gls(lambda_hat, sigma_hat) : Eigen::VectorXd(0);
    if (with_sigma) fit.theta.sigma = sigma_hat;
    fit.loglik = profiled_loglik(lambda_hat, sigma_hat);

    // Convergence check: projected gradient of the profiled objective, which
    // by the envelope theorem is the score at (lambda_hat, psi_gls).
    const Eigen::VectorXd s = score(fit.theta);
    double pg = 0.0;
    for (int j = 0; j < d1_; ++j) {
        const double gj = s[j];
        pg = std::max(pg, lambda_hat[j] > 0.0 ? std::fabs(gj) : std::max(gj, 0.0));
    }
    if (with_sigma) pg = std::max(pg, std::fabs(sigma_hat * s[layout().dim() - 1]));
    fit.converged = pg <= config.grad_tol * (1.0 + std::fabs(fit.loglik));
    return fit;
}

WaldResult LmmModel::wald(const Eigen::VectorXd& lambda0, const LmmFit& fit) const {
    WaldResult out;
    const InfoBlocks blocks = modified_info_blocks(fit.theta);
    const Eigen::MatrixXd C = blocks.lambda_block.topLeftCorner(d1_, d1_);
    std::vector<int> keep;
    for (int j = 0; j < d1_; ++j) {
        if (fit.theta.lambda[j] > 0.0) {
            keep.push_back(j);
        } else {
            out.degenerate = true;
            out.dropped.push_back(j);
        }
    }
    out.df = static_cast<int>(keep.size());
    if (keep.empty()) return out;  // statistic 0 on an empty block
    Eigen::VectorXd diff(out.df);
    Eigen::MatrixXd info(out.df, out.df);
    for (int a = 0; a < out.df; ++a) {
        const int j = keep[a];
        diff[a] = fit.theta.lambda[j] - lambda0[j];
        for (int b = 0; b < out.df; ++b) {
            const int l = keep[b];
            info(a, b) = fit.theta.lambda[j] * C(j, l) * fit.theta.lambda[l];
        }
    }
    out.statistic = diff.dot(info * diff);
    return out;
}

double LmmModel::lrt(const Eigen::VectorXd& lambda0, const LmmFit& fit) const {
    double ll0;
    if (known_sigma_) {
        ll0 = profiled_loglik(lambda0, *known_sigma_);
    } else {
        const double t0 = std::log(*fit.theta.sigma);
        auto obj = [&](const Eigen::VectorXd& v) { return -profiled_loglik(lambda0, std::exp(v[0])); };
        Eigen::VectorXd x0(1), step(1);
        x0[0] = t0;
        step[0] = 0.2;
        ll0 = -nelder_mead(obj, x0, step, 400).f;
    }
    return 2.0 * (fit.loglik - ll0);
}

GroupedDataset lmm_simulate_responses(const GroupedDataset& designs, const ParameterPoint& theta,
                                      double sigma, std::uint64_t seed) {
    GroupedDataset out = designs;
    const int q = out.n_random();
    for (int i = 0; i < out.n_groups(); ++i) {
        auto& g = out.groups[i];
        RngStream rng(seed, static_cast<std::uint64_t>(i));
        Eigen::VectorXd scaled_w(q);
        for (int k = 0; k < q; ++k)
            scaled_w[k] = theta.lambda[out.scale_map[k]] * rng.normal();
        Eigen::VectorXd mean = g.Z * scaled_w;
        if (g.X.cols() > 0) mean += g.X * theta.psi;
        g.y = mean;
        for (int t = 0; t < g.y.size(); ++t) g.y[t] += sigma * rng.normal();
    }
    return out;
}

}  // namespace critscore
