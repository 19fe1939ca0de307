#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <vector>

#include "critscore/dataset.hpp"
#include "critscore/score_model.hpp"

namespace critscore {

/// Marginal covariance sigma^2 I + sum_j lambda_j^2 H_j for one group, where
/// H_j collects the outer products of the Z columns assigned to scale j.
/// When h_out is non-null the H_j factors are written to it.
Eigen::MatrixXd build_sigma(const Eigen::VectorXd& lambda, double sigma, const Eigen::MatrixXd& Z,
                            const std::vector<int>& scale_map,
                            std::vector<Eigen::MatrixXd>* h_out = nullptr);

/// Expected-information blocks of the scale-cancelled modified score. Cross
/// blocks between the free-parameter block and the rest are identically zero.
struct InfoBlocks {
    Eigen::MatrixXd lambda_block;  // d1 (+1 with unknown sigma) square
    Eigen::MatrixXd psi_block;     // d2 square
    bool includes_error_scale = false;

    /// Assembled full matrix in flat order (lambda, psi[, sigma]).
    Eigen::MatrixXd full() const;
};

struct MleConfig {
    int max_iter = 400;
    double f_tol = 1e-11;
    double x_tol = 1e-9;
    double grad_tol = 1e-6;  // relative projected-gradient criterion
};

struct LmmFit {
    ParameterPoint theta;  // psi profiled by GLS at the optimum
    double loglik = 0.0;
    bool converged = false;
    int evaluations = 0;
};

struct WaldResult {
    double statistic = 0.0;
    int df = 0;
    // Scale estimates on the boundary zero their information row; the
    // statistic is then computed on the nonzero sub-block with reduced df.
    bool degenerate = false;
    std::vector<int> dropped;  // lambda indices excluded by the boundary
};

/// General linear mixed model with per-group designs and a diagonal scale
/// matrix. Known-sigma mode pins the error scale; unknown-sigma mode appends
/// it to the parameter vector (it is never critical since sigma > 0).
class LmmModel final : public ScoreModel {
public:
    LmmModel(GroupedDataset data, double known_sigma);
    explicit LmmModel(GroupedDataset data);  // unknown sigma

    ParameterLayout layout() const override;
    int group_count() const override { return data_.n_groups(); }
    double loglik(const ParameterPoint& theta) const override;
    Eigen::VectorXd modified_score_term(const ParameterPoint& theta,
                                        const CriticalPattern& pattern, int group) const override;
    Eigen::MatrixXd modified_info(const ParameterPoint& theta,
                                  const CriticalPattern& pattern) const override;

    /// Raw score (lambda entries are lambda_j * xi_j) in flat order.
    Eigen::VectorXd score(const ParameterPoint& theta) const;

    /// Scale-cancelled first-order quantities: xi_j totals, plus the sigma
    /// score as the last entry in unknown-sigma mode.
    Eigen::VectorXd xi(const ParameterPoint& theta) const;

    InfoBlocks modified_info_blocks(const ParameterPoint& theta) const;

    /// T^lambda: the sub-vector statistic for the scale block with psi fixed
    /// at a plug-in estimate, df = d1. Built from xi and its covariance, so it
    /// is defined on the boundary without any switching.
    TestResult statistic_lambda(const Eigen::VectorXd& lambda, const Eigen::VectorXd& psi_hat,
                                std::optional<double> sigma = std::nullopt) const;

    Eigen::VectorXd ols() const;
    Eigen::VectorXd gls(const Eigen::VectorXd& lambda, double sigma) const;

    /// Log-likelihood with psi profiled out by GLS at fixed (lambda, sigma).
    double profiled_loglik(const Eigen::VectorXd& lambda, double sigma) const;

    /// Nelder-Mead over (lambda[, log sigma]) with psi profiled by GLS;
    /// lambda evaluated at its clamp to [0, inf). Multistart from a residual
    /// moment estimate, half of it, and the boundary.
    LmmFit mle(const MleConfig& config = {}) const;

    WaldResult wald(const Eigen::VectorXd& lambda0, const LmmFit& fit) const;
    double lrt(const Eigen::VectorXd& lambda0, const LmmFit& fit) const;

    const GroupedDataset& data() const { return data_; }
    bool sigma_known() const { return known_sigma_.has_value(); }
    double known_sigma() const { return *known_sigma_; }

    /// sigma to use when evaluating at theta (pinned value or theta.sigma).
    double sigma_at(const ParameterPoint& theta) const;

private:
    GroupedDataset data_;
    std::optional<double> known_sigma_;
    int d1_, d2_, q_;
};

/// Fresh responses simulated under theta on the dataset's designs, one
/// derived stream per group.
GroupedDataset lmm_simulate_responses(const GroupedDataset& designs, const ParameterPoint& theta,
                                      double sigma, std::uint64_t seed);

}  // namespace critscore
