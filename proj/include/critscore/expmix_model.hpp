#pragma once

#include <Eigen/Core>
#include <cstdint>

#include "critscore/score_model.hpp"

namespace critscore {

/// Pairs of positive responses, conditionally independent exponentials with
/// rate psi + lambda*W given a uniform random effect W on (-sqrt3, sqrt3).
struct ExpMixData {
    Eigen::MatrixXd y;  // n x 2, all entries > 0

    int n() const { return static_cast<int>(y.rows()); }
    double row_sum(int i) const { return y(i, 0) + y(i, 1); }
};

struct ExpMixTheta {
    double lambda = 0.0;
    double psi = 1.0;
};

/// Domain check: lambda >= 0 and psi > sqrt(3) * lambda.
void expmix_validate(const ExpMixTheta& theta);

/// Marginal log-likelihood, exact closed form through the antiderivative
/// G(t) = e^{-t}(t^2 + 2t + 2); series-guarded against cancellation near the
/// critical line. Equals 2 log psi - psi * sum(y) per observation at
/// lambda = 0.
double expmix_loglik(const ExpMixTheta& theta, const ExpMixData& data);

/// Same quantity through 64-node Gauss-Legendre marginalization over the
/// random effect; retained as the generic path for cross-checks.
double expmix_loglik_quadrature(const ExpMixTheta& theta, const ExpMixData& data);

/// Score (s_lambda, s_psi) summed over observations. s_lambda is identically
/// zero on the critical line lambda = 0.
Eigen::Vector2d expmix_score(const ExpMixTheta& theta, const ExpMixData& data);

/// Score by quadrature (derivative under the integral), for cross-checks.
Eigen::Vector2d expmix_score_quadrature(const ExpMixTheta& theta, const ExpMixData& data);

/// Modified score under the given pattern: on the critical line the lambda
/// entry is the second lambda-derivative of the log-likelihood, elsewhere the
/// plain score.
Eigen::Vector2d expmix_modified_score(const ExpMixTheta& theta, const ExpMixData& data,
                                      const CriticalPattern& pattern);

/// Expected covariance of the modified score for n observations. Closed
/// form from Gamma(2, psi) central moments at lambda = 0; Gauss-Legendre
/// expectation integrals off the line.
Eigen::Matrix2d expmix_modified_info(const ExpMixTheta& theta, int n);

ExpMixData expmix_simulate(const ExpMixTheta& theta, int n, std::uint64_t seed);

/// Scale-cancelled per-observation contribution (s_lambda / lambda, s_psi),
/// continuous across lambda = 0 where the first entry becomes the second
/// derivative of the log-likelihood.
Eigen::Vector2d expmix_cancelled_term(const ExpMixTheta& theta, double y_sum);

/// ScoreModel over ExpMixData; layout is one scale and one free parameter.
class ExpMixScoreModel final : public ScoreModel {
public:
    explicit ExpMixScoreModel(ExpMixData data) : data_(std::move(data)) {}

    ParameterLayout layout() const override { return {1, 1, false}; }
    int group_count() const override { return data_.n(); }
    double loglik(const ParameterPoint& theta) const override;
    Eigen::VectorXd modified_score_term(const ParameterPoint& theta,
                                        const CriticalPattern& pattern, int group) const override;
    Eigen::MatrixXd modified_info(const ParameterPoint& theta,
                                  const CriticalPattern& pattern) const override;

    const ExpMixData& data() const { return data_; }

private:
    static ExpMixTheta unpack(const ParameterPoint& theta);
    ExpMixData data_;
};

}  // namespace critscore
