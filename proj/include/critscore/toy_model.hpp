#pragma once

#include <Eigen/Core>
#include <cstdint>

#include "critscore/score_model.hpp"

namespace critscore {

/// Balanced random-intercept data: n groups of r unit-variance responses,
/// marginally N(0, theta^2 1 1^T + I) per group.
struct ToyData {
    Eigen::MatrixXd y;  // n x r, one row per group

    int n() const { return static_cast<int>(y.rows()); }
    int r() const { return static_cast<int>(y.cols()); }
};

/// Exact log-likelihood, including the -(nr/2) log(2 pi) constant.
double toy_loglik(double theta, const ToyData& data);

/// Score in theta, summed over groups; identically zero at theta = 0.
double toy_score(double theta, const ToyData& data);

/// The theta = 0 modified score: sum over groups of the second derivative of
/// the group log-likelihood at zero, sum_i {-r + (y_i^T 1)^2}.
double toy_modified_score(const ToyData& data);

/// Closed-form statistic, defined for all theta >= 0 including the boundary.
double toy_statistic_closed_form(double theta, const ToyData& data);

/// Simulate Y_ij = theta W_i + E_ij with independent standard normal W and E.
/// One derived stream per group, so results do not depend on evaluation
/// order.
ToyData toy_simulate(double theta, int n, int r, std::uint64_t seed);

/// ScoreModel over ToyData; the single parameter is a scale (d1 = 1).
class ToyScoreModel final : public ScoreModel {
public:
    explicit ToyScoreModel(ToyData data) : data_(std::move(data)) {}

    ParameterLayout layout() const override { return {1, 0, false}; }
    int group_count() const override { return data_.n(); }
    double loglik(const ParameterPoint& theta) const override;
    Eigen::VectorXd modified_score_term(const ParameterPoint& theta,
                                        const CriticalPattern& pattern, int group) const override;
    Eigen::MatrixXd modified_info(const ParameterPoint& theta,
                                  const CriticalPattern& pattern) const override;

    const ToyData& data() const { return data_; }

private:
    ToyData data_;
};

}  // namespace critscore
