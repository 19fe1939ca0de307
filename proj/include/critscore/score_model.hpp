#pragma once

#include <Eigen/Core>

#include "critscore/parameter.hpp"

namespace critscore {

/// Modified score for a dataset at a parameter point: the summed per-group
/// contributions and the expected covariance matrix of that sum.
struct ModifiedScore {
    Eigen::VectorXd value;
    Eigen::MatrixXd info;
    int n_groups = 0;
};

/// Outcome of a score-type test evaluation.
struct TestResult {
    double statistic = 0.0;
    int df = 0;
    double p_value = 1.0;
    CriticalPattern pattern;
    double condition_number = 1.0;  // of the matrix actually inverted
    // Sub-vector inference only: set when the nuisance cross block is large
    // relative to the interest block (no supporting theory in that regime).
    bool nuisance_coupling_flagged = false;
    double nuisance_coupling = 0.0;
};

/// Contract each model implements for the generic machinery. For a group i
/// the contribution is the d-vector whose j-th entry is the k_j-th partial
/// derivative of that group's log-likelihood along direction j, in the
/// scale-cancelled form where one exists (the two agree after covariance
/// standardization). modified_info is the expected covariance of the summed
/// contributions under theta.
class ScoreModel {
public:
    virtual ~ScoreModel() = default;

    virtual ParameterLayout layout() const = 0;
    virtual int group_count() const = 0;

    virtual double loglik(const ParameterPoint& theta) const = 0;
    virtual Eigen::VectorXd modified_score_term(const ParameterPoint& theta,
                                                const CriticalPattern& pattern,
                                                int group) const = 0;
    virtual Eigen::MatrixXd modified_info(const ParameterPoint& theta,
                                          const CriticalPattern& pattern) const = 0;

    /// Summed contributions plus their expected covariance.
    ModifiedScore modified_score(const ParameterPoint& theta,
                                 const CriticalPattern& pattern) const;
};

}  // namespace critscore
