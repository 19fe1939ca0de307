#pragma once

#include <cstdint>
#include <vector>

#include "critscore/score_model.hpp"

namespace critscore {

/// Knobs shared by the test-statistic operations.
struct InferenceOptions {
    double zero_tol = 0.0;            // pattern switch threshold on lambda_j
    double pd_rel_threshold = 1e-12;  // PD check pivot floor, relative to max diagonal
    // Flag sub-vector results when the largest singular value of the
    // nuisance cross block exceeds this fraction of the smallest
    // interest-block eigenvalue.
    double nuisance_coupling_fraction = 0.1;
};

/// Full-vector modified score statistic at theta, with df = dim(theta).
/// Equals the classical score statistic standardized by expected information
/// wherever no k_j = 2 entry is active.
TestResult modified_statistic(const ScoreModel& model, const ParameterPoint& theta,
                              const InferenceOptions& opts = {});

/// Sub-vector statistic for the given interest indices; the remaining
/// entries of theta are treated as fixed plug-ins and the modified score for
/// the interest block is standardized by the efficient information (Schur
/// complement). df = |interest|.
TestResult subvector_statistic(const ScoreModel& model, const ParameterPoint& theta,
                               const std::vector<int>& interest,
                               const InferenceOptions& opts = {});

/// Evaluation lattice over interest parameters with per-point statistics and
/// per-level membership masks.
struct RegionGrid {
    std::vector<int> interest;                    // flat indices, one per axis
    std::vector<std::vector<double>> axes;        // sorted evaluation points
    std::vector<double> statistic;                // row-major over axes
    std::vector<std::uint8_t> singular;           // per-point PD-check failure flag
    std::vector<double> levels;
    std::vector<std::vector<std::uint8_t>> membership;  // [level][point]
    int df = 0;

    std::size_t size() const { return statistic.size(); }
    std::size_t index(const std::vector<int>& multi) const;
    std::vector<int> multi_index(std::size_t flat) const;
};

/// Invert the sub-vector test over a lattice. Points where the information
/// fails the PD check are flagged, not fatal. Boundary points (lambda_j = 0)
/// evaluate through the k_j = 2 branch automatically.
RegionGrid invert_region(const ScoreModel& model, const ParameterPoint& nuisance_values,
                         const std::vector<int>& interest,
                         const std::vector<std::vector<double>>& grid_axes,
                         const std::vector<double>& levels, const InferenceOptions& opts = {});

struct IntervalResult {
    double lo = 0.0;
    double hi = 0.0;
    bool disconnected = false;  // accepted scan set was not a single run
    int n_accepted = 0;
};

/// Componentwise confidence interval for one flat parameter index by a
/// coarse scan over [scan_lo, scan_hi] followed by bisection of every
/// acceptance crossing down to refine_tol. Returns the hull of the accepted
/// set and flags when that set is not an interval; no convexity assumed.
/// Throws EmptyRegion when no scan point is accepted.
IntervalResult componentwise_interval(const ScoreModel& model, const ParameterPoint& base,
                                      int index, double level, double scan_lo, double scan_hi,
                                      int scan_steps = 50, double refine_tol = 1e-6,
                                      const InferenceOptions& opts = {});

}  // namespace critscore
