#include "critscore/inference.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>

#include "critscore/chi_square.hpp"
#include "critscore/errors.hpp"
#include "critscore/linalg.hpp"

namespace critscore {

ModifiedScore ScoreModel::modified_score(const ParameterPoint& theta,
                                         const CriticalPattern& pattern) const {
    ModifiedScore ms;
    ms.n_groups = group_count();
    ms.value = Eigen::VectorXd::Zero(layout().dim());
    for (int i = 0; i < ms.n_groups; ++i) ms.value += modified_score_term(theta, pattern, i);
    ms.info = modified_info(theta, pattern);
    return ms;
}

namespace {

TestResult standardize(const Eigen::VectorXd& s, const Eigen::MatrixXd& info,
                       const CriticalPattern& pattern, const InferenceOptions& opts) {
    const SpdSolve sol = spd_solve(info, s, opts.pd_rel_threshold);
    TestResult r;
    r.statistic = s.dot(sol.x);
    if (r.statistic < 0.0 && r.statistic > -1e-12) r.statistic = 0.0;
    r.df = static_cast<int>(s.size());
    r.p_value = 1.0 - chisq_cdf(r.df, std::max(r.statistic, 0.0));
    r.pattern = pattern;
    r.condition_number = sol.condition_number;
    return r;
}

}  // namespace

TestResult modified_statistic(const ScoreModel& model, const ParameterPoint& theta,
                              const InferenceOptions& opts) {
    theta.validate();
    if (model.group_count() < 1) throw Error("modified_statistic: dataset is empty");
    const CriticalPattern pattern = critical_pattern(theta, opts.zero_tol);
    const ModifiedScore ms = model.modified_score(theta, pattern);
    return standardize(ms.value, ms.info, pattern, opts);
}

TestResult subvector_statistic(const ScoreModel& model, const ParameterPoint& theta,
                               const std::vector<int>& interest, const InferenceOptions& opts) {
    theta.validate();
    if (interest.empty()) throw Error("subvector_statistic: interest set is empty");
    const int d = model.layout().dim();
    const CriticalPattern pattern = critical_pattern(theta, opts.zero_tol);
    const ModifiedScore ms = model.modified_score(theta, pattern);

    if (static_cast<int>(interest.size()) == d) {
        // Full interest set: nothing to complement away.
        std::vector<char> seen(d, 0);
        for (int j : interest) seen[j] = 1;
        bool all = std::all_of(seen.begin(), seen.end(), [](char c) { return c != 0; });
        if (all) return standardize(ms.value, ms.info, pattern, opts);
    }

    Eigen::VectorXd s_int(interest.size());
    for (std::size_t a = 0; a < interest.size(); ++a) s_int[a] = ms.value[interest[a]];
    const Eigen::MatrixXd eff = schur_complement(ms.info, interest, opts.pd_rel_threshold);
    TestResult r = standardize(s_int, eff, pattern, opts);

    // Diagnostic for non-orthogonal nuisance blocks (heuristic regime).
    std::vector<char> kept(d, 0);
    for (int j : interest) kept[j] = 1;
    std::vector<int> rest;
    for (int j = 0; j < d; ++j)
        if (!kept[j]) rest.push_back(j);
    if (!rest.empty()) {
        Eigen::MatrixXd cross(interest.size(), rest.size());
        Eigen::MatrixXd Mkk(interest.size(), interest.size());
        for (std::size_t a = 0; a < interest.size(); ++a) {
            for (std::size_t b = 0; b < rest.size(); ++b) cross(a, b) = ms.info(interest[a], rest[b]);
            for (std::size_t b = 0; b < interest.size(); ++b)
                Mkk(a, b) = ms.info(interest[a], interest[b]);
        }
        const double cross_sv = cross.jacobiSvd().singularValues()(0);
        const double min_int_eig =
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(Mkk).eigenvalues().minCoeff();
        r.nuisance_coupling = min_int_eig > 0.0 ? cross_sv / min_int_eig : INFINITY;
        r.nuisance_coupling_flagged = r.nuisance_coupling > opts.nuisance_coupling_fraction;
    }
    return r;
}

std::size_t RegionGrid::index(const std::vector<int>& multi) const {
    std::size_t flat = 0;
    for (std::size_t a = 0; a < axes.size(); ++a) flat = flat * axes[a].size() + multi[a];
    return flat;
}

std::vector<int> RegionGrid::multi_index(std::size_t flat) const {
    std::vector<int> multi(axes.size());
    for (int a = static_cast<int>(axes.size()) - 1; a >= 0; --a) {
        multi[a] = static_cast<int>(flat % axes[a].size());
        flat /= axes[a].size();
    }
    return multi;
}

RegionGrid invert_region(const ScoreModel& model, const ParameterPoint& nuisance_values,
                         const std::vector<int>& interest,
                         const std::vector<std::vector<double>>& grid_axes,
                         const std::vector<double>& levels, const InferenceOptions& opts) {
    if (interest.size() != grid_axes.size())
        throw Error("invert_region: one grid axis per interest parameter required");
    const auto lay = model.layout();
    RegionGrid grid;
    grid.interest = interest;
    grid.axes = grid_axes;
    grid.levels = levels;
    grid.df = static_cast<int>(interest.size());
    for (std::size_t a = 0; a < grid_axes.size(); ++a) {
        if (!std::is_sorted(grid_axes[a].begin(), grid_axes[a].end()))
            throw Error("invert_region: grid axes must be sorted");
        if (lay.block_of(interest[a]) == Block::Scale && !grid_axes[a].empty() &&
            grid_axes[a].front() < 0.0)
            throw Error("invert_region: scale-parameter axis extends below 0");
    }

    std::size_t total = 1;
    for (const auto& ax : grid_axes) total *= ax.size();
    grid.statistic.assign(total, std::numeric_limits<double>::quiet_NaN());
    grid.singular.assign(total, 0);

    for (std::size_t flat = 0; flat < total; ++flat) {
        const std::vector<int> multi = grid.multi_index(flat);
        ParameterPoint theta = nuisance_values;
        for (std::size_t a = 0; a < interest.size(); ++a)
            theta.set_flat(interest[a], grid_axes[a][multi[a]]);
        try {
            grid.statistic[flat] = subvector_statistic(model, theta, interest, opts).statistic;
        } catch (const SingularInformation&) {
            grid.singular[flat] = 1;
        }
    }

    for (double level : levels) {
        const double q = chisq_quantile(grid.df, level);
        std::vector<std::uint8_t> member(total, 0);
        for (std::size_t flat = 0; flat < total; ++flat)
            member[flat] = (!grid.singular[flat] && grid.statistic[flat] <= q) ? 1 : 0;
        grid.membership.push_back(std::move(member));
    }
    return grid;
}

namespace {

double eval_1d(const ScoreModel& model, ParameterPoint theta, int index, double v,
               const InferenceOptions& opts, bool* singular) {
    theta.set_flat(index, v);
    try {
        *singular = false;
        return subvector_statistic(model, theta, {index}, opts).statistic;
    } catch (const SingularInformation&) {
        *singular = true;
        return std::numeric_limits<double>::quiet_NaN();
    }
}

}  // namespace

IntervalResult componentwise_interval(const ScoreModel& model, const ParameterPoint& base,
                                      int index, double level, double scan_lo, double scan_hi,
                                      int scan_steps, double refine_tol,
                                      const InferenceOptions& opts) {
    if (scan_steps < 2) throw Error("componentwise_interval: need at least 2 scan points");
    if (!(scan_hi > scan_lo)) throw Error("componentwise_interval: empty scan range");
    if (model.layout().block_of(index) == Block::Scale && scan_lo < 0.0)
        throw Error("componentwise_interval: scan range extends below 0 for a scale parameter");

    const double q = chisq_quantile(1, level);
    std::vector<double> pts(scan_steps);
    std::vector<char> acc(scan_steps, 0);
    for (int i = 0; i < scan_steps; ++i) {
        pts[i] = scan_lo + (scan_hi - scan_lo) * i / (scan_steps - 1);
        bool sing = false;
        const double t = eval_1d(model, base, index, pts[i], opts, &sing);
        acc[i] = (!sing && t <= q) ? 1 : 0;
    }

    IntervalResult out;
    out.n_accepted = static_cast<int>(std::count(acc.begin(), acc.end(), 1));
    if (out.n_accepted == 0)
        throw EmptyRegion("no scan point accepted at level " + std::to_string(level) +
                          "; widen the scan range or check the model fit");

    const int first = static_cast<int>(std::find(acc.begin(), acc.end(), 1) - acc.begin());
    int last = scan_steps - 1;
    while (!acc[last]) --last;
    // Disconnected when the accepted indices are not one contiguous run.
    for (int i = first; i <= last; ++i)
        if (!acc[i]) out.disconnected = true;

    auto refine = [&](double accepted, double rejected) {
        while (std::fabs(rejected - accepted) > refine_tol) {
            const double mid = 0.5 * (accepted + rejected);
            bool sing = false;
            const double t = eval_1d(model, base, index, mid, opts, &sing);
            if (!sing && t <= q) {
                accepted = mid;
            } else {
                rejected = mid;
            }
        }
        return 0.5 * (accepted + rejected);
    };

    out.lo = (first == 0) ? pts.front() : refine(pts[first], pts[first - 1]);
    out.hi = (last == scan_steps - 1) ? pts.back() : refine(pts[last], pts[last + 1]);
    return out;
}

}  // namespace critscore
