#include "critscore/toy_model.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "critscore/rng.hpp"

namespace critscore {

namespace {

void check_theta(double theta) {
    if (!(theta >= 0.0)) throw std::domain_error("toy model: theta must be >= 0");
}

}  // namespace

double toy_loglik(double theta, const ToyData& data) {
    check_theta(theta);
    const int n = data.n();
    const int r = data.r();
    const double v = 1.0 + theta * theta * r;
    double ll = -0.5 * n * r * std::log(2.0 * std::numbers::pi) - 0.5 * n * std::log(v);
    for (int i = 0; i < n; ++i) {
        const double ss = data.y.row(i).squaredNorm();
        const double g = data.y.row(i).sum();
        ll -= 0.5 * (ss - g * g * theta * theta / v);
    }
    return ll;
}

double toy_score(double theta, const ToyData& data) {
    check_theta(theta);
    const int r = data.r();
    const double v = 1.0 + theta * theta * r;
    double s = 0.0;
    for (int i = 0; i < data.n(); ++i) {
        const double g = data.y.row(i).sum();
        s += -r * theta / v + g * g * theta / (v * v);
    }
    return s;
}

double toy_modified_score(const ToyData& data) {
    const int r = data.r();
    double s = 0.0;
    for (int i = 0; i < data.n(); ++i) {
        const double g = data.y.row(i).sum();
        s += -r + g * g;
    }
    return s;
}

double toy_statistic_closed_form(double theta, const ToyData& data) {
    check_theta(theta);
    const int n = data.n();
    const int r = data.r();
    const double v = 1.0 + theta * theta * r;
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
        const double g = data.y.row(i).sum();
        sum += g * g / v;
    }
    const double num = -static_cast<double>(r) * n + sum;
    // Per-group variance of the cancelled contribution is 2 r^2 at every
    // theta, hence the r^2 n normalization.
    return num * num / (2.0 * static_cast<double>(r) * r * n);
}

ToyData toy_simulate(double theta, int n, int r, std::uint64_t seed) {
    check_theta(theta);
    ToyData data;
    data.y.resize(n, r);
    for (int i = 0; i < n; ++i) {
        RngStream rng(seed, static_cast<std::uint64_t>(i));
        const double w = rng.normal();
        for (int j = 0; j < r; ++j) data.y(i, j) = theta * w + rng.normal();
    }
    return data;
}

double ToyScoreModel::loglik(const ParameterPoint& theta) const {
    return toy_loglik(theta.lambda[0], data_);
}

Eigen::VectorXd ToyScoreModel::modified_score_term(const ParameterPoint& theta,
                                                   const CriticalPattern&, int group) const {
    // Scale-cancelled contribution: score / {theta / (1 + r theta^2)} off the
    // boundary, second derivative of the group log-likelihood on it; the two
    // coincide as written.
    const double t = theta.lambda[0];
    const int r = data_.r();
    const double v = 1.0 + t * t * r;
    const double g = data_.y.row(group).sum();
    Eigen::VectorXd out(1);
    out[0] = -r + g * g / v;
    return out;
}

Eigen::MatrixXd ToyScoreModel::modified_info(const ParameterPoint&, const CriticalPattern&) const {
    const double r = data_.r();
    Eigen::MatrixXd info(1, 1);
    info(0, 0) = 2.0 * r * r * data_.n();
    return info;
}

}  // namespace critscore
