#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <vector>

#include "critscore/chi_square.hpp"
#include "critscore/expmix_model.hpp"
#include "critscore/inference.hpp"
#include "critscore/quadrature.hpp"
#include "critscore/rng.hpp"

using namespace critscore;

namespace {

constexpr double kSqrt3 = 1.7320508075688772;

ExpMixData one_obs(double y1, double y2) {
    ExpMixData d;
    d.y.resize(1, 2);
    d.y << y1, y2;
    return d;
}

ParameterPoint pp(double lambda, double psi) {
    return ParameterPoint((Eigen::VectorXd(1) << lambda).finished(),
                          (Eigen::VectorXd(1) << psi).finished());
}

}  // namespace

TEST_CASE("expmix_loglik closed form vs quadrature and the boundary") {
    // lambda = 0: two independent exponentials.
    ExpMixData d = expmix_simulate({0.0, 1.3}, 50, 42);
    double oracle = 0.0;
    for (int i = 0; i < d.n(); ++i) oracle += 2.0 * std::log(1.3) - 1.3 * d.row_sum(i);
    CHECK(expmix_loglik({0.0, 1.3}, d) == doctest::Approx(oracle).epsilon(1e-12));

    // Closed form vs the 64-node marginalization, including y_sum = 1 at (0.2, 1).
    ExpMixData unit = one_obs(0.4, 0.6);
    CHECK(expmix_loglik({0.2, 1.0}, unit) ==
          doctest::Approx(expmix_loglik_quadrature({0.2, 1.0}, unit)).epsilon(1e-9));
    ExpMixData sim = expmix_simulate({0.35, 1.0}, 40, 11);
    for (double lambda : {0.05, 0.2, 0.4})
        CHECK(expmix_loglik({lambda, 1.0}, sim) ==
              doctest::Approx(expmix_loglik_quadrature({lambda, 1.0}, sim)).epsilon(1e-9));

    // Continuity into the boundary.
    CHECK(expmix_loglik({1e-4, 1.0}, sim) ==
          doctest::Approx(expmix_loglik({0.0, 1.0}, sim)).epsilon(1e-6));

    // Domain errors.
    CHECK_THROWS_AS(expmix_loglik({-0.1, 1.0}, sim), std::domain_error);
    CHECK_THROWS_AS(expmix_loglik({0.8, 1.0}, sim), std::domain_error);  // psi < sqrt3*lambda
}

TEST_CASE("expmix_score: boundary value, finite differences, quadrature route") {
    ExpMixData d = expmix_simulate({0.1, 1.0}, 30, 3);

    // At lambda = 0 the lambda-score vanishes exactly and the psi-score has
    // the two-exponential closed form.
    const Eigen::Vector2d s0 = expmix_score({0.0, 2.0}, d);
    CHECK(s0[0] == 0.0);
    double spsi = 0.0;
    for (int i = 0; i < d.n(); ++i) spsi += 1.0 - d.row_sum(i);
    CHECK(s0[1] == doctest::Approx(spsi).epsilon(1e-12));

    // Finite differences of the closed-form likelihood at (0.1, 1).
    const double h = 1e-6;
    const ExpMixTheta th{0.1, 1.0};
    const Eigen::Vector2d s = expmix_score(th, d);
    const double fd_l =
        (expmix_loglik({th.lambda + h, th.psi}, d) - expmix_loglik({th.lambda - h, th.psi}, d)) /
        (2.0 * h);
    const double fd_p =
        (expmix_loglik({th.lambda, th.psi + h}, d) - expmix_loglik({th.lambda, th.psi - h}, d)) /
        (2.0 * h);
    CHECK(s[0] == doctest::Approx(fd_l).epsilon(1e-6));
    CHECK(s[1] == doctest::Approx(fd_p).epsilon(1e-6));

    // Derivative-under-the-integral route agrees with the closed form.
    const Eigen::Vector2d sq = expmix_score_quadrature(th, d);
    CHECK(s[0] == doctest::Approx(sq[0]).epsilon(1e-8));
    CHECK(s[1] == doctest::Approx(sq[1]).epsilon(1e-8));

    // Mean score at the truth is zero within Monte Carlo error.
    const int big = 100000;
    ExpMixData mc = expmix_simulate({0.0, 1.0}, big, 77);
    double sum = 0.0, sumsq = 0.0;
    for (int i = 0; i < big; ++i) {
        const double v = 2.0 - mc.row_sum(i);
        sum += v;
        sumsq += v * v;
    }
    const double mean = sum / big;
    const double se = std::sqrt((sumsq / big - mean * mean) / big);
    CHECK(std::fabs(mean) < 3.0 * se);
}

TEST_CASE("expmix cancelled term matches the score across the series switch") {
    // s_lambda = lambda * xi with xi from either branch of the h-guard; the
    // finite-difference score is the oracle on both sides of the switch.
    ExpMixData d = one_obs(0.9, 0.8);
    const double h = 1e-7;
    for (double lambda : {2e-3, 1e-3, 5e-4, 1e-4}) {
        const double xi = expmix_cancelled_term({lambda, 1.0}, d.row_sum(0))[0];
        const double fd =
            (expmix_loglik({lambda + h, 1.0}, d) - expmix_loglik({lambda - h, 1.0}, d)) /
            (2.0 * h);
        CHECK(lambda * xi == doctest::Approx(fd).epsilon(1e-5));
    }
}

TEST_CASE("expmix_modified_score at the critical line") {
    // Single observation with y_sum = 2/psi: first entry -2/psi^2, second 0.
    const double psi = 1.6;
    ExpMixData d = one_obs(1.0 / psi, 1.0 / psi);
    CriticalPattern pat = critical_pattern(pp(0.0, psi));
    const Eigen::Vector2d m = expmix_modified_score({0.0, psi}, d, pat);
    CHECK(m[0] == doctest::Approx(-2.0 / (psi * psi)).epsilon(1e-12));
    CHECK(m[1] == doctest::Approx(0.0));

    // Second central difference of the log-likelihood in lambda at (0, 2).
    ExpMixData sim = expmix_simulate({0.0, 2.0}, 25, 5);
    const double h = 5e-4;
    const double fd2 = (expmix_loglik({h, 2.0}, sim) - 2.0 * expmix_loglik({0.0, 2.0}, sim) +
                        expmix_loglik({h, 2.0}, sim)) /
                       (h * h);
    const Eigen::Vector2d ms =
        expmix_modified_score({0.0, 2.0}, sim, critical_pattern(pp(0.0, 2.0)));
    CHECK(ms[0] == doctest::Approx(fd2).epsilon(1e-4));

    // Mean of the modified score at the truth is zero (Gamma moment identity
    // E(Ysum - 2/psi)^2 = 2/psi^2).
    const int big = 100000;
    ExpMixData mc = expmix_simulate({0.0, 1.0}, big, 13);
    double sum = 0.0, sumsq = 0.0;
    for (int i = 0; i < big; ++i) {
        const double dev = mc.row_sum(i) - 2.0;
        const double v = dev * dev - 2.0;
        sum += v;
        sumsq += v * v;
    }
    const double mean = sum / big;
    const double se = std::sqrt((sumsq / big - mean * mean) / big);
    CHECK(std::fabs(mean) < 3.0 * se);
}

TEST_CASE("expmix_modified_info: moment oracle, PD, Monte Carlo") {
    // Moment oracle at lambda = 0, psi = 1: Gamma(2, 1) central moments
    // mu2 = 2, mu3 = 4, mu4 = 24 give Var = 20, Cov = -mu3, Var(s_psi) = mu2.
    const Eigen::Matrix2d info = expmix_modified_info({0.0, 1.0}, 3);
    CHECK(info(0, 0) == doctest::Approx(3.0 * 20.0));
    CHECK(info(0, 1) == doctest::Approx(3.0 * -4.0));
    CHECK(info(1, 1) == doctest::Approx(3.0 * 2.0));

    for (auto [lambda, psi] :
         std::vector<std::pair<double, double>>{{0.0, 1.0}, {0.1, 1.0}, {0.3, 2.0}}) {
        const Eigen::Matrix2d m = expmix_modified_info({lambda, psi}, 1);
        CHECK(m(0, 1) == doctest::Approx(m(1, 0)));
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(m);
        CHECK(es.eigenvalues().minCoeff() > 0.0);
    }

    // Monte Carlo covariance of the raw score at the regular point (0.2, 1).
    const ExpMixTheta th{0.2, 1.0};
    const int big = 200000;
    ExpMixData mc = expmix_simulate(th, big, 99);
    std::vector<Eigen::Vector2d> draws(big);
    Eigen::Vector2d mean = Eigen::Vector2d::Zero();
    for (int i = 0; i < big; ++i) {
        const Eigen::Vector2d t = expmix_cancelled_term(th, mc.row_sum(i));
        draws[i] = Eigen::Vector2d(th.lambda * t[0], t[1]);
        mean += draws[i];
    }
    mean /= big;
    Eigen::Matrix2d cov = Eigen::Matrix2d::Zero(), se2 = Eigen::Matrix2d::Zero();
    for (const auto& v : draws) {
        const Eigen::Vector2d c = v - mean;
        cov += c * c.transpose();
    }
    cov /= big;
    for (const auto& v : draws) {
        const Eigen::Vector2d c = v - mean;
        const Eigen::Matrix2d dev = c * c.transpose() - cov;
        se2 += dev.cwiseProduct(dev);
    }
    const Eigen::Matrix2d analytic = expmix_modified_info(th, 1);
    for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) {
            const double se = std::sqrt(se2(a, b) / big) / std::sqrt(static_cast<double>(big));
            CHECK(std::fabs(cov(a, b) - analytic(a, b)) < 5.0 * se);
        }
}

TEST_CASE("expmix_simulate moments and determinism") {
    ExpMixData a = expmix_simulate({0.0, 2.0}, 100000, 1);
    CHECK(a.y.mean() == doctest::Approx(0.5).epsilon(0.02));

    // lambda > 0: E(Y) = E{1/(psi + lambda W)} by quadrature.
    const ExpMixTheta th{0.4, 1.0};
    ExpMixData b = expmix_simulate(th, 200000, 2);
    const double expected = gl64().integrate(
                                [&](double w) { return 1.0 / (th.psi + th.lambda * w); },
                                -kSqrt3, kSqrt3) /
                            (2.0 * kSqrt3);
    CHECK(b.y.mean() == doctest::Approx(expected).epsilon(0.02));

    ExpMixData c = expmix_simulate(th, 100, 5);
    ExpMixData cc = expmix_simulate(th, 100, 5);
    CHECK((c.y - cc.y).norm() == 0.0);
}

TEST_CASE("expmix rank drop exactly at lambda = 0") {
    // MC covariance of the raw score has a vanishing smallest eigenvalue on
    // the critical line and a bounded-away one off it.
    const int draws = 100000;
    auto smallest_eig = [&](const ExpMixTheta& th, std::uint64_t seed) {
        ExpMixData mc = expmix_simulate(th, draws, seed);
        std::vector<Eigen::Vector2d> vals(draws);
        Eigen::Vector2d mean = Eigen::Vector2d::Zero();
        for (int i = 0; i < draws; ++i) {
            const Eigen::Vector2d t = expmix_cancelled_term(th, mc.row_sum(i));
            vals[i] = Eigen::Vector2d(th.lambda * t[0], t[1]);
            mean += vals[i];
        }
        mean /= draws;
        Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
        for (const auto& v : vals) cov += (v - mean) * (v - mean).transpose();
        cov /= draws;
        return Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d>(cov).eigenvalues().minCoeff();
    };
    CHECK(smallest_eig({0.0, 1.0}, 21) == doctest::Approx(0.0));
    CHECK(smallest_eig({0.3, 1.0}, 22) > 0.01);
}

TEST_CASE("expmix statistic is continuous across the critical line") {
    ExpMixData d = expmix_simulate({0.05, 1.0}, 60, 9);
    ExpMixScoreModel model(d);
    const double at_eps = modified_statistic(model, pp(1e-4, 1.0)).statistic;
    const double at_zero = modified_statistic(model, pp(0.0, 1.0)).statistic;
    CHECK(std::fabs(at_eps - at_zero) / std::max(at_zero, 1.0) < 1e-3);
}

TEST_CASE("expmix statistic 0.95 quantile near the chi-square reference" *
          doctest::timeout(600)) {
    const int reps = 5000, n = 200;
    const double q_ref = chisq_quantile(2, 0.95);
    for (auto [lambda, psi] :
         std::vector<std::pair<double, double>>{{0.0, 1.0}, {0.05, 1.0}, {0.3, 1.0}}) {
        const ExpMixTheta truth{lambda, psi};
        // The expected information depends only on theta; reuse it across reps.
        ExpMixScoreModel proto(expmix_simulate(truth, 1, 0));
        const Eigen::Matrix2d info1 = proto.modified_info(pp(lambda, psi), CriticalPattern{});
        std::vector<double> stats;
        stats.reserve(reps);
        for (int rep = 0; rep < reps; ++rep) {
            ExpMixData d = expmix_simulate(
                truth, n, 6000 + static_cast<std::uint64_t>(rep) * 1315423911ULL);
            Eigen::Vector2d s = Eigen::Vector2d::Zero();
            for (int i = 0; i < n; ++i) s += expmix_cancelled_term(truth, d.row_sum(i));
            const Eigen::Matrix2d c = static_cast<double>(n) * info1;
            stats.push_back(s.dot(c.inverse() * s));
        }
        std::sort(stats.begin(), stats.end());
        const double q95 = stats[static_cast<std::size_t>(0.95 * (reps - 1))];
        CHECK(std::fabs(q95 - q_ref) < 0.25);
    }
}
