#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <vector>

#include "critscore/chi_square.hpp"
#include "critscore/inference.hpp"
#include "critscore/rng.hpp"
#include "critscore/toy_model.hpp"

using namespace critscore;

namespace {

// Dense multivariate-normal log density via Cholesky, the independent oracle
// for the closed-form likelihood.
double mvn_loglik_oracle(double theta, const ToyData& data) {
    const int r = data.r();
    const Eigen::MatrixXd Sigma = theta * theta * Eigen::MatrixXd::Ones(r, r) +
                                  Eigen::MatrixXd::Identity(r, r);
    Eigen::LLT<Eigen::MatrixXd> llt(Sigma);
    double logdet = 0.0;
    for (int i = 0; i < r; ++i) logdet += 2.0 * std::log(llt.matrixL()(i, i));
    double ll = 0.0;
    for (int i = 0; i < data.n(); ++i) {
        const Eigen::VectorXd y = data.y.row(i).transpose();
        ll += -0.5 * (r * std::log(2.0 * M_PI) + logdet + y.dot(llt.solve(y)));
    }
    return ll;
}

double ks_two_sample(std::vector<double> a, std::vector<double> b) {
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    double d = 0.0;
    std::size_t i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
        if (a[i] <= b[j]) {
            ++i;
        } else {
            ++j;
        }
        d = std::max(d, std::fabs(static_cast<double>(i) / a.size() -
                                  static_cast<double>(j) / b.size()));
    }
    return d;
}

ParameterPoint theta1(double v) {
    return ParameterPoint((Eigen::VectorXd(1) << v).finished(), Eigen::VectorXd(0));
}

}  // namespace

TEST_CASE("toy_loglik closed form") {
    ToyData data = toy_simulate(0.4, 20, 3, 99);

    // theta = 0: sum of standard normal log densities.
    double ss = data.y.squaredNorm();
    CHECK(toy_loglik(0.0, data) ==
          doctest::Approx(-0.5 * data.n() * data.r() * std::log(2.0 * M_PI) - 0.5 * ss)
              .epsilon(1e-12));

    // r = 1, theta = 1: N(0, 2) per observation.
    ToyData scalar = toy_simulate(1.0, 50, 1, 7);
    double oracle = 0.0;
    for (int i = 0; i < scalar.n(); ++i)
        oracle += -0.5 * std::log(2.0 * M_PI * 2.0) - scalar.y(i, 0) * scalar.y(i, 0) / 4.0;
    CHECK(toy_loglik(1.0, scalar) == doctest::Approx(oracle).epsilon(1e-12));

    // Random theta against the dense MVN oracle.
    for (double theta : {0.0, 0.17, 0.8, 2.5})
        CHECK(toy_loglik(theta, data) ==
              doctest::Approx(mvn_loglik_oracle(theta, data)).epsilon(1e-10));

    CHECK_THROWS_AS(toy_loglik(-0.1, data), std::domain_error);
}

TEST_CASE("toy_score and modified score") {
    ToyData data = toy_simulate(0.3, 30, 2, 5);

    // Score vanishes identically at the critical point.
    CHECK(toy_score(0.0, data) == 0.0);

    // Central finite differences of the likelihood.
    const double h = 1e-5;
    for (double theta : {0.3, 1.1}) {
        const double fd = (toy_loglik(theta + h, data) - toy_loglik(theta - h, data)) / (2.0 * h);
        CHECK(toy_score(theta, data) == doctest::Approx(fd).epsilon(1e-6));
    }

    // Modified score at the second-derivative branch, against finite
    // differences of the score.
    const double fd2 = (toy_score(2.0 * h, data) - toy_score(0.0, data)) / (2.0 * h);
    CHECK(toy_modified_score(data) == doctest::Approx(fd2).epsilon(1e-4));

    // Data with (y_i' 1)^2 = r for every group gives exactly zero.
    ToyData flat;
    flat.y.setOnes(4, 4);
    flat.y *= 0.5;  // row sum 2, squared 4 = r
    CHECK(toy_modified_score(flat) == doctest::Approx(0.0));
}

TEST_CASE("toy closed-form statistic equals the generic machinery") {
    for (int r : {1, 3}) {
        ToyData data = toy_simulate(0.25, 40, r, 2024);
        ToyScoreModel model(data);
        for (double theta : {0.0, 0.1, 1.0}) {
            const double closed = toy_statistic_closed_form(theta, data);
            const TestResult generic = modified_statistic(model, theta1(theta));
            CHECK(generic.statistic == doctest::Approx(closed).epsilon(1e-8));
            CHECK(generic.df == 1);
            CHECK(generic.p_value ==
                  doctest::Approx(1.0 - chisq_cdf(1, generic.statistic)).epsilon(1e-10));
        }
    }

    // Data tuned so the statistic vanishes.
    ToyData zero;
    zero.y.setOnes(5, 1);  // each (y' 1)^2 = 1, so the sum is r n
    CHECK(toy_statistic_closed_form(0.0, zero) == doctest::Approx(0.0));
}

TEST_CASE("toy statistic at the null follows the pivotal law") {
    // Empirical distribution at theta near zero vs far from zero, plus the
    // analytic (-rn + r chi2_n)^2 / (2 r^2 n) reference draws.
    const int reps = 1200, n = 100, r = 1;
    std::vector<double> near, far, reference;
    for (int rep = 0; rep < reps; ++rep) {
        near.push_back(toy_statistic_closed_form(1e-6, toy_simulate(1e-6, n, r, 1000 + rep)));
        far.push_back(toy_statistic_closed_form(0.5, toy_simulate(0.5, n, r, 50000 + rep)));
        RngStream rng(777, rep);
        double chi2 = 0.0;
        for (int i = 0; i < n; ++i) {
            const double z = rng.normal();
            chi2 += z * z;
        }
        const double dev = -static_cast<double>(r) * n + r * chi2;
        reference.push_back(dev * dev / (2.0 * r * r * n));
    }
    const double crit = 1.7308 * std::sqrt(2.0 / reps);  // two-sample KS, 0.5% level
    CHECK(ks_two_sample(near, far) < crit);
    CHECK(ks_two_sample(near, reference) < crit);
}

TEST_CASE("toy_simulate moments and determinism") {
    ToyData a = toy_simulate(0.0, 100, 100, 31);
    const double mean = a.y.mean();
    const double var = (a.y.array() - mean).square().mean();
    CHECK(std::fabs(mean) < 4.0 / 100.0);
    CHECK(std::fabs(var - 1.0) < 4.0 / 100.0);

    // theta = 1, r = 2: within-group covariance 1, variance 2.
    ToyData b = toy_simulate(1.0, 20000, 2, 32);
    double cov = 0.0, v0 = 0.0;
    for (int i = 0; i < b.n(); ++i) {
        cov += b.y(i, 0) * b.y(i, 1);
        v0 += b.y(i, 0) * b.y(i, 0);
    }
    cov /= b.n();
    v0 /= b.n();
    CHECK(cov == doctest::Approx(1.0).epsilon(0.08));
    CHECK(v0 == doctest::Approx(2.0).epsilon(0.08));

    ToyData c = toy_simulate(1.0, 20000, 2, 32);
    CHECK((b.y - c.y).norm() == 0.0);
}

TEST_CASE("toy information positivity off zero") {
    // Sample variance of the score at theta = 0.3 against the analytic
    // information 2 r^2 theta^2 / (1 + r theta^2)^2 per group.
    const double theta = 0.3;
    const int r = 2, groups = 100000;
    ToyData pool = toy_simulate(theta, groups, r, 8);
    const double v = 1.0 + theta * theta * r;
    double mean = 0.0, m2 = 0.0, m4 = 0.0;
    for (int i = 0; i < groups; ++i) {
        const double g = pool.y.row(i).sum();
        const double s = -r * theta / v + g * g * theta / (v * v);
        mean += s;
        m2 += s * s;
        m4 += s * s * s * s;
    }
    mean /= groups;
    m2 /= groups;
    m4 /= groups;
    const double sample_var = m2 - mean * mean;
    const double analytic = 2.0 * r * r * theta * theta / (v * v);
    const double mc_se = std::sqrt((m4 - m2 * m2) / groups);
    CHECK(sample_var > 0.0);
    CHECK(std::fabs(sample_var - analytic) < 3.0 * mc_se);
}
