#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <Eigen/Dense>
#include <cmath>

#include "critscore/chi_square.hpp"
#include "critscore/errors.hpp"
#include "critscore/linalg.hpp"
#include "critscore/parameter.hpp"
#include "critscore/rng.hpp"

using namespace critscore;

TEST_CASE("chisq_cdf closed forms") {
    CHECK(chisq_cdf(1, 0.0) == 0.0);
    // df = 2 is exponential with rate 1/2.
    for (double x : {0.5, 1.0, 5.0})
        CHECK(chisq_cdf(2, x) == doctest::Approx(1.0 - std::exp(-x / 2.0)).epsilon(1e-12));
    CHECK(std::fabs(chisq_cdf(1, 3.84) - 0.95) < 1e-3);
    CHECK_THROWS_AS(chisq_cdf(1, -0.1), std::domain_error);
    CHECK_THROWS_AS(chisq_cdf(0, 1.0), std::domain_error);
}

TEST_CASE("chisq_cdf monotone in x") {
    for (int df : {1, 2, 5}) {
        double prev = -1.0;
        for (double x = 0.0; x <= 20.0; x += 0.25) {
            const double c = chisq_cdf(df, x);
            CHECK(c >= prev);
            prev = c;
        }
    }
}

TEST_CASE("chisq_quantile examples") {
    const double q95 = chisq_quantile(1, 0.95);
    CHECK(q95 > 3.8405);
    CHECK(q95 < 3.8420);
    CHECK(chisq_quantile(3, 0.0) == 0.0);
    // df = 2 closed form: 1 - exp(-v/2) = p.
    CHECK(chisq_quantile(2, 0.95) == doctest::Approx(-2.0 * std::log(0.05)).epsilon(1e-10));
    CHECK_THROWS_AS(chisq_quantile(2, 1.0), std::domain_error);
    CHECK_THROWS_AS(chisq_quantile(2, -0.01), std::domain_error);
}

TEST_CASE("chisq cdf/quantile duality") {
    for (int df = 1; df <= 6; ++df)
        for (double p : {0.5, 0.8, 0.95, 0.99})
            CHECK(chisq_cdf(df, chisq_quantile(df, p)) == doctest::Approx(p).epsilon(1e-9));
}

TEST_CASE("critical_pattern rule") {
    {
        ParameterPoint theta((Eigen::VectorXd(2) << 0.0, 0.5).finished(),
                             (Eigen::VectorXd(2) << 1.0, 1.0).finished());
        const auto pat = critical_pattern(theta, 0.0);
        CHECK(pat.k == std::vector<int>{2, 1, 1, 1});
        CHECK(pat.standard_basis);
        CHECK(pat.critical_indices() == std::vector<int>{0});
    }
    {
        ParameterPoint theta((Eigen::VectorXd(2) << 0.3, 0.3).finished(), Eigen::VectorXd(0));
        CHECK(critical_pattern(theta, 0.0).k == std::vector<int>{1, 1});
    }
    {
        ParameterPoint theta((Eigen::VectorXd(2) << 1e-12, 0.5).finished(),
                             (Eigen::VectorXd(2) << 1.0, 1.0).finished());
        CHECK(critical_pattern(theta, 1e-10).k == std::vector<int>{2, 1, 1, 1});
        CHECK(critical_pattern(theta, 0.0).k == std::vector<int>{1, 1, 1, 1});
    }
}

TEST_CASE("parameter flat indexing round-trips") {
    ParameterPoint theta((Eigen::VectorXd(2) << 0.1, 0.2).finished(),
                         (Eigen::VectorXd(3) << -1.0, 2.0, 3.0).finished(), 0.7);
    const auto lay = theta.layout();
    CHECK(lay.dim() == 6);
    const Eigen::VectorXd flat = theta.to_flat();
    const ParameterPoint back = ParameterPoint::from_flat(lay, flat);
    CHECK(back.lambda == theta.lambda);
    CHECK(back.psi == theta.psi);
    CHECK(*back.sigma == *theta.sigma);
    CHECK(lay.label(0) == "lambda1");
    CHECK(lay.label(2) == "psi1");
    CHECK(lay.label(5) == "sigma");
}

TEST_CASE("spd_solve flags singular information") {
    Eigen::MatrixXd M(2, 2);
    M << 1.0, 1.0, 1.0, 1.0;
    CHECK_THROWS_AS(spd_solve(M, Eigen::Vector2d(1.0, 0.0)), SingularInformation);
    M << 2.0, 0.0, 0.0, 3.0;
    const auto sol = spd_solve(M, Eigen::Vector2d(2.0, 3.0));
    CHECK(sol.x(0) == doctest::Approx(1.0));
    CHECK(sol.x(1) == doctest::Approx(1.0));
    CHECK(sol.condition_number == doctest::Approx(1.5));
}

TEST_CASE("schur_complement small cases") {
    Eigen::MatrixXd M(2, 2);
    M << 2.0, 1.0, 1.0, 1.0;
    const Eigen::MatrixXd s = schur_complement(M, {0});
    CHECK(s(0, 0) == doctest::Approx(1.0).epsilon(1e-14));

    // Block-diagonal: complement has no effect.
    Eigen::MatrixXd B = Eigen::MatrixXd::Zero(3, 3);
    B(0, 0) = 4.0;
    B(1, 1) = 5.0;
    B(2, 2) = 6.0;
    B(1, 2) = B(2, 1) = 1.0;
    const Eigen::MatrixXd sb = schur_complement(B, {0});
    CHECK(sb(0, 0) == doctest::Approx(4.0));

    // Empty complement returns M itself.
    const Eigen::MatrixXd se = schur_complement(M, {0, 1});
    CHECK((se - M).norm() == doctest::Approx(0.0));
}

namespace {

Eigen::MatrixXd random_spd(int d, RngStream& rng) {
    Eigen::MatrixXd A(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) A(i, j) = rng.normal();
    return A * A.transpose() + 0.5 * Eigen::MatrixXd::Identity(d, d);
}

}  // namespace

TEST_CASE("schur_complement equals inverse-of-inverse block") {
    RngStream rng(20250810, 1);
    for (int rep = 0; rep < 20; ++rep) {
        const Eigen::MatrixXd M = random_spd(5, rng);
        const Eigen::MatrixXd Minv = M.inverse();
        // Oracle: the kept block of the inverse, inverted again.
        Eigen::MatrixXd blk(2, 2);
        const int keep[2] = {0, 2};
        for (int a = 0; a < 2; ++a)
            for (int b = 0; b < 2; ++b) blk(a, b) = Minv(keep[a], keep[b]);
        const Eigen::MatrixXd oracle = blk.inverse();
        const Eigen::MatrixXd s = schur_complement(M, {0, 2});
        CHECK((s - oracle).norm() < 1e-9 * oracle.norm());
    }
}

TEST_CASE("schur_complement nested application") {
    RngStream rng(20250810, 2);
    const Eigen::MatrixXd M = random_spd(6, rng);
    // Complement away {4, 5}, then {3} (index 3 survives as position 3).
    const Eigen::MatrixXd once = schur_complement(M, {0, 1, 2});
    const Eigen::MatrixXd step1 = schur_complement(M, {0, 1, 2, 3});
    const Eigen::MatrixXd step2 = schur_complement(step1, {0, 1, 2});
    CHECK((once - step2).norm() < 1e-9 * once.norm());
    CHECK_THROWS_AS(schur_complement(Eigen::MatrixXd::Zero(3, 3), {0}), SingularInformation);
}

TEST_CASE("detect_critical_numeric") {
    CHECK(detect_critical_numeric(Eigen::MatrixXd::Identity(4, 4), 1e-8).empty());
    Eigen::MatrixXd D = Eigen::MatrixXd::Zero(3, 3);
    D(0, 0) = 0.0;
    D(1, 1) = 1.0;
    D(2, 2) = 2.0;
    const auto pairs = detect_critical_numeric(D, 1e-8);
    REQUIRE(pairs.size() == 1);
    CHECK(pairs[0].first == doctest::Approx(0.0));
    CHECK(std::fabs(pairs[0].second(0)) == doctest::Approx(1.0));
}

TEST_CASE("statistic invariant to sign conventions of the modified score") {
    // Flipping the sign of any contribution entry (with the matching info
    // rows/columns) cannot change s' I^{-1} s.
    RngStream rng(20250810, 3);
    const Eigen::MatrixXd M = random_spd(4, rng);
    Eigen::VectorXd s(4);
    for (int i = 0; i < 4; ++i) s[i] = rng.normal();
    const double base = s.dot(spd_solve(M, s).x);
    Eigen::VectorXd flip = Eigen::VectorXd::Ones(4);
    flip(1) = -1.0;
    flip(3) = -1.0;
    const Eigen::MatrixXd Mf = flip.asDiagonal() * M * flip.asDiagonal();
    const Eigen::VectorXd sf = flip.asDiagonal() * s;
    CHECK(sf.dot(spd_solve(Mf, sf).x) == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("rng streams are deterministic and schedule-free") {
    RngStream a(42, 7), b(42, 7), c(42, 8);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
    bool differs = false;
    RngStream a2(42, 7);
    for (int i = 0; i < 100; ++i) differs |= (a2.next_u64() != c.next_u64());
    CHECK(differs);
    // Uniform range sanity.
    RngStream u(1, 0);
    for (int i = 0; i < 1000; ++i) {
        const double x = u.next_double();
        CHECK(x >= 0.0);
        CHECK(x < 1.0);
    }
}
