#include "critscore/expmix_model.hpp"

#include <cmath>
#include <stdexcept>

#include "critscore/errors.hpp"
#include "critscore/quadrature.hpp"
#include "critscore/rng.hpp"

namespace critscore {

namespace {

constexpr double kSqrt3 = 1.7320508075688772;
// log(2 sqrt 3), the change-of-variables constant in the closed form.
const double kLog2Sqrt3 = std::log(2.0 * kSqrt3);

// Series switch points for the G(A) - G(B) cancellation, in h = sqrt3*ysum*lambda.
constexpr double kLoglikSeriesH = 1e-4;
constexpr double kScoreSeriesH = 1e-3;

// G(t) = e^{-t}(t^2+2t+2) and scaled odd/even derivative polynomials:
//   -e^c G'(c)   = c^2            -e^c G'''(c) = c^2 - 4c + 2
//   -e^c G^(5)(c)= c^2 - 8c + 12   e^c G''(c)  = c^2 - 2c
//    e^c G''''(c)= c^2 - 6c + 6
struct GPoly {
    double q1, q3, q5, p2, p4;
    explicit GPoly(double c)
        : q1(c * c),
          q3(c * c - 4.0 * c + 2.0),
          q5(c * c - 8.0 * c + 12.0),
          p2(c * c - 2.0 * c),
          p4(c * c - 6.0 * c + 6.0) {}
};

inline double quad_poly(double t) { return t * t + 2.0 * t + 2.0; }

struct ObsGeometry {
    double c;   // psi * ysum
    double h;   // sqrt3 * lambda * ysum
    double A;   // (psi - sqrt3 lambda) * ysum = c - h
    double B;   // c + h
    double E2;  // exp(-2h)
};

ObsGeometry geometry(const ExpMixTheta& th, double ysum) {
    ObsGeometry g;
    g.c = th.psi * ysum;
    g.h = kSqrt3 * th.lambda * ysum;
    g.A = g.c - g.h;
    g.B = g.c + g.h;
    g.E2 = std::exp(-2.0 * g.h);
    return g;
}

// log{G(A) - G(B)} without cancellation: factored as -A + log(...) directly,
// Taylor in h below the switch point.
double log_gdiff(const ObsGeometry& g) {
    if (g.h < kLoglikSeriesH) {
        const GPoly gp(g.c);
        const double h2 = g.h * g.h;
        const double bracket =
            g.h * (gp.q1 + h2 * (gp.q3 / 6.0 + h2 * gp.q5 / 120.0));
        return -g.c + std::log(2.0 * bracket);
    }
    return -g.A + std::log(quad_poly(g.A) - g.E2 * quad_poly(g.B));
}

// xi = s_lambda / lambda, continuous across lambda = 0.
double xi_term(const ExpMixTheta& th, double ysum) {
    const ObsGeometry g = geometry(th, ysum);
    if (g.h < kScoreSeriesH) {
        const GPoly gp(g.c);
        const double h2 = g.h * g.h;
        const double num = gp.q3 + h2 * gp.q5 / 10.0;
        const double den = gp.q1 + h2 * (gp.q3 / 6.0 + h2 * gp.q5 / 120.0);
        return ysum * ysum * num / den;
    }
    const double dfac = quad_poly(g.A) - g.E2 * quad_poly(g.B);
    const double nfac = -(g.A * g.A + g.E2 * g.B * g.B);
    const double lam = th.lambda;
    return -(1.0 + g.h * nfac / dfac) / (lam * lam);
}

double spsi_term(const ExpMixTheta& th, double ysum) {
    const ObsGeometry g = geometry(th, ysum);
    if (g.h < kScoreSeriesH) {
        const GPoly gp(g.c);
        const double h2 = g.h * g.h;
        return -ysum * (gp.p2 + h2 * gp.p4 / 6.0) / (gp.q1 + h2 * gp.q3 / 6.0);
    }
    const double dfac = quad_poly(g.A) - g.E2 * quad_poly(g.B);
    return -ysum * (g.A * g.A - g.E2 * g.B * g.B) / dfac;
}

double second_deriv_at_zero(double psi, double ysum) {
    const double dev = ysum - 2.0 / psi;
    return dev * dev - 2.0 / (psi * psi);
}

void check_data(const ExpMixData& data) {
    if (data.n() < 1) throw Error("expmix: dataset is empty");
    if ((data.y.array() <= 0.0).any()) throw std::domain_error("expmix: responses must be > 0");
}

// Expectation of g(Ysum) under theta. The density of Ysum is t * f_theta(t)
// with f_theta the marginal density value at any y with that sum.
template <typename F>
double expect_ysum(const ExpMixTheta& th, F&& fn) {
    const double rate_min = th.psi - kSqrt3 * th.lambda;
    const double upper = 60.0 / rate_min;
    const auto& rule = gl32();
    ExpMixTheta theta = th;
    auto integrand = [&](double t) {
        double logf;
        if (theta.lambda == 0.0) {
            logf = 2.0 * std::log(theta.psi) - theta.psi * t;
        } else {
            logf = log_gdiff(geometry(theta, t)) - std::log(theta.lambda) - 3.0 * std::log(t) -
                   kLog2Sqrt3;
        }
        return fn(t) * t * std::exp(logf);
    };
    return rule.integrate_panels(integrand, 0.0, upper, 30);
}

}  // namespace

void expmix_validate(const ExpMixTheta& theta) {
    if (!(theta.lambda >= 0.0)) throw std::domain_error("expmix: lambda must be >= 0");
    if (!(theta.psi > kSqrt3 * theta.lambda))
        throw std::domain_error("expmix: psi must exceed sqrt(3) * lambda");
}

double expmix_loglik(const ExpMixTheta& theta, const ExpMixData& data) {
    expmix_validate(theta);
    check_data(data);
    double ll = 0.0;
    if (theta.lambda == 0.0) {
        for (int i = 0; i < data.n(); ++i)
            ll += 2.0 * std::log(theta.psi) - theta.psi * data.row_sum(i);
        return ll;
    }
    const double base = -std::log(theta.lambda) - kLog2Sqrt3;
    for (int i = 0; i < data.n(); ++i) {
        const double ysum = data.row_sum(i);
        ll += log_gdiff(geometry(theta, ysum)) + base - 3.0 * std::log(ysum);
    }
    return ll;
}

double expmix_loglik_quadrature(const ExpMixTheta& theta, const ExpMixData& data) {
    expmix_validate(theta);
    check_data(data);
    const auto& rule = gl64();
    double ll = 0.0;
    for (int i = 0; i < data.n(); ++i) {
        const double ysum = data.row_sum(i);
        const double f = rule.integrate(
                             [&](double w) {
                                 const double u = theta.psi + theta.lambda * w;
                                 return u * u * std::exp(-u * ysum);
                             },
                             -kSqrt3, kSqrt3) /
                         (2.0 * kSqrt3);
        ll += std::log(f);
    }
    return ll;
}

Eigen::Vector2d expmix_cancelled_term(const ExpMixTheta& theta, double ysum) {
    if (theta.lambda == 0.0)
        return {second_deriv_at_zero(theta.psi, ysum), 2.0 / theta.psi - ysum};
    return {xi_term(theta, ysum), spsi_term(theta, ysum)};
}

Eigen::Vector2d expmix_score(const ExpMixTheta& theta, const ExpMixData& data) {
    expmix_validate(theta);
    check_data(data);
    Eigen::Vector2d s = Eigen::Vector2d::Zero();
    for (int i = 0; i < data.n(); ++i) {
        const double ysum = data.row_sum(i);
        if (theta.lambda == 0.0) {
            s[1] += 2.0 / theta.psi - ysum;
        } else {
            s[0] += theta.lambda * xi_term(theta, ysum);
            s[1] += spsi_term(theta, ysum);
        }
    }
    return s;
}

Eigen::Vector2d expmix_score_quadrature(const ExpMixTheta& theta, const ExpMixData& data) {
    expmix_validate(theta);
    check_data(data);
    const auto& rule = gl64();
    Eigen::Vector2d s = Eigen::Vector2d::Zero();
    for (int i = 0; i < data.n(); ++i) {
        const double ysum = data.row_sum(i);
        auto cond = [&](double w) {
            const double u = theta.psi + theta.lambda * w;
            return u * u * std::exp(-u * ysum);
        };
        auto dcond = [&](double w) {
            const double u = theta.psi + theta.lambda * w;
            return (2.0 * u - u * u * ysum) * std::exp(-u * ysum);
        };
        const double f = rule.integrate(cond, -kSqrt3, kSqrt3);
        const double dl = rule.integrate([&](double w) { return dcond(w) * w; }, -kSqrt3, kSqrt3);
        const double dp = rule.integrate(dcond, -kSqrt3, kSqrt3);
        s[0] += dl / f;
        s[1] += dp / f;
    }
    return s;
}

Eigen::Vector2d expmix_modified_score(const ExpMixTheta& theta, const ExpMixData& data,
                                      const CriticalPattern& pattern) {
    expmix_validate(theta);
    check_data(data);
    if (pattern.k.size() != 2) throw Error("expmix_modified_score: pattern has wrong length");
    if (pattern.k[0] != 2) return expmix_score(theta, data);
    Eigen::Vector2d s = Eigen::Vector2d::Zero();
    for (int i = 0; i < data.n(); ++i) {
        const double ysum = data.row_sum(i);
        s[0] += second_deriv_at_zero(theta.psi, ysum);
        s[1] += 2.0 / theta.psi - ysum;
    }
    return s;
}

Eigen::Matrix2d expmix_modified_info(const ExpMixTheta& theta, int n) {
    expmix_validate(theta);
    if (n < 1) throw Error("expmix_modified_info: n must be >= 1");
    Eigen::Matrix2d per;
    if (theta.lambda == 0.0) {
        // Gamma(2, psi) central moments: mu2 = 2/psi^2, mu3 = 4/psi^3,
        // mu4 = 24/psi^4. With entries ((Ysum-2/psi)^2 - mu2, 2/psi - Ysum):
        // Var of the first is mu4 - mu2^2, the cross covariance is -mu3.
        const double p2 = theta.psi * theta.psi;
        per(0, 0) = 20.0 / (p2 * p2);
        per(0, 1) = per(1, 0) = -4.0 / (p2 * theta.psi);
        per(1, 1) = 2.0 / p2;
    } else {
        // Raw-score covariance: scale the cancelled second moments back.
        const double e_xx = expect_ysum(theta, [&](double t) {
            const double x = xi_term(theta, t);
            return x * x;
        });
        const double e_xp = expect_ysum(theta, [&](double t) {
            return xi_term(theta, t) * spsi_term(theta, t);
        });
        const double e_pp = expect_ysum(theta, [&](double t) {
            const double p = spsi_term(theta, t);
            return p * p;
        });
        const double lam = theta.lambda;
        per(0, 0) = lam * lam * e_xx;
        per(0, 1) = per(1, 0) = lam * e_xp;
        per(1, 1) = e_pp;
    }
    return static_cast<double>(n) * per;
}

ExpMixData expmix_simulate(const ExpMixTheta& theta, int n, std::uint64_t seed) {
    expmix_validate(theta);
    ExpMixData data;
    data.y.resize(n, 2);
    for (int i = 0; i < n; ++i) {
        RngStream rng(seed, static_cast<std::uint64_t>(i));
        const double w = rng.uniform(-kSqrt3, kSqrt3);
        const double rate = theta.psi + theta.lambda * w;
        data.y(i, 0) = rng.exponential(rate);
        data.y(i, 1) = rng.exponential(rate);
    }
    return data;
}

ExpMixTheta ExpMixScoreModel::unpack(const ParameterPoint& theta) {
    ExpMixTheta th{theta.lambda[0], theta.psi[0]};
    expmix_validate(th);
    return th;
}

double ExpMixScoreModel::loglik(const ParameterPoint& theta) const {
    return expmix_loglik(unpack(theta), data_);
}

Eigen::VectorXd ExpMixScoreModel::modified_score_term(const ParameterPoint& theta,
                                                      const CriticalPattern&, int group) const {
    return expmix_cancelled_term(unpack(theta), data_.row_sum(group));
}

Eigen::MatrixXd ExpMixScoreModel::modified_info(const ParameterPoint& theta,
                                                const CriticalPattern&) const {
    const ExpMixTheta th = unpack(theta);
    Eigen::Matrix2d per;
    if (th.lambda == 0.0) {
        const double p2 = th.psi * th.psi;
        per(0, 0) = 20.0 / (p2 * p2);
        per(0, 1) = per(1, 0) = -4.0 / (p2 * th.psi);
        per(1, 1) = 2.0 / p2;
    } else {
        per(0, 0) = expect_ysum(th, [&](double t) {
            const double x = xi_term(th, t);
            return x * x;
        });
        per(0, 1) = per(1, 0) =
            expect_ysum(th, [&](double t) { return xi_term(th, t) * spsi_term(th, t); });
        per(1, 1) = expect_ysum(th, [&](double t) {
            const double p = spsi_term(th, t);
            return p * p;
        });
    }
    return static_cast<double>(data_.n()) * per;
}

}  // namespace critscore
