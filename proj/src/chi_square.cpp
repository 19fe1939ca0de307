#include "critscore/chi_square.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace critscore {

namespace {

// Lower regularized incomplete gamma by its power series, for x < a + 1.
double gamma_p_series(double a, double x) {
    double ap = a;
    double sum = 1.0 / a;
    double del = sum;
    for (int i = 0; i < 500; ++i) {
        ap += 1.0;
        del *= x / ap;
        sum += del;
        if (std::fabs(del) < std::fabs(sum) * 1e-17) break;
    }
    return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Upper regularized incomplete gamma by continued fraction (modified Lentz),
// for x >= a + 1.
double gamma_q_contfrac(double a, double x) {
    const double tiny = 1e-300;
    double b = x + 1.0 - a;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i <= 500; ++i) {
        const double an = -i * (i - a);
        b += 2.0;
        d = an * d + b;
        if (std::fabs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < 1e-16) break;
    }
    return h * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

}  // namespace

double gamma_p(double a, double x) {
    if (!(a > 0.0)) throw std::domain_error("gamma_p: a must be positive");
    if (x < 0.0) throw std::domain_error("gamma_p: x must be nonnegative");
    if (x == 0.0) return 0.0;
    if (x < a + 1.0) return gamma_p_series(a, x);
    return 1.0 - gamma_q_contfrac(a, x);
}

double chisq_cdf(int df, double x) {
    if (df < 1) throw std::domain_error("chisq_cdf: df must be >= 1");
    if (x < 0.0) throw std::domain_error("chisq_cdf: x must be nonnegative");
    return gamma_p(0.5 * df, 0.5 * x);
}

double chisq_pdf(int df, double x) {
    if (df < 1) throw std::domain_error("chisq_pdf: df must be >= 1");
    if (x < 0.0) return 0.0;
    if (x == 0.0) return df == 2 ? 0.5 : (df == 1 ? std::numeric_limits<double>::infinity() : 0.0);
    const double a = 0.5 * df;
    return std::exp((a - 1.0) * std::log(x) - 0.5 * x - a * std::log(2.0) - std::lgamma(a));
}

double chisq_quantile(int df, double p) {
    if (df < 1) throw std::domain_error("chisq_quantile: df must be >= 1");
    if (p < 0.0 || p >= 1.0) throw std::domain_error("chisq_quantile: p must be in [0, 1)");
    if (p == 0.0) return 0.0;

    // Bracket the root, then bisect; a few Newton steps polish the result.
    double lo = 0.0;
    double hi = df + 10.0;
    while (chisq_cdf(df, hi) < p) hi *= 2.0;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (chisq_cdf(df, mid) < p) {
            lo = mid;
        } else {
            hi = mid;
        }
        if (hi - lo < 1e-12 * (1.0 + hi)) break;
    }
    double x = 0.5 * (lo + hi);
    for (int i = 0; i < 4; ++i) {
        const double f = chisq_cdf(df, x) - p;
        const double d = chisq_pdf(df, x);
        if (d <= 0.0 || !std::isfinite(d)) break;
        const double step = f / d;
        const double nx = x - step;
        if (nx <= lo || nx >= hi) break;
        x = nx;
        if (std::fabs(step) < 1e-14 * (1.0 + x)) break;
    }
    return x;
}

}  // namespace critscore
