#pragma once

namespace critscore {

/// Regularized lower incomplete gamma P(a, x), series + continued fraction.
/// Absolute error below 1e-12 over the usable double range.
double gamma_p(double a, double x);

/// Chi-square CDF with df degrees of freedom. Domain error on df < 1 or x < 0.
double chisq_cdf(int df, double x);

/// Chi-square density (used internally by the quantile Newton polish).
double chisq_pdf(int df, double x);

/// Chi-square quantile: the x with chisq_cdf(df, x) = p, for p in [0, 1).
/// CDF/quantile round-trip holds to 1e-9.
double chisq_quantile(int df, double p);

}  // namespace critscore
