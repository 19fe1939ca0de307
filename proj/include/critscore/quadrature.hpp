#pragma once

#include <cmath>
#include <vector>

namespace critscore {

/// Gauss-Legendre rule on [-1, 1]; nodes by Newton iteration on P_n.
struct GaussLegendre {
    std::vector<double> nodes;
    std::vector<double> weights;

    explicit GaussLegendre(int n) {
        nodes.resize(n);
        weights.resize(n);
        for (int i = 0; i < n; ++i) {
            double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
            double dp = 0.0;
            for (int it = 0; it < 100; ++it) {
                double p0 = 1.0, p1 = x;
                for (int k = 2; k <= n; ++k) {
                    const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n * (x * p1 - p0) / (x * x - 1.0);
                const double dx = p1 / dp;
                x -= dx;
                if (std::fabs(dx) < 1e-15) break;
            }
            nodes[i] = x;
            weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
        }
    }

    /// Integrate f over [a, b].
    template <typename F>
    double integrate(F&& f, double a, double b) const {
        const double c = 0.5 * (a + b);
        const double h = 0.5 * (b - a);
        double sum = 0.0;
        for (std::size_t i = 0; i < nodes.size(); ++i) sum += weights[i] * f(c + h * nodes[i]);
        return h * sum;
    }

    /// Composite rule over `panels` equal panels of [a, b].
    template <typename F>
    double integrate_panels(F&& f, double a, double b, int panels) const {
        double sum = 0.0;
        const double w = (b - a) / panels;
        for (int p = 0; p < panels; ++p) sum += integrate(f, a + p * w, a + (p + 1) * w);
        return sum;
    }
};

/// Shared 64-node rule (the generic marginalization path).
const GaussLegendre& gl64();

/// 32-node rule for composite expectation integrals.
const GaussLegendre& gl32();

}  // namespace critscore
