#include "critscore/nelder_mead.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace critscore {

NelderMeadResult nelder_mead(const std::function<double(const Eigen::VectorXd&)>& f,
                             const Eigen::VectorXd& x0, const Eigen::VectorXd& step, int max_iter,
                             double f_tol, double x_tol) {
    const int n = static_cast<int>(x0.size());
    const double alpha = 1.0, gamma = 2.0, rho = 0.5, shrink = 0.5;

    std::vector<Eigen::VectorXd> x(n + 1, x0);
    std::vector<double> fx(n + 1);
    NelderMeadResult res;
    for (int j = 0; j < n; ++j) x[j + 1][j] += step[j];
    for (int j = 0; j <= n; ++j) {
        fx[j] = f(x[j]);
        ++res.evaluations;
    }

    std::vector<int> ord(n + 1);
    for (int it = 0; it < max_iter; ++it) {
        std::iota(ord.begin(), ord.end(), 0);
        std::sort(ord.begin(), ord.end(), [&](int a, int b) { return fx[a] < fx[b]; });
        const int best = ord[0], worst = ord[n], second_worst = ord[n - 1];

        double diam = 0.0;
        for (int j = 0; j <= n; ++j) diam = std::max(diam, (x[j] - x[best]).lpNorm<Eigen::Infinity>());
        if (std::fabs(fx[worst] - fx[best]) <= f_tol * (1.0 + std::fabs(fx[best])) &&
            diam <= x_tol * (1.0 + x[best].lpNorm<Eigen::Infinity>())) {
            res.converged = true;
            break;
        }

        Eigen::VectorXd centroid = Eigen::VectorXd::Zero(n);
        for (int j = 0; j <= n; ++j)
            if (j != worst) centroid += x[j];
        centroid /= n;

        const Eigen::VectorXd xr = centroid + alpha * (centroid - x[worst]);
        const double fr = f(xr);
        ++res.evaluations;
        if (fr < fx[best]) {
            const Eigen::VectorXd xe = centroid + gamma * (xr - centroid);
            const double fe = f(xe);
            ++res.evaluations;
            if (fe < fr) {
                x[worst] = xe;
                fx[worst] = fe;
            } else {
                x[worst] = xr;
                fx[worst] = fr;
            }
        } else if (fr < fx[second_worst]) {
            x[worst] = xr;
            fx[worst] = fr;
        } else {
            const bool outside = fr < fx[worst];
            const Eigen::VectorXd xc =
                outside ? (centroid + rho * (xr - centroid)).eval()
                        : (centroid + rho * (x[worst] - centroid)).eval();
            const double fc = f(xc);
            ++res.evaluations;
            if (fc < std::min(fr, fx[worst])) {
                x[worst] = xc;
                fx[worst] = fc;
            } else {
                for (int j = 0; j <= n; ++j) {
                    if (j == best) continue;
                    x[j] = x[best] + shrink * (x[j] - x[best]);
                    fx[j] = f(x[j]);
                    ++res.evaluations;
                }
            }
        }
    }

    int best = 0;
    for (int j = 1; j <= n; ++j)
        if (fx[j] < fx[best]) best = j;
    res.x = x[best];
    res.f = fx[best];
    return res;
}

}  // namespace critscore
