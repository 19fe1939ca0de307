#include "critscore/parameter.hpp"

namespace critscore {

CriticalPattern critical_pattern(const ParameterPoint& theta, double zero_tol) {
    if (zero_tol < 0.0) throw std::domain_error("critical_pattern: zero_tol must be >= 0");
    const auto lay = theta.layout();
    CriticalPattern pat;
    pat.k.assign(lay.dim(), 1);
    for (int j = 0; j < lay.n_scale; ++j)
        if (theta.lambda[j] <= zero_tol) pat.k[j] = 2;
    pat.standard_basis = true;
    return pat;
}

}  // namespace critscore
