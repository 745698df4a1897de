#include "rtplan/prox.hpp"

#include <string>

namespace rtplan {

Vec prox_neg_quadratic(const Vec& y, const Vec& B_diag, double eta0) {
    if (eta0 <= 0) throw DomainError("prox penalty parameter must be positive");
    if (y.size() != B_diag.size())
        throw DimensionError("prox operands differ in length");
    if ((B_diag.array() < 0).any())
        throw DomainError("prox curvature diagonal must be nonnegative");

    const double half_inv = 1.0 / (2.0 * eta0);
    const double worst = B_diag.size() ? B_diag.maxCoeff() : 0.0;
    if (worst - half_inv > 0)
        throw UnboundedProxError("prox unbounded: max curvature " + std::to_string(worst) +
                                 " exceeds 1/(2 eta0) = " + std::to_string(half_inv));

    Vec x(y.size());
    for (int j = 0; j < y.size(); ++j) {
        const double denom = 1.0 - 2.0 * eta0 * B_diag[j];
        if (denom == 0.0)
            throw DegenerateProxError("prox denominator is zero at coordinate " +
                                      std::to_string(j) + " (eta0 at the threshold)");
        x[j] = y[j] / denom;
    }
    return x;
}

}  // namespace rtplan
