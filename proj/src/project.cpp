#include "rtplan/project.hpp"

#include <cmath>
#include <string>

namespace rtplan {

double constraint_value(const Vec& w, const Vec& gamma, const Vec& D_diag) {
    return gamma.dot(w) + w.dot(D_diag.cwiseProduct(w));
}

namespace {

// w(lambda) componentwise; lambda >= 0.
void eval_w(const Vec& v, const Vec& gamma, const Vec& D, double lambda, Vec& w) {
    w = (v.array() - 0.5 * lambda * gamma.array()) / (1.0 + lambda * D.array());
}

}  // namespace

Vec project_constraint(const Vec& v, const Vec& gamma, const Vec& D_diag, double C) {
    const long n = v.size();
    if (gamma.size() != n || D_diag.size() != n)
        throw DimensionError("projection operands differ in length");
    if (C <= 0) throw DomainError("constraint tolerance must be positive");
    if ((D_diag.array() < 0).any())
        throw DegenerateConstraintError("constraint diagonal has a negative entry");

    if (constraint_value(v, gamma, D_diag) <= C) return v;

    if (!v.allFinite())
        throw NumericalError("projection input is not finite");

    // Pure half-space: no quadratic part anywhere.
    if ((D_diag.array() == 0).all()) {
        const double g2 = gamma.squaredNorm();
        // g2 == 0 would mean the constraint value is identically 0 < C,
        // contradicting infeasibility of v.
        return v - gamma * ((gamma.dot(v) - C) / g2);
    }

    auto phi = [&](double lambda, Vec& w) {
        eval_w(v, gamma, D_diag, lambda, w);
        return constraint_value(w, gamma, D_diag) - C;
    };
    // phi is convex and strictly decreasing for lambda >= 0, with
    //   phi'(lambda) = -sum_i (gamma_i + 2 D_i v_i)^2 / (2 (1 + lambda D_i)^3),
    // so Newton from lambda = 0 approaches the root monotonically.
    const Vec numer = 0.5 * (gamma + 2.0 * D_diag.cwiseProduct(v)).array().square();
    const double tol = 1e-12 * std::max(1.0, C);

    Vec w(n);
    double lambda = 0.0;
    double f = phi(lambda, w);
    bool overshoot = false;
    double lo = 0.0, hi = 0.0;
    for (int it = 0; it < 200 && f > tol; ++it) {
        const double slope = -(numer.array() / (1.0 + lambda * D_diag.array()).cube()).sum();
        if (!(slope < 0))
            throw NumericalError("projection slope vanished while infeasible");
        const double next = lambda - f / slope;
        const double f_next = phi(next, w);
        if (f_next < -tol) {  // fp overshoot: fall back to bisection
            lo = lambda;
            hi = next;
            overshoot = true;
            break;
        }
        lambda = next;
        f = f_next;
    }
    if (f > tol && !overshoot) {
        // Newton stalled (extreme scales); bracket by doubling and bisect.
        lo = lambda;
        hi = std::max(1.0, 2.0 * lambda);
        int guard = 0;
        while (phi(hi, w) > 0) {
            lo = hi;
            hi *= 2.0;
            if (++guard > 1020)
                throw NumericalError("projection multiplier could not be bracketed");
        }
        overshoot = true;
    }
    if (overshoot) {
        for (int it = 0; it < 200; ++it) {
            const double mid = 0.5 * (lo + hi);
            const double f_mid = phi(mid, w);
            if (f_mid > tol)
                lo = mid;
            else if (f_mid < -tol)
                hi = mid;
            else {
                lambda = mid;
                break;
            }
            lambda = hi;
            if (hi - lo <= 1e-15 * std::max(1.0, hi)) break;
        }
    }

    eval_w(v, gamma, D_diag, lambda, w);
    return w;
}

}  // namespace rtplan
