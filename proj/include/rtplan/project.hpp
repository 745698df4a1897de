#pragma once

#include "rtplan/errors.hpp"
#include "rtplan/linalg.hpp"

namespace rtplan {

/// Euclidean projection of v onto the convex set
///   Omega = { w : gamma^T w + w^T diag(D) w <= C },   D >= 0, C > 0.
///
/// KKT stationarity gives w_i(lambda) = (v_i - lambda gamma_i / 2) / (1 + lambda D_i)
/// with lambda >= 0 the multiplier of the quadratic constraint; for an
/// infeasible v the multiplier solves the secular equation g(w(lambda)) = C,
/// which is strictly decreasing in lambda and bracketed by doubling.
/// Coordinates with D_i = 0 reduce to the linear half-space term and are
/// handled by the same system; an all-zero D is the plain half-space
/// projection in closed form.
///
/// Throws DegenerateConstraintError for negative D entries and
/// NumericalError if the root cannot be bracketed.
Vec project_constraint(const Vec& v, const Vec& gamma, const Vec& D_diag, double C);

/// Constraint value gamma^T w + w^T diag(D) w.
double constraint_value(const Vec& w, const Vec& gamma, const Vec& D_diag);

}  // namespace rtplan
