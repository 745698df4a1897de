#pragma once

#include "rtplan/errors.hpp"
#include "rtplan/linalg.hpp"

namespace rtplan {

/// Proximal step of the concave quadratic -x^T diag(B) x:
///   argmin_x { -x^T diag(B) x + ||x - y||^2 / (2 eta0) }.
///
/// Well-defined only while eta0 stays below 1 / (2 max_i B_i); componentwise
/// solution y_j / (1 - 2 eta0 B_j).
///
/// Throws UnboundedProxError when some B_i > 1/(2 eta0) and
/// DegenerateProxError when a denominator is exactly zero.
Vec prox_neg_quadratic(const Vec& y, const Vec& B_diag, double eta0);

}  // namespace rtplan
