#pragma once

#include <vector>

#include "rtplan/errors.hpp"
#include "rtplan/linalg.hpp"

namespace rtplan {

struct NnlsOptions {
    double kkt_tol = 1e-10;  // scaled by max(1, ||A^T b||_inf)
    int max_outer = 0;       // 0 -> 3n + 30
};

/// Active-set nonnegative least squares on the normal equations
/// (the fast-NNLS formulation: works on G = A^T A and c = A^T b).
///
/// The Cholesky factor of the passive block is maintained incrementally:
/// adding a coordinate borders the factor, removing one re-triangularizes
/// with Givens rotations, so repeated solves against slowly changing
/// right-hand sides cost O(p^2) per active-set change instead of O(p^3).
/// `gram_version` must change whenever G changes.
class NnlsSolver {
public:
    /// Minimize 1/2 u^T G u - c^T u over u >= 0.
    Vec solve_gram(const Mat& G, const Vec& c, long gram_version,
                   const NnlsOptions& opts = {});

    /// KKT residual of a candidate: max over active coords of -(Gu - c)_j
    /// and over passive coords of |(Gu - c)_j|.
    static double kkt_residual(const Mat& G, const Vec& c, const Vec& u);

private:
    bool add_to_factor(const Mat& G, int j);  // false if numerically dependent
    void remove_from_factor(int pos);
    void rebuild_factor(const Mat& G);
    void solve_factor(const Vec& c, Vec& z) const;

    std::vector<int> order_;  // passive set in factor order
    Mat R_;                   // top-left p x p upper triangle in use
    int p_ = 0;
    Vec u_last_;
    long version_ = -1;
};

/// One-shot NNLS: minimize ||A u - b||^2 over u >= 0.
Vec nnls(const Mat& A, const Vec& b, const NnlsOptions& opts = {});

}  // namespace rtplan
