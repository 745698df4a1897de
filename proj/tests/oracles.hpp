// Independent reference computations the solver tests check against.
// These deliberately avoid the library's solution paths.
#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <vector>

#include "rtplan/linalg.hpp"

namespace oracle {

using rtplan::Mat;
using rtplan::Vec;

/// Coordinatewise numeric minimizer of -x^T diag(B) x + ||x-y||^2/(2 eta0):
/// bisection on the sign of a central-difference derivative (exact for a
/// quadratic up to rounding), so flat minima resolve far below 1e-8.
inline Vec prox_numeric(const Vec& y, const Vec& B, double eta0) {
    Vec x(y.size());
    for (int j = 0; j < y.size(); ++j) {
        auto g = [&](double t) {
            return -B[j] * t * t + (t - y[j]) * (t - y[j]) / (2.0 * eta0);
        };
        const double h = std::max(1.0, std::abs(y[j]));
        auto slope = [&](double t) { return (g(t + h) - g(t - h)) / (2.0 * h); };
        double lo = -1000.0 * (std::abs(y[j]) + 1.0);
        double hi = -lo;
        for (int it = 0; it < 200; ++it) {
            const double mid = 0.5 * (lo + hi);
            (slope(mid) < 0 ? lo : hi) = mid;
        }
        x[j] = 0.5 * (lo + hi);
    }
    return x;
}

/// Exhaustive active-set NNLS: best least-squares objective over all column
/// subsets whose unconstrained solution is nonnegative.
inline double nnls_enumeration_objective(const Mat& A, const Vec& b) {
    const int n = static_cast<int>(A.cols());
    double best = b.squaredNorm();  // empty set
    for (unsigned mask = 1; mask < (1u << n); ++mask) {
        std::vector<int> cols;
        for (int j = 0; j < n; ++j)
            if (mask & (1u << j)) cols.push_back(j);
        Mat S(A.rows(), cols.size());
        for (size_t k = 0; k < cols.size(); ++k) S.col(k) = A.col(cols[k]);
        const Vec x = S.colPivHouseholderQr().solve(b);
        if ((x.array() < -1e-9).any()) continue;
        best = std::min(best, (S * x.cwiseMax(0.0) - b).squaredNorm());
    }
    return best;
}

/// Feasible grid around the projection candidate: returns the closest
/// distance to v over ~`budget` samples of {w : gamma.w + w.D.w <= C}.
inline double projection_grid_best(const Vec& v, const Vec& gamma, const Vec& D, double C,
                                   const Vec& w_candidate, long budget = 10000) {
    const int d = static_cast<int>(v.size());
    const int per_dim = std::max(2, static_cast<int>(std::floor(std::pow(
                                        static_cast<double>(budget), 1.0 / d))));
    Vec lo(d), hi(d);
    for (int i = 0; i < d; ++i) {
        const double a = std::min(v[i], w_candidate[i]);
        const double b = std::max(v[i], w_candidate[i]);
        const double pad = 0.25 * (b - a) + 0.5;
        lo[i] = a - pad;
        hi[i] = b + pad;
    }
    double best = std::numeric_limits<double>::infinity();
    std::vector<int> idx(d, 0);
    Vec w(d);
    for (;;) {
        for (int i = 0; i < d; ++i)
            w[i] = lo[i] + (hi[i] - lo[i]) * idx[i] / (per_dim - 1);
        if (gamma.dot(w) + w.dot(D.cwiseProduct(w)) <= C)
            best = std::min(best, (w - v).norm());
        int i = 0;
        while (i < d && ++idx[i] == per_dim) idx[i++] = 0;
        if (i == d) break;
    }
    return best;
}

/// Euclidean disk dilation by breadth-first expansion (margin oracle).
inline std::set<int> dilate_bfs(const std::vector<int>& mask, int rows, int cols,
                                int radius) {
    std::set<int> out;
    for (int v : mask) {
        const int r = v / cols, c = v % cols;
        for (int rr = std::max(0, r - radius); rr <= std::min(rows - 1, r + radius); ++rr)
            for (int cc = std::max(0, c - radius); cc <= std::min(cols - 1, c + radius);
                 ++cc)
                if ((rr - r) * (rr - r) + (cc - c) * (cc - c) <= radius * radius)
                    out.insert(rr * cols + cc);
    }
    return out;
}

}  // namespace oracle
