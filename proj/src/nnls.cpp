#include "rtplan/nnls.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace rtplan {

bool NnlsSolver::add_to_factor(const Mat& G, int j) {
    if (R_.rows() <= p_) {
        const long cap = std::max<long>(16, std::max<long>(2 * R_.rows(), p_ + 1));
        R_.conservativeResize(cap, cap);
    }
    Vec g(p_);
    for (int i = 0; i < p_; ++i) g[i] = G(order_[i], j);
    const double gjj = G(j, j);
    double d = gjj;
    if (p_ > 0) {
        Vec r12 = R_.topLeftCorner(p_, p_)
                      .transpose()
                      .triangularView<Eigen::Lower>()
                      .solve(g);
        d -= r12.squaredNorm();
        R_.col(p_).head(p_) = r12;
    }
    if (!(d > 1e-12 * std::max(gjj, 1e-300))) return false;  // dependent column
    R_(p_, p_) = std::sqrt(d);
    order_.push_back(j);
    ++p_;
    return true;
}

void NnlsSolver::remove_from_factor(int pos) {
    const int p_old = p_;
    for (int col = pos; col < p_old - 1; ++col)
        R_.col(col).head(p_old) = R_.col(col + 1).head(p_old);
    order_.erase(order_.begin() + pos);
    --p_;
    // Columns pos.. now carry one subdiagonal entry each; chase it away.
    for (int k = pos; k < p_; ++k) {
        const double a = R_(k, k), b = R_(k + 1, k);
        if (b == 0.0) continue;
        const double r = std::hypot(a, b);
        const double cth = a / r, sth = b / r;
        for (int col = k; col < p_; ++col) {
            const double x = R_(k, col), y = R_(k + 1, col);
            R_(k, col) = cth * x + sth * y;
            R_(k + 1, col) = -sth * x + cth * y;
        }
        R_(k + 1, k) = 0.0;
    }
}

void NnlsSolver::rebuild_factor(const Mat& G) {
    const std::vector<int> previous = std::move(order_);
    order_.clear();
    p_ = 0;
    for (int j : previous)
        if (!add_to_factor(G, j) && u_last_.size() > j) u_last_[j] = 0.0;
}

void NnlsSolver::solve_factor(const Vec& c, Vec& z) const {
    z.resize(p_);
    for (int i = 0; i < p_; ++i) z[i] = c[order_[i]];
    const auto R = R_.topLeftCorner(p_, p_);
    R.transpose().triangularView<Eigen::Lower>().solveInPlace(z);
    R.triangularView<Eigen::Upper>().solveInPlace(z);
}

Vec NnlsSolver::solve_gram(const Mat& G, const Vec& c, long gram_version,
                           const NnlsOptions& opts) {
    const int n = static_cast<int>(c.size());
    if (G.rows() != n || G.cols() != n)
        throw DimensionError("NNLS gram matrix does not match rhs length");
    const double scale = std::max(1.0, c.lpNorm<Eigen::Infinity>());
    const double tol = opts.kkt_tol * scale;
    const int max_outer = opts.max_outer > 0 ? opts.max_outer : 3 * n + 30;

    const bool shape_ok =
        u_last_.size() == n &&
        std::all_of(order_.begin(), order_.end(), [&](int j) { return j < n; });
    if (version_ != gram_version || !shape_ok) {
        if (!shape_ok) {
            order_.clear();
            p_ = 0;
            u_last_ = Vec::Zero(n);
        } else {
            rebuild_factor(G);  // same sparsity, new weights
        }
        version_ = gram_version;
    }

    Vec u = u_last_.cwiseMax(0.0);
    std::vector<char> in_passive(n, 0);
    std::vector<char> banned(n, 0);  // degenerate candidates, cleared on progress
    for (int j : order_) in_passive[j] = 1;
    for (int j = 0; j < n; ++j)
        if (!in_passive[j]) u[j] = 0.0;

    Vec w(n), z;
    bool need_inner = p_ > 0;  // re-optimize the warm passive set first
    bool refreshed = false;
    for (int outer = 0; outer < max_outer; ++outer) {
        if (!need_inner) {
            w.noalias() = c - G * u;
            int best = -1;
            double best_w = tol;
            for (int j = 0; j < n; ++j)
                if (!in_passive[j] && !banned[j] && w[j] > best_w) {
                    best_w = w[j];
                    best = j;
                }
            if (best < 0) {
                // Passive gradients must vanish; a drifted incremental
                // factor shows up here and forces one rebuild.
                double passive_res = 0.0;
                for (int i = 0; i < p_; ++i)
                    passive_res = std::max(passive_res, std::abs(w[order_[i]]));
                if (passive_res > 16.0 * tol && !refreshed) {
                    rebuild_factor(G);
                    std::fill(in_passive.begin(), in_passive.end(), 0);
                    for (int j : order_) in_passive[j] = 1;
                    for (int j = 0; j < n; ++j)
                        if (!in_passive[j]) u[j] = 0.0;
                    refreshed = true;
                    need_inner = p_ > 0;
                    continue;
                }
                u_last_ = u;
                return u;  // KKT holds (up to banned degenerate coords)
            }
            if (!add_to_factor(G, best)) {
                banned[best] = 1;
                continue;
            }
            in_passive[best] = 1;
        }
        need_inner = false;

        bool progressed = false;
        for (int inner = 0; inner <= p_ + 4 && p_ > 0; ++inner) {
            solve_factor(c, z);
            if ((z.array() > 0).all()) {
                u.setZero();
                for (int i = 0; i < p_; ++i) u[order_[i]] = z[i];
                progressed = true;
                break;
            }
            double alpha = 1.0;
            for (int i = 0; i < p_; ++i)
                if (!(z[i] > 0)) {
                    const double ui = u[order_[i]];
                    const double denom = ui - z[i];
                    if (denom > 0) alpha = std::min(alpha, ui / denom);
                    if (!std::isfinite(z[i])) alpha = 0.0;
                }
            if (alpha > 0.0) {
                for (int i = 0; i < p_; ++i) {
                    const int j = order_[i];
                    double uj = u[j] + alpha * (z[i] - u[j]);
                    if (!(z[i] > 0) && uj <= 1e-12 * scale) uj = 0.0;
                    u[j] = uj;
                }
                progressed = true;
            }
            // Drop every zeroed coordinate (at least the blocking one).
            int removed = 0;
            for (int i = p_ - 1; i >= 0; --i)
                if (u[order_[i]] <= 0.0) {
                    in_passive[order_[i]] = 0;
                    u[order_[i]] = 0.0;
                    remove_from_factor(i);
                    ++removed;
                }
            if (alpha <= 0.0 && removed == 0)
                throw NumericalError("NNLS inner loop stalled");
        }
        if (p_ == 0) u.setZero();
        if (progressed) std::fill(banned.begin(), banned.end(), 0);
    }
    throw NumericalError("NNLS iteration cap exceeded (" + std::to_string(max_outer) +
                         " outer iterations)");
}

double NnlsSolver::kkt_residual(const Mat& G, const Vec& c, const Vec& u) {
    const Vec grad = G * u - c;
    double res = 0.0;
    for (int j = 0; j < u.size(); ++j) {
        if (u[j] > 0)
            res = std::max(res, std::abs(grad[j]));
        else
            res = std::max(res, std::max(0.0, -grad[j]));
    }
    return res;
}

Vec nnls(const Mat& A, const Vec& b, const NnlsOptions& opts) {
    if (A.rows() != b.size())
        throw DimensionError("NNLS matrix rows do not match rhs length");
    const Mat G = A.transpose() * A;
    const Vec c = A.transpose() * b;
    NnlsSolver solver;
    return solver.solve_gram(G, c, 0, opts);
}

}  // namespace rtplan
