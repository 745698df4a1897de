#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <functional>
#include <thread>
#include <vector>

namespace rtplan {

using Vec = Eigen::VectorXd;
using IVec = Eigen::VectorXi;
using Mat = Eigen::MatrixXd;
using SpMat = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

/// Run fn(i) for i in [0, n) on up to `jobs` threads.
/// Work is split into contiguous chunks so results written to preallocated
/// slots are identical for any job count.
inline void parallel_for(int n, int jobs, const std::function<void(int)>& fn) {
    if (n <= 0) return;
    jobs = std::max(1, std::min(jobs, n));
    if (jobs == 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> workers;
    workers.reserve(jobs);
    const int chunk = (n + jobs - 1) / jobs;
    for (int t = 0; t < jobs; ++t) {
        const int lo = t * chunk;
        const int hi = std::min(n, lo + chunk);
        if (lo >= hi) break;
        workers.emplace_back([lo, hi, &fn] {
            for (int i = lo; i < hi; ++i) fn(i);
        });
    }
    for (auto& w : workers) w.join();
}

}  // namespace rtplan
