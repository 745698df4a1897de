#pragma once

#include <functional>
#include <vector>

#include "rtplan/model.hpp"
#include "rtplan/nnls.hpp"

namespace rtplan {

/// Penalty parameters of the relaxed fixed-N problem.
struct RelaxationParams {
    double eta0 = 0.0;   // tumor proximity penalty, must satisfy the
                         // curvature bound eta0 <= 1/(2 max B_ii)
    Vec eta;             // one entry per flat generalized constraint
    double delta_eta = 0.5;  // multiplicative decrease factor, in (0,1)
    double bcd_tol = 1e-6;   // relative objective-change stopping tolerance
    int bcd_max_iters = 2000;
};

/// Primal block-coordinate state: fluence plus auxiliary variables.
/// Every w[i] satisfies its own constraint (it is a projection output).
struct LowerState {
    Vec u;
    Vec w0;
    std::vector<Vec> w;  // mean entry: stacked dim; max entry: dim M
};

struct BcdDiagnostics {
    int sweeps = 0;
    bool converged = false;
    bool hit_cap = false;
    /// The relaxed objective ran away (penalties too weak to bound it);
    /// the caller is expected to strengthen them and restart.
    bool diverged = false;
    double final_objective = 0.0;
    double max_rel_increase = 0.0;  // monotonicity audit
    std::vector<double> objectives;  // one per sweep
};

/// sweep index, P4 objective, max relative constraint violation of u
using IterationSink = std::function<void(int, double, double)>;

/// Caches everything that survives across sweeps and re-solves on one
/// generalized system: per-modality normal matrices (rebuilt only when the
/// penalties change) and warm NNLS active sets.
class BcdWorkspace {
public:
    explicit BcdWorkspace(const GeneralizedSystem& sys);

    const GeneralizedSystem& system() const { return *sys_; }

    /// Rebuild the weighted normal matrices if `params` changed.
    void refresh(const RelaxationParams& params);

    /// Exact block minimization over u >= 0 for fixed auxiliaries.
    /// The stacked least-squares problem decouples per modality because
    /// every generalized matrix is block-diagonal.
    Vec update_u(const LowerState& state, const RelaxationParams& params,
                 const Vec& u_prev);

    double p4_objective(const LowerState& state, const RelaxationParams& params) const;

private:
    const GeneralizedSystem* sys_;
    std::vector<Mat> tumor_gram_;                 // per modality
    std::vector<std::vector<Mat>> mean_gram_;     // [group][modality]
    std::vector<Mat> normal_;                     // weighted, per modality
    std::vector<NnlsSolver> nnls_;
    Vec eta_cache_;
    double eta0_cache_ = -1.0;
    long version_ = 0;
};

struct BcdResult {
    LowerState state;
    BcdDiagnostics diag;
};

/// Block-coordinate descent on the relaxed fixed-N problem:
/// w0 <- prox, w_i <- projection, u <- stacked NNLS, until the relative
/// objective change drops below params.bcd_tol or the sweep cap is hit.
BcdResult bcd_solve(const GeneralizedSystem& sys, const RelaxationParams& params,
                    const Vec& u_init, BcdWorkspace* workspace = nullptr,
                    const IterationSink& sink = {});

/// Standalone u-update (exposed for testing); equivalent to one
/// BcdWorkspace::update_u call on a fresh workspace.
Vec u_update(const LowerState& state, const GeneralizedSystem& sys,
             const RelaxationParams& params);

/// Parameters at the curvature threshold scaled by `scale`, all penalties equal.
RelaxationParams initial_params(const GeneralizedSystem& sys, double scale,
                                double delta_eta, double bcd_tol, int bcd_max_iters);

}  // namespace rtplan
