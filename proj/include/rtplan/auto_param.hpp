#pragma once

#include "rtplan/bcd.hpp"

namespace rtplan {

struct AutoParamOptions {
    double delta_eta = 0.5;
    /// Initial eta as a fraction of the curvature threshold 1/(2 max B_ii).
    /// At the threshold itself the prox is degenerate, so we start one
    /// decrease step below it.
    double init_eta_scale = 0.5;
    double bcd_tol = 1e-6;
    int bcd_max_iters = 2000;
    /// Sweep budget while still infeasible; penalty updates come cheaper
    /// than grinding a solve that the next eta change will perturb anyway.
    int feas_bcd_max_iters = 300;
    double feas_tol = 1e-6;      // relative constraint tolerance
    int feas_max_rounds = 60;    // decreases allowed per constraint
    int opt_max_rounds = 30;     // eta0 decreases in the optimality phase
    int opt_stall_rounds = 3;    // stop after this many non-improving rounds
    double opt_stall_tol = 1e-4; // relative tumor-BE gain counting as progress
    /// Re-solve from the caller's u_init instead of warm-starting from the
    /// previous iterate.
    bool restart_from_initial = false;
    IterationSink sink;
};

struct AutoParamResult {
    Vec u;                    // last feasible iterate
    RelaxationParams params;  // penalties that produced it
    Vec constraint_values;
    double tumor_be = 0.0;
    SolveDiagnostics diag;
};

/// Lower-level solve with automatic penalty selection: start all penalties
/// at init_eta_scale times the curvature threshold, shrink the eta of every
/// violated constraint until feasible, then shrink eta0 while feasibility
/// holds; the returned fluence is always the last feasible iterate.
///
/// Throws InfeasibleError (with the violating constraint list) if the
/// feasibility phase exhausts its per-constraint budget.
AutoParamResult auto_param_solve(const GeneralizedSystem& sys, const Vec& u_init,
                                 const AutoParamOptions& opts = {});

}  // namespace rtplan
