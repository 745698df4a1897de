#pragma once

#include <optional>

#include "rtplan/auto_param.hpp"
#include "rtplan/model.hpp"

namespace rtplan {

/// Upper-level (fractionation) optimizer settings. Trust-region constants
/// follow the library defaults we fixed for the linearly constrained
/// continuous problem; all are config-exposed.
struct UpperConfig {
    std::vector<Vec> initial_guesses;  // empty -> default seeds
    int tr_max_iters = 8;
    double fd_step = 0.25;        // forward-difference step, fractions
    double tr_radius_init = 2.0;  // fractions
    double tr_shrink = 0.5;
    double tr_grow = 2.0;
    double tr_accept = 0.1;       // acceptance ratio threshold
    double tr_radius_min = 0.1;
    int jobs = 1;
    long grid_cap = 5000;  // brute-force guard
    AutoParamOptions lower;
};

/// Integer value-function samples over the feasible fraction grid.
struct ValueSurface {
    struct Sample {
        IVec N;
        double value = 0.0;  // +inf marks an infeasible lower level
    };
    int modalities = 0;
    int N_max = 0;
    std::vector<Sample> samples;

    /// Index of the argmin sample (first hit on ties).
    int optimum_index() const;
    const Sample& optimum() const { return samples.at(optimum_index()); }
};

/// Multi-start seeds: axis-extreme points, the balanced point, and all-ones.
std::vector<Vec> default_initial_guesses(int M, int N_max);

/// Relaxed value function V(N): assemble at N, solve the lower level from
/// u_init, return the minimization objective F at the optimum.
/// InfeasibleError propagates with the offending N in the message.
double value_function(const FractionationPlan& plan, const ProblemSpec& spec,
                      const Vec& u_init, const AutoParamOptions& lower = {});

/// Euclidean projection onto { N >= 0, lo <= sum N <= hi }.
Vec project_plan(const Vec& N, double lo, double hi);

/// Round to the nearest integer plan (half-up), then restore the total-
/// fraction bounds by stepping the coordinate that moves the least.
IVec round_plan(const Vec& N, int N_max);

/// Lower-level solve at one fixed plan, packaged as a PlanResult.
/// Throws InfeasibleError when no feasible fluence exists at that plan.
PlanResult solve_fixed_plan(const ProblemSpec& spec, const Vec& N, const Vec& u_init,
                            const AutoParamOptions& lower = {});

/// Trust-region multi-start optimization of the fractionation schedule,
/// integer rounding, and a final lower-level re-solve at each integer
/// candidate (the integer starts are kept as candidates, so the result is
/// never worse than the best start).
PlanResult optimize_fractionation(const ProblemSpec& spec, const UpperConfig& cfg,
                                  const Vec& u_init);

/// Evaluate V on the whole integer grid 1 <= sum N <= N_max.
/// Throws ConfigError when the grid exceeds cfg.grid_cap.
ValueSurface brute_force(const ProblemSpec& spec, const Vec& u_init,
                         const UpperConfig& cfg = {});

}  // namespace rtplan
