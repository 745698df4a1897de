#include "rtplan/auto_param.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace rtplan {

namespace {

std::vector<int> violated_constraints(const Vec& be, const GeneralizedSystem& sys,
                                      double feas_tol) {
    std::vector<int> out;
    for (int i = 0; i < sys.constraint_count(); ++i)
        if (be[i] > sys.constraints()[i].C * (1.0 + feas_tol)) out.push_back(i);
    return out;
}

std::string describe(const std::vector<int>& violated, const GeneralizedSystem& sys,
                     const Vec& be) {
    std::ostringstream os;
    os << "infeasible after the feasibility budget:";
    int listed = 0;
    for (int i : violated) {
        const auto& c = sys.constraints()[i];
        os << " " << c.oar;
        if (c.voxel >= 0) os << "@" << c.voxel;
        os << " (" << be[i] << " > " << c.C << ")";
        if (++listed == 8 && static_cast<int>(violated.size()) > 8) {
            os << " ... +" << violated.size() - 8 << " more";
            break;
        }
    }
    return os.str();
}

}  // namespace

AutoParamResult auto_param_solve(const GeneralizedSystem& sys, const Vec& u_init,
                                 const AutoParamOptions& opts) {
    RelaxationParams params = initial_params(sys, opts.init_eta_scale, opts.delta_eta,
                                             opts.bcd_tol, opts.bcd_max_iters);
    BcdWorkspace ws(sys);
    AutoParamResult res;
    res.diag.feasible = false;

    Vec u_start = u_init;
    bool last_diverged = false;
    auto run = [&](const RelaxationParams& p, int sweep_budget) {
        RelaxationParams pb = p;
        pb.bcd_max_iters = sweep_budget;
        BcdResult r = bcd_solve(sys, pb, opts.restart_from_initial ? u_init : u_start, &ws,
                                opts.sink);
        res.diag.bcd_sweeps += r.diag.sweeps;
        ++res.diag.lower_solves;
        res.diag.hit_sweep_cap = res.diag.hit_sweep_cap || r.diag.hit_cap;
        res.diag.max_rel_obj_increase =
            std::max(res.diag.max_rel_obj_increase, r.diag.max_rel_increase);
        // Warm-start the next solve unless this one ran away; a capped but
        // finite state is still a usable starting point.
        last_diverged = r.diag.diverged;
        u_start = last_diverged ? u_init : r.state.u;
        return u_start;
    };

    Vec u = run(params, opts.feas_bcd_max_iters);
    Vec be = constraint_be(u, sys);

    // Feasibility phase: shrink the eta of every violated constraint.
    // A diverged relaxation means the penalties as a whole are too weak,
    // so tighten all of them.
    std::vector<int> rounds(sys.constraint_count(), 0);
    for (;;) {
        std::vector<int> violated = violated_constraints(be, sys, opts.feas_tol);
        if (last_diverged) {
            violated.resize(sys.constraint_count());
            for (int i = 0; i < sys.constraint_count(); ++i) violated[i] = i;
        }
        if (violated.empty()) {
            // Converge the feasible point at full precision before moving on.
            u = run(params, opts.bcd_max_iters);
            be = constraint_be(u, sys);
            if (violated_constraints(be, sys, opts.feas_tol).empty() && !last_diverged)
                break;
            continue;
        }
        for (int i : violated) {
            if (rounds[i] >= opts.feas_max_rounds)
                throw InfeasibleError(describe(violated, sys, be), violated);
            params.eta[i] *= params.delta_eta;
            ++rounds[i];
        }
        ++res.diag.feasibility_rounds;
        u = run(params, opts.feas_bcd_max_iters);
        be = constraint_be(u, sys);
    }

    // Optimality phase: shrink eta0 while the solution stays feasible,
    // keeping the last feasible iterate.
    res.u = u;
    res.params = params;
    res.constraint_values = be;
    res.tumor_be = tumor_be(u, sys);
    int stall = 0;
    for (int round = 0; round < opts.opt_max_rounds; ++round) {
        RelaxationParams next = params;
        next.eta0 *= next.delta_eta;
        const Vec u_try = run(next, opts.bcd_max_iters);
        ++res.diag.optimality_rounds;
        if (last_diverged) break;
        const Vec be_try = constraint_be(u_try, sys);
        if (!violated_constraints(be_try, sys, opts.feas_tol).empty()) break;
        params = next;
        const double be_new = tumor_be(u_try, sys);
        const double gain = (be_new - res.tumor_be) / std::max(1.0, std::abs(res.tumor_be));
        res.u = u_try;
        res.params = params;
        res.constraint_values = be_try;
        res.tumor_be = be_new;
        if (gain < opts.opt_stall_tol) {
            if (++stall >= opts.opt_stall_rounds) break;
        } else {
            stall = 0;
        }
    }

    res.diag.feasible = true;
    res.diag.final_eta0 = res.params.eta0;
    res.diag.min_eta = res.params.eta.size() ? res.params.eta.minCoeff() : res.params.eta0;
    return res;
}

}  // namespace rtplan
