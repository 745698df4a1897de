#include "rtplan/bench.hpp"

#include <chrono>
#include <cmath>
#include <iomanip>
#include <limits>
#include <map>
#include <optional>
#include <sstream>

namespace rtplan {

std::pair<double, double> pobj_metrics(double be_star, double be_single, double be_conv) {
    if (!(be_single > 0) || !(be_conv > 0))
        throw DomainError("baseline BE must be positive for percentage metrics");
    return {100.0 * be_star / be_single, 100.0 * be_star / be_conv};
}

double avg_be_per_voxel(const ProblemSpec& spec, const PlanResult& result,
                        const std::vector<int>& eval_mask) {
    if (eval_mask.empty()) throw DomainError("empty evaluation mask");
    const int M = spec.modality_count();
    if (result.N.size() != M) throw DimensionError("plan does not match the spec");

    double total = 0.0;
    int off = 0;
    for (int m = 0; m < M; ++m) {
        const auto& md = spec.modalities[m];
        const Vec dose = md.T * result.u.segment(off, md.beamlets());
        off += md.beamlets();
        if (result.N[m] == 0.0) continue;
        std::map<int, int> row_of;
        for (size_t i = 0; i < md.tumor_voxels.size(); ++i)
            row_of[md.tumor_voxels[i]] = static_cast<int>(i);
        for (int v : eval_mask) {
            auto it = row_of.find(v);
            if (it == row_of.end()) continue;
            const double d = dose[it->second];
            total += result.N[m] * (md.alpha[it->second] * d +
                                    md.beta[it->second] * d * d);
        }
    }
    const double tau =
        proliferation(result.N.sum(), spec.T_d, 1);  // per-voxel proliferation
    return total / static_cast<double>(eval_mask.size()) - tau;
}

BaselineResults run_baselines(const ProblemSpec& spec, const Vec& u_init,
                              const UpperConfig& cfg) {
    if (spec.modalities.empty()) throw ConfigError("baselines need modality 1");
    const int M = spec.modality_count();
    std::vector<std::optional<PlanResult>> entries(spec.N_max);
    parallel_for(spec.N_max, cfg.jobs, [&](int i) {
        Vec N = Vec::Zero(M);
        N[0] = i + 1;
        try {
            entries[i] = solve_fixed_plan(spec, N, u_init, cfg.lower);
        } catch (const InfeasibleError&) {
        }
    });

    BaselineResults out;
    if (!entries[spec.N_max - 1])
        throw InfeasibleError("conventional course (N1 = N_max) is infeasible", {});
    out.conv = *entries[spec.N_max - 1];
    int best = -1;
    for (int i = 0; i < spec.N_max; ++i) {
        if (!entries[i]) continue;
        if (best < 0 || entries[i]->objective < entries[best]->objective) best = i;
    }
    out.single = *entries[best];
    return out;
}

std::string sweep_param_name(SweepParam p) {
    switch (p) {
        case SweepParam::Td: return "T_d";
        case SweepParam::Alpha2: return "alpha2";
        case SweepParam::R: return "r";
        case SweepParam::MarginR: return "margin_r";
    }
    return "?";
}

namespace {

ScenarioOverrides overrides_for(const SweepSpec& sweep, double value) {
    ScenarioOverrides o;
    switch (sweep.param) {
        case SweepParam::Td: o.T_d = value; break;
        case SweepParam::Alpha2: o.alpha2 = value; break;
        case SweepParam::R: o.r = value; break;
        case SweepParam::MarginR:
            o.r = value;
            o.margin = sweep.margin_voxels;
            break;
    }
    return o;
}

}  // namespace

std::vector<ComparisonReport> run_sweep(const ScenarioConfig& base, const SweepSpec& sweep,
                                        const UpperConfig& cfg) {
    std::vector<ComparisonReport> reports;
    for (const double value : sweep.values) {
        ComparisonReport rep;
        rep.sweep_param = sweep_param_name(sweep.param);
        rep.sweep_value = value;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            const ProblemSpec spec = scenario(base, overrides_for(sweep, value));
            const Vec u0 = initial_fluence(spec);
            const auto baselines = run_baselines(spec, u0, cfg);

            UpperConfig dual = cfg;
            if (dual.initial_guesses.empty())
                dual.initial_guesses =
                    default_initial_guesses(spec.modality_count(), spec.N_max);
            dual.initial_guesses.push_back(baselines.single.N);  // seed with N1-optimum
            PlanResult result = optimize_fractionation(spec, dual, u0);

            const auto& mask = spec.phantom.mask(spec.phantom.tumor_name);
            rep.be_single = avg_be_per_voxel(spec, baselines.single, mask);
            rep.be_conv = avg_be_per_voxel(spec, baselines.conv, mask);
            rep.be_dual = avg_be_per_voxel(spec, result, mask);
            // Courses are compared by average BE over the evaluation mask.
            // When a target margin is in play the solver's objective also
            // counts margin voxels, so its pick can score below the single
            // course on the study metric; the single course is itself a
            // feasible schedule, so report whichever course evaluates better.
            if (rep.be_dual < rep.be_single) {
                result = baselines.single;
                rep.be_dual = rep.be_single;
                rep.flags.push_back("dual optimum evaluated below the single course; "
                                    "reported the single course");
            }

            // Independent feasibility re-check before reporting.
            const GeneralizedSystem sys = assemble(spec, FractionationPlan{result.N});
            const Vec be = constraint_be(result.u, sys);
            if (!all_constraints_satisfied(be, sys, spec.feas_tol))
                throw InfeasibleError("reported plan failed the feasibility re-check", {});
            std::tie(rep.pobj_single, rep.pobj_conv) =
                pobj_metrics(rep.be_dual, rep.be_single, rep.be_conv);

            rep.dual_plan.resize(result.N.size());
            for (int m = 0; m < result.N.size(); ++m)
                rep.dual_plan[m] = static_cast<int>(std::lround(result.N[m]));
            rep.single_plan = static_cast<int>(std::lround(baselines.single.N[0]));
            rep.dual_constraints = be;
            rep.single_constraints = baselines.single.constraint_values;
            rep.conv_constraints = baselines.conv.constraint_values;
            rep.diag = result.diag;
            rep.diag.absorb(baselines.conv.diag);
            rep.diag.absorb(baselines.single.diag);
            if (rep.pobj_single < 100.0 - 1e-6)
                rep.flags.push_back("pobj_single below 100 (local-solver gap)");
            if (rep.pobj_conv < 100.0 - 1e-6)
                rep.flags.push_back("pobj_conv below 100 (local-solver gap)");
        } catch (const Error& e) {
            rep.error = e.what();
        }
        rep.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                            .count();
        reports.push_back(std::move(rep));
    }
    return reports;
}

namespace {

std::string fmt(double v) {
    std::ostringstream os;
    os << std::setprecision(12) << v;
    return os.str();
}

std::string plan_cell(const IVec& plan) {
    std::ostringstream os;
    os << "(";
    for (int i = 0; i < plan.size(); ++i) os << (i ? " " : "") << plan[i];
    os << ")";
    return os.str();
}

}  // namespace

std::string reports_to_csv(const std::vector<ComparisonReport>& reports) {
    std::ostringstream os;
    os << "param,value,dual_plan,single_N1,pobj_single,pobj_conv,be_dual,be_single,"
          "be_conv,flags,error\n";
    for (const auto& r : reports) {
        os << r.sweep_param << "," << fmt(r.sweep_value) << ",";
        if (r.ok()) {
            os << plan_cell(r.dual_plan) << "," << r.single_plan << ","
               << fmt(r.pobj_single) << "," << fmt(r.pobj_conv) << "," << fmt(r.be_dual)
               << "," << fmt(r.be_single) << "," << fmt(r.be_conv) << ",";
            for (size_t i = 0; i < r.flags.size(); ++i)
                os << (i ? "; " : "") << r.flags[i];
            os << ",";
        } else {
            os << ",,,,,,,," << r.error;
        }
        os << "\n";
    }
    return os.str();
}

std::string runtimes_to_csv(const std::vector<ComparisonReport>& reports) {
    std::ostringstream os;
    os << "param,value,runtime_s,lower_solves,bcd_sweeps,value_evals\n";
    for (const auto& r : reports)
        os << r.sweep_param << "," << fmt(r.sweep_value) << "," << fmt(r.runtime_s) << ","
           << r.diag.lower_solves << "," << r.diag.bcd_sweeps << "," << r.diag.value_evals
           << "\n";
    return os.str();
}

std::string render_table(const std::vector<ComparisonReport>& reports) {
    std::ostringstream os;
    os << std::left << std::setw(10) << "value" << std::setw(16) << "dual (N1..NM)"
       << std::setw(12) << "single N1" << std::setw(14) << "pObj_single" << std::setw(14)
       << "pObj_conv" << "\n";
    os << std::string(66, '-') << "\n";
    for (const auto& r : reports) {
        os << std::left << std::setw(10) << r.sweep_value;
        if (r.ok()) {
            std::ostringstream ps;
            ps << std::fixed << std::setprecision(1);
            os << std::setw(16) << plan_cell(r.dual_plan) << std::setw(12) << r.single_plan;
            ps << r.pobj_single;
            os << std::setw(14) << ps.str();
            ps.str("");
            ps << r.pobj_conv;
            os << std::setw(14) << ps.str();
        } else {
            os << "FAILED: " << r.error;
        }
        os << "\n";
    }
    return os.str();
}

}  // namespace rtplan
