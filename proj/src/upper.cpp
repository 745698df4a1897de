#include "rtplan/upper.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <sstream>

namespace rtplan {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct ValueEval {
    double value = kInf;
    Vec u;
    Vec constraint_values;
    double tumor_be = 0.0;
    bool feasible = false;
    SolveDiagnostics diag;
};

ValueEval evaluate(const ProblemSpec& spec, const Vec& N, const Vec& u_init,
                   const AutoParamOptions& lower) {
    ValueEval ev;
    FractionationPlan plan{N};
    const GeneralizedSystem sys = assemble(spec, plan);
    try {
        AutoParamResult res = auto_param_solve(sys, u_init, lower);
        ev.u = std::move(res.u);
        // Canonical representative: fluence of a zero-fraction modality is
        // never delivered.
        for (int m = 0; m < sys.modality_count(); ++m)
            if (sys.plan()[m] == 0.0)
                ev.u.segment(sys.beamlet_offset(m), sys.beamlet_count(m)).setZero();
        ev.value = objective_F(ev.u, sys);
        ev.constraint_values = std::move(res.constraint_values);
        ev.tumor_be = res.tumor_be;
        ev.feasible = true;
        ev.diag = res.diag;
    } catch (const InfeasibleError&) {
        ev.feasible = false;
        ev.value = kInf;
    }
    ev.diag.value_evals += 1;
    return ev;
}

std::string plan_str(const Vec& N) {
    std::ostringstream os;
    os << "(";
    for (int i = 0; i < N.size(); ++i) os << (i ? ", " : "") << N[i];
    os << ")";
    return os.str();
}

}  // namespace

int ValueSurface::optimum_index() const {
    if (samples.empty()) throw DomainError("empty value surface");
    int best = -1;
    for (size_t i = 0; i < samples.size(); ++i)
        if (std::isfinite(samples[i].value) &&
            (best < 0 || samples[i].value < samples[best].value))
            best = static_cast<int>(i);
    if (best < 0) throw DomainError("value surface has no feasible sample");
    return best;
}

std::vector<Vec> default_initial_guesses(int M, int N_max) {
    if (M < 1) throw DomainError("need at least one modality");
    std::vector<Vec> out;
    auto push_unique = [&](const Vec& v) {
        for (const auto& w : out)
            if ((w - v).lpNorm<Eigen::Infinity>() < 0.5) return;
        const double s = v.sum();
        if (s >= 1 && s <= N_max) out.push_back(v);
    };
    if (M == 1) {
        // Degenerate projection of the two-modality scheme.
        push_unique(Vec::Constant(1, std::max(1, N_max - 1)));
        push_unique(Vec::Constant(1, std::max(1, (N_max + 1) / 2)));
        push_unique(Vec::Ones(1));
        return out;
    }
    for (int m = 0; m < M; ++m) {
        Vec v = Vec::Ones(M);
        v[m] = std::max(1, N_max - M + 1);
        push_unique(v);
    }
    Vec balanced(M);
    const int base = N_max / M;
    int extra = N_max % M;
    for (int m = 0; m < M; ++m) balanced[m] = base;
    for (int m = M - 1; m >= 0 && extra > 0; --m, --extra) balanced[m] += 1;
    push_unique(balanced);
    push_unique(Vec::Ones(M));
    return out;
}

double value_function(const FractionationPlan& plan, const ProblemSpec& spec,
                      const Vec& u_init, const AutoParamOptions& lower) {
    const GeneralizedSystem sys = assemble(spec, plan);
    try {
        const AutoParamResult res = auto_param_solve(sys, u_init, lower);
        return objective_F(res.u, sys);
    } catch (const InfeasibleError& e) {
        throw InfeasibleError(std::string(e.what()) + " at N = " + plan_str(plan.N),
                              e.violated);
    }
}

Vec project_plan(const Vec& N, double lo, double hi) {
    auto shifted_sum = [&](double theta) {
        double s = 0.0;
        for (int i = 0; i < N.size(); ++i) s += std::max(N[i] - theta, 0.0);
        return s;
    };
    double theta = 0.0;
    const double s0 = shifted_sum(0.0);
    if (s0 > hi) {
        double a = 0.0, b = N.maxCoeff();
        for (int it = 0; it < 200; ++it) {
            theta = 0.5 * (a + b);
            (shifted_sum(theta) > hi ? a : b) = theta;
        }
        theta = b;
    } else if (s0 < lo) {
        double b = 0.0, a = N.minCoeff() - lo;
        for (int it = 0; it < 200; ++it) {
            theta = 0.5 * (a + b);
            (shifted_sum(theta) < lo ? b : a) = theta;
        }
        theta = a;
    } else {
        return N.cwiseMax(0.0);
    }
    Vec out = (N.array() - theta).max(0.0);
    // Snap the sum exactly onto the active bound.
    const double s = out.sum();
    const double target = s > hi ? hi : (s < lo ? lo : s);
    if (s > 0 && s != target) out *= target / s;
    return out;
}

IVec round_plan(const Vec& N, int N_max) {
    const int M = static_cast<int>(N.size());
    IVec r(M);
    for (int m = 0; m < M; ++m)
        r[m] = std::max(0, static_cast<int>(std::floor(N[m] + 0.5)));

    auto adjust = [&](int direction) {
        // Step the coordinate whose move adds the least rounding distance;
        // ties go toward the larger modality index.
        int best = -1;
        double best_cost = kInf;
        for (int m = 0; m < M; ++m) {
            const int cand = r[m] + direction;
            if (cand < 0) continue;
            const double cost = std::abs(cand - N[m]) - std::abs(r[m] - N[m]);
            if (cost <= best_cost) {
                best_cost = cost;
                best = m;
            }
        }
        if (best < 0) throw NumericalError("cannot repair rounded plan");
        r[best] += direction;
    };
    int guard = 0;
    while (r.sum() > N_max && guard++ < 4 * M * N_max) adjust(-1);
    while (r.sum() < 1 && guard++ < 4 * M * N_max) adjust(+1);
    return r;
}

namespace {

struct StartOutcome {
    PlanResult::StartTrace trace;
    Vec endpoint;
    SolveDiagnostics diag;
};

StartOutcome run_trust_region(const ProblemSpec& spec, const UpperConfig& cfg,
                              const Vec& start, const Vec& u_init) {
    StartOutcome out;
    const int M = spec.modality_count();
    const double h = cfg.fd_step;

    Vec N = project_plan(start, 1.0, spec.N_max);
    ValueEval cur = evaluate(spec, N, u_init, cfg.lower);
    out.diag.absorb(cur.diag);
    out.trace.start = start;
    out.trace.iterates.push_back(N);
    out.trace.values.push_back(cur.value);

    Vec warm = cur.feasible ? cur.u : u_init;
    double radius = cfg.tr_radius_init;
    for (int iter = 0; iter < cfg.tr_max_iters && radius >= cfg.tr_radius_min; ++iter) {
        if (!cur.feasible) break;
        // Forward differences; backward at the upper total-fraction bound.
        Vec g = Vec::Zero(M);
        for (int m = 0; m < M; ++m) {
            Vec Np = N;
            Np[m] += h;
            if (Np.sum() <= spec.N_max + 1e-9) {
                ValueEval ev = evaluate(spec, Np, warm, cfg.lower);
                out.diag.absorb(ev.diag);
                g[m] = (ev.value - cur.value) / h;
            } else {
                Vec Nm = N;
                Nm[m] -= h;
                if (Nm[m] >= -1e-12 && Nm.sum() >= 1.0 - 1e-9) {
                    ValueEval ev = evaluate(spec, Nm.cwiseMax(0.0), warm, cfg.lower);
                    out.diag.absorb(ev.diag);
                    g[m] = (cur.value - ev.value) / h;
                }
            }
        }
        const double gmax = g.lpNorm<Eigen::Infinity>();
        if (!(gmax > 0) || !g.allFinite()) break;

        double t = radius / gmax;
        Vec cand;
        double step = 0.0;
        for (int bt = 0; bt < 30; ++bt) {
            cand = project_plan(N - t * g, 1.0, spec.N_max);
            step = (cand - N).lpNorm<Eigen::Infinity>();
            if (step <= radius + 1e-12) break;
            t *= 0.5;
        }
        const Vec d = cand - N;
        const double pred = -g.dot(d);
        if (step < 1e-12 || pred <= 0) {
            radius *= cfg.tr_shrink;
            continue;
        }
        ValueEval trial = evaluate(spec, cand, warm, cfg.lower);
        out.diag.absorb(trial.diag);
        const double ratio = trial.feasible ? (cur.value - trial.value) / pred : -kInf;
        if (ratio >= cfg.tr_accept) {
            N = cand;
            cur = std::move(trial);
            warm = cur.u;
            radius = std::min(radius * cfg.tr_grow, static_cast<double>(spec.N_max));
            out.trace.iterates.push_back(N);
            out.trace.values.push_back(cur.value);
        } else {
            radius *= cfg.tr_shrink;
        }
    }
    out.endpoint = N;
    return out;
}

}  // namespace

PlanResult solve_fixed_plan(const ProblemSpec& spec, const Vec& N, const Vec& u_init,
                            const AutoParamOptions& lower) {
    ValueEval ev = evaluate(spec, N, u_init, lower);
    if (!ev.feasible)
        throw InfeasibleError("no feasible fluence at N = " + plan_str(N), {});
    PlanResult res;
    res.N = N;
    res.u = std::move(ev.u);
    res.objective = ev.value;
    res.tumor_be = ev.tumor_be;
    res.constraint_values = std::move(ev.constraint_values);
    res.diag = ev.diag;
    res.diag.feasible = true;
    return res;
}

PlanResult optimize_fractionation(const ProblemSpec& spec, const UpperConfig& cfg,
                                  const Vec& u_init) {
    spec.validate();
    const int M = spec.modality_count();
    std::vector<Vec> starts =
        cfg.initial_guesses.empty() ? default_initial_guesses(M, spec.N_max)
                                    : cfg.initial_guesses;
    for (const auto& s : starts) {
        if (s.size() != M) throw DimensionError("initial guess has wrong length");
        FractionationPlan{s}.validate(spec.N_max);
    }

    std::vector<StartOutcome> outcomes(starts.size());
    parallel_for(static_cast<int>(starts.size()), cfg.jobs, [&](int i) {
        outcomes[i] = run_trust_region(spec, cfg, starts[i], u_init);
    });

    // Integer candidates: every rounded endpoint plus the integer starts.
    std::map<std::vector<int>, int> candidates;
    auto add_candidate = [&](const IVec& r) {
        std::vector<int> key(r.data(), r.data() + r.size());
        candidates.emplace(key, static_cast<int>(candidates.size()));
    };
    for (const auto& oc : outcomes) add_candidate(round_plan(oc.endpoint, spec.N_max));
    for (const auto& s : starts) add_candidate(round_plan(s, spec.N_max));

    std::vector<std::pair<std::vector<int>, ValueEval>> evals(candidates.size());
    {
        std::vector<const std::vector<int>*> keys(candidates.size());
        for (const auto& [key, idx] : candidates) keys[idx] = &key;
        parallel_for(static_cast<int>(candidates.size()), cfg.jobs, [&](int i) {
            Vec N(M);
            for (int m = 0; m < M; ++m) N[m] = (*keys[i])[m];
            // Final re-solves start from the caller's u_init so identical
            // plans evaluate identically across runs and tools.
            evals[i] = {*keys[i], evaluate(spec, N, u_init, cfg.lower)};
        });
    }

    PlanResult result;
    int best = -1;
    for (size_t i = 0; i < evals.size(); ++i) {
        result.diag.absorb(evals[i].second.diag);
        if (!evals[i].second.feasible) continue;
        if (best < 0 || evals[i].second.value < evals[best].second.value ||
            (evals[i].second.value == evals[best].second.value &&
             evals[i].first < evals[best].first))
            best = static_cast<int>(i);
    }
    if (best < 0)
        throw InfeasibleError("no feasible integer plan among the candidates", {});

    const auto& [key, ev] = evals[best];
    result.N.resize(M);
    for (int m = 0; m < M; ++m) result.N[m] = key[m];
    result.u = ev.u;
    result.objective = ev.value;
    result.tumor_be = ev.tumor_be;
    result.constraint_values = ev.constraint_values;
    result.diag.feasible = true;
    result.diag.final_eta0 = ev.diag.final_eta0;
    result.diag.min_eta = ev.diag.min_eta;

    for (size_t i = 0; i < outcomes.size(); ++i) {
        auto trace = std::move(outcomes[i].trace);
        result.diag.absorb(outcomes[i].diag);
        const IVec r = round_plan(outcomes[i].endpoint, spec.N_max);
        trace.rounded.resize(M);
        for (int m = 0; m < M; ++m) trace.rounded[m] = r[m];
        std::vector<int> key2(r.data(), r.data() + r.size());
        for (const auto& [k, e] : evals)
            if (k == key2) trace.rounded_value = e.value;
        result.traces.push_back(std::move(trace));
    }
    return result;
}

ValueSurface brute_force(const ProblemSpec& spec, const Vec& u_init,
                         const UpperConfig& cfg) {
    const int M = spec.modality_count();
    std::vector<IVec> grid;
    IVec cur = IVec::Zero(M);
    // Lexicographic enumeration of 0 <= N, 1 <= sum N <= N_max.
    std::function<void(int, int)> enumerate = [&](int m, int remaining) {
        if (m == M - 1) {
            for (int v = 0; v <= remaining; ++v) {
                cur[m] = v;
                if (cur.sum() >= 1) grid.push_back(cur);
            }
            cur[m] = 0;
            return;
        }
        for (int v = 0; v <= remaining; ++v) {
            cur[m] = v;
            enumerate(m + 1, remaining - v);
        }
        cur[m] = 0;
    };
    enumerate(0, spec.N_max);
    if (static_cast<long>(grid.size()) > cfg.grid_cap)
        throw ConfigError("brute-force grid has " + std::to_string(grid.size()) +
                          " points, above the cap of " + std::to_string(cfg.grid_cap));

    ValueSurface surf;
    surf.modalities = M;
    surf.N_max = spec.N_max;
    surf.samples.resize(grid.size());
    parallel_for(static_cast<int>(grid.size()), cfg.jobs, [&](int i) {
        Vec N(M);
        for (int m = 0; m < M; ++m) N[m] = grid[i][m];
        const ValueEval ev = evaluate(spec, N, u_init, cfg.lower);
        surf.samples[i] = {grid[i], ev.value};
    });
    return surf;
}

}  // namespace rtplan
