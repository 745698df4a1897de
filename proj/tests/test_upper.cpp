#include <doctest.h>

#include <set>

#include "rtplan/phantom.hpp"
#include "rtplan/upper.hpp"
#include "test_instances.hpp"

using namespace rtplan;
using instances::tiny_dual;
using instances::tiny_single;

namespace {

std::set<std::vector<int>> as_set(const std::vector<Vec>& guesses) {
    std::set<std::vector<int>> out;
    for (const auto& g : guesses) {
        std::vector<int> v;
        for (int i = 0; i < g.size(); ++i) v.push_back(static_cast<int>(std::lround(g[i])));
        out.insert(v);
    }
    return out;
}

}  // namespace

TEST_CASE("default initial guesses") {
    const auto m2 = as_set(default_initial_guesses(2, 25));
    CHECK(m2 == std::set<std::vector<int>>{{1, 24}, {24, 1}, {12, 13}, {1, 1}});
    const auto m1 = as_set(default_initial_guesses(1, 25));
    CHECK(m1 == std::set<std::vector<int>>{{24}, {13}, {1}});
    CHECK_THROWS_AS(default_initial_guesses(0, 25), DomainError);
    for (int M : {1, 2, 3, 4})
        for (const auto& g : default_initial_guesses(M, 25)) {
            CHECK(g.sum() >= 1);
            CHECK(g.sum() <= 25);
            CHECK((g.array() >= 0).all());
        }
}

TEST_CASE("plan projection onto the fraction polytope") {
    Vec y(2);
    y << -1.0, 0.2;
    const Vec p = project_plan(y, 1.0, 25.0);
    CHECK((p.array() >= 0).all());
    CHECK(p.sum() == doctest::Approx(1.0).epsilon(1e-9));

    y << 20.0, 10.0;
    const Vec q = project_plan(y, 1.0, 25.0);
    CHECK(q.sum() == doctest::Approx(25.0).epsilon(1e-9));
    // interior points are untouched
    y << 3.0, 4.0;
    CHECK((project_plan(y, 1.0, 25.0) - y).lpNorm<Eigen::Infinity>() < 1e-12);
}

TEST_CASE("rounding repairs the total-fraction bounds") {
    Vec y(2);
    y << 0.4, 0.4;  // rounds to (0,0), below the minimum
    IVec r = round_plan(y, 25);
    CHECK(r.sum() == 1);
    y << 12.6, 12.6;  // rounds to (13,13), above N_max
    r = round_plan(y, 25);
    CHECK(r.sum() == 25);
    CHECK(r.minCoeff() >= 0);
    // half fractions round up
    y << 2.5, 3.0;
    r = round_plan(y, 25);
    CHECK(r[0] == 3);
    CHECK(r[1] == 3);
}

TEST_CASE("brute force enumerates the feasible integer grid") {
    ProblemSpec spec1 = tiny_single(1.4, 3);
    UpperConfig cfg;
    const ValueSurface s1 = brute_force(spec1, Vec::Ones(2), cfg);
    CHECK(s1.samples.size() == 3);  // N in {1,2,3}

    ProblemSpec spec2 = tiny_dual(false, 1.4, 25);
    cfg.grid_cap = 400;
    const ValueSurface s2 = brute_force(spec2, Vec::Ones(4), cfg);
    CHECK(s2.samples.size() == 350);
    const auto& opt = s2.optimum();
    for (const auto& s : s2.samples) {
        CHECK(s.N.sum() >= 1);
        CHECK(s.N.sum() <= 25);
        if (std::isfinite(s.value)) CHECK(opt.value <= s.value + 1e-12);
    }

    cfg.grid_cap = 10;
    CHECK_THROWS_AS(brute_force(spec2, Vec::Ones(4), cfg), ConfigError);
}

TEST_CASE("value function composes assembly, lower solve, and objective") {
    ProblemSpec spec = tiny_dual();
    const Vec u0 = Vec::Ones(4);
    // sum N = 1 has no proliferation: V = -tumor BE at the solution
    const PlanResult at_one = solve_fixed_plan(spec, (Vec(2) << 1, 0).finished(), u0);
    CHECK(at_one.objective == doctest::Approx(-at_one.tumor_be).epsilon(1e-12));
}

TEST_CASE("V(1,0) matches an independent single-modality solve") {
    ProblemSpec spec = tiny_dual();
    ProblemSpec solo = restrict_to_modality(spec, 0);
    CHECK_THROWS_AS(restrict_to_modality(spec, 7), DomainError);

    Vec u0_full = Vec::Zero(4);
    u0_full << 1.0, 2.0, 0.0, 0.0;
    const double v_dual =
        value_function(FractionationPlan::of({1, 0}), spec, u0_full);
    const double v_solo =
        value_function(FractionationPlan::of({1}), solo, (Vec(2) << 1.0, 2.0).finished());
    CHECK(v_dual == doctest::Approx(v_solo).epsilon(1e-9));
}

TEST_CASE("lower-level infeasibility propagates with the offending plan") {
    ProblemSpec spec = tiny_single(/*tolerance=*/1e-5);
    AutoParamOptions lower;
    lower.feas_max_rounds = 0;  // no room to enforce feasibility
    try {
        value_function(FractionationPlan::of({2}), spec, Vec::Constant(2, 10.0), lower);
        FAIL("expected InfeasibleError");
    } catch (const InfeasibleError& e) {
        CHECK(std::string(e.what()).find("N = (2)") != std::string::npos);
    }

    UpperConfig cfg;
    cfg.lower = lower;
    cfg.tr_max_iters = 1;
    CHECK_THROWS_AS(optimize_fractionation(spec, cfg, Vec::Constant(2, 10.0)),
                    InfeasibleError);
}

TEST_CASE("identical modalities give a symmetric value function") {
    ProblemSpec spec = tiny_dual(/*identical=*/true);
    const Vec u0 = Vec::Ones(4);
    const double v12 = value_function(FractionationPlan::of({2, 5}), spec, u0);
    const double v21 = value_function(FractionationPlan::of({5, 2}), spec, u0);
    CHECK(std::abs(v12 - v21) <= 1e-4 * std::abs(v12));
}

TEST_CASE("singleton feasible set returns the only plan") {
    ProblemSpec spec = tiny_single(1.4, /*N_max=*/1);
    UpperConfig cfg;
    const PlanResult res = optimize_fractionation(spec, cfg, Vec::Ones(2));
    REQUIRE(res.N.size() == 1);
    CHECK(res.N[0] == doctest::Approx(1.0));
}

TEST_CASE("optimizer result is never worse than its rounded starts") {
    ProblemSpec spec = tiny_dual(false, 1.4, 8);
    UpperConfig cfg;
    cfg.tr_max_iters = 4;
    const Vec u0 = Vec::Ones(4);
    const PlanResult res = optimize_fractionation(spec, cfg, u0);
    FractionationPlan plan{res.N};
    CHECK(plan.is_integer());
    plan.validate(spec.N_max);
    for (const auto& g : default_initial_guesses(2, 8)) {
        const PlanResult at_start = solve_fixed_plan(spec, g, u0);
        CHECK(res.objective <= at_start.objective + 1e-9 * std::abs(at_start.objective));
    }
    // feasibility of the returned fluence
    auto sys = assemble(spec, plan);
    CHECK(all_constraints_satisfied(constraint_be(res.u, sys), sys, spec.feas_tol));
}

TEST_CASE("symmetric problem yields transposition-equivalent objectives") {
    ProblemSpec spec = tiny_dual(/*identical=*/true, 1.4, 6);
    UpperConfig cfg;
    cfg.tr_max_iters = 3;
    const Vec u0 = Vec::Ones(4);
    const PlanResult res = optimize_fractionation(spec, cfg, u0);
    Vec transposed(2);
    transposed << res.N[1], res.N[0];
    const PlanResult mirror = solve_fixed_plan(spec, transposed, u0);
    CHECK(res.objective ==
          doctest::Approx(mirror.objective).epsilon(1e-6).scale(std::abs(res.objective)));
}

TEST_CASE("optimizer beats brute force within tolerance on a small grid") {
    ProblemSpec spec = tiny_dual(false, 1.4, 6);
    UpperConfig cfg;
    const Vec u0 = Vec::Ones(4);
    const ValueSurface surf = brute_force(spec, u0, cfg);
    const PlanResult res = optimize_fractionation(spec, cfg, u0);
    CHECK(res.objective <= surf.optimum().value + 0.02 * std::abs(surf.optimum().value));
    CHECK(res.objective >= surf.optimum().value - 1e-9 * std::abs(surf.optimum().value));
}
