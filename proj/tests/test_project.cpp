#include <doctest.h>

#include <random>

#include "oracles.hpp"
#include "rtplan/project.hpp"

using namespace rtplan;

TEST_CASE("projection is the identity on feasible points") {
    Vec v(2);
    v << 0.5, 0.5;
    Vec gamma = Vec::Constant(2, 0.35);
    Vec D = Vec::Constant(2, 0.175);
    CHECK(project_constraint(v, gamma, D, 1.4) == v);
}

TEST_CASE("1-D ray projection onto w^2 <= 1") {
    Vec v = Vec::Constant(1, 2.0);
    const Vec w = project_constraint(v, Vec::Zero(1), Vec::Ones(1), 1.0);
    CHECK(w[0] == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("2-D projection beats a dense feasible grid") {
    Vec v = Vec::Constant(2, 4.0);
    Vec gamma = Vec::Constant(2, 0.35);
    Vec D = Vec::Constant(2, 0.175);
    const double C = 1.4;
    const Vec w = project_constraint(v, gamma, D, C);
    CHECK(constraint_value(w, gamma, D) <= C * (1 + 1e-8));
    const double grid_best = oracle::projection_grid_best(v, gamma, D, C, w);
    CHECK((w - v).norm() <= grid_best + 1e-4);
}

TEST_CASE("boundary, idempotence, and zero-curvature coordinates") {
    std::mt19937 rng(11);
    std::uniform_real_distribution<double> U(0.0, 3.0);
    for (int rep = 0; rep < 60; ++rep) {
        const int n = 1 + rep % 5;
        Vec v(n), gamma(n), D(n);
        for (int i = 0; i < n; ++i) {
            v[i] = U(rng) + 0.5;
            gamma[i] = U(rng) * 0.3;
            D[i] = (rep % 3 == 0 && i == 0) ? 0.0 : U(rng) * 0.2 + 0.01;
        }
        if (gamma.isZero() && (D.array() == 0).all()) gamma[0] = 0.1;
        const double C = 0.5 + U(rng);
        const Vec w = project_constraint(v, gamma, D, C);
        const double val = constraint_value(w, gamma, D);
        CHECK(val <= C * (1 + 1e-8));
        if (constraint_value(v, gamma, D) > C * (1 + 1e-8))
            CHECK(std::abs(val - C) <= 1e-8 * C);  // lands on the boundary
        const Vec w2 = project_constraint(w, gamma, D, C);
        CHECK((w2 - w).lpNorm<Eigen::Infinity>() <= 1e-10 * (1.0 + w.norm()));
    }
}

TEST_CASE("all-zero curvature reduces to the half-space projection") {
    Vec v(3);
    v << 2.0, 1.0, 3.0;
    Vec gamma(3);
    gamma << 1.0, 0.5, 0.25;
    const double C = 1.0;
    const Vec w = project_constraint(v, gamma, Vec::Zero(3), C);
    const Vec expect = v - gamma * ((gamma.dot(v) - C) / gamma.squaredNorm());
    CHECK((w - expect).lpNorm<Eigen::Infinity>() < 1e-12);
}

TEST_CASE("projection input validation") {
    Vec v = Vec::Ones(2);
    CHECK_THROWS_AS(project_constraint(v, Vec::Ones(3), Vec::Ones(2), 1.0),
                    DimensionError);
    CHECK_THROWS_AS(project_constraint(v, Vec::Ones(2), Vec::Ones(2), 0.0), DomainError);
    Vec Dneg(2);
    Dneg << 1.0, -0.5;
    CHECK_THROWS_AS(project_constraint(v, Vec::Ones(2), Dneg, 1.0),
                    DegenerateConstraintError);
}

TEST_CASE("projection survives extreme inputs") {
    Vec v = Vec::Constant(2, 1e60);
    Vec gamma = Vec::Constant(2, 0.35);
    Vec D = Vec::Constant(2, 0.175);
    const Vec w = project_constraint(v, gamma, D, 1.4);
    CHECK(constraint_value(w, gamma, D) <= 1.4 * (1 + 1e-8));
    Vec bad = Vec::Constant(2, std::numeric_limits<double>::infinity());
    CHECK_THROWS_AS(project_constraint(bad, gamma, D, 1.4), NumericalError);
}
