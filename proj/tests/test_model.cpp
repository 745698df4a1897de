#include <doctest.h>

#include <cmath>

#include "rtplan/model.hpp"
#include "test_instances.hpp"

using namespace rtplan;
using instances::tiny_dual;
using instances::tiny_single;

TEST_CASE("proliferation term") {
    CHECK(proliferation(1.0, 5.0, 1) == 0.0);
    CHECK(proliferation(1.0, 0.3, 17) == 0.0);
    CHECK(proliferation(12.0, 5.0, 1) == doctest::Approx(11.0 * M_LN2 / 5.0).epsilon(1e-12));
    // linear in the voxel count
    CHECK(proliferation(7.0, 3.0, 10) ==
          doctest::Approx(2.0 * proliferation(7.0, 3.0, 5)).epsilon(1e-12));
    CHECK_THROWS_AS(proliferation(0.5, 5.0, 1), DomainError);
    CHECK_THROWS_AS(proliferation(2.0, -1.0, 1), DomainError);
    CHECK_THROWS_AS(proliferation(2.0, 1.0, 0), DomainError);
}

TEST_CASE("tumor BE on a single voxel") {
    // 1 tumor voxel, N=1, alpha 0.35, beta 0.035, dose 2 Gy
    ProblemSpec spec;
    spec.phantom.rows = 1;
    spec.phantom.cols = 2;
    spec.phantom.voxel_size = 1.0;
    spec.phantom.masks["tumor"] = {0};
    spec.phantom.masks["oar"] = {1};
    Mat T(1, 1);
    T << 2.0;
    Mat H(1, 1);
    H << 0.0;
    spec.modalities.push_back(instances::make_modality("M1", T, {{"oar", H}}, {0}));
    spec.constraints.push_back({"oar", ConstraintKind::Max, 1.0});
    spec.N_max = 25;
    spec.validate();

    auto sys = assemble(spec, FractionationPlan::of({1}));
    Vec u = Vec::Ones(1);
    CHECK(tumor_be(u, sys) == doctest::Approx(0.84).epsilon(1e-12));
    CHECK(tumor_be(Vec::Zero(1), sys) == 0.0);
    // F composes the two terms; sum N = 1 has no proliferation
    CHECK(objective_F(u, sys) == doctest::Approx(-0.84).epsilon(1e-12));
}

TEST_CASE("zero-fraction modality contributes nothing") {
    ProblemSpec spec = tiny_dual();
    auto dual = assemble(spec, FractionationPlan::of({3, 0}));
    ProblemSpec solo = spec;
    solo.modalities = {spec.modalities[0]};
    auto single = assemble(solo, FractionationPlan::of({3}));

    Vec u = Vec::Zero(4);
    u << 1.0, 2.0, 0.7, 0.3;  // arbitrary intensities on both blocks
    Vec u1 = u.head(2);
    CHECK(tumor_be(u, dual) == doctest::Approx(tumor_be(u1, single)).epsilon(1e-12));
    const Vec be_dual = constraint_be(u, dual);
    const Vec be_single = constraint_be(u1, single);
    REQUIRE(be_dual.size() == be_single.size());
    for (int i = 0; i < be_dual.size(); ++i)
        CHECK(be_dual[i] == doctest::Approx(be_single[i]).epsilon(1e-12));
}

TEST_CASE("constraint BE single voxel and max expansion") {
    ProblemSpec spec = tiny_single();
    auto sys = assemble(spec, FractionationPlan::of({1}));
    // dose at the OAR voxel: H u = 0.3*(u1+u2); choose u so the dose is 2 Gy
    Vec u(2);
    u << 10.0 / 3.0, 10.0 / 3.0;
    const Vec be = constraint_be(u, sys);
    REQUIRE(be.size() == 1);
    CHECK(be[0] == doctest::Approx(0.35 * 2 + 0.175 * 4).epsilon(1e-12));  // 1.4
    CHECK(constraint_be(Vec::Zero(2), sys).isZero());
}

TEST_CASE("max constraint expands to one entry per voxel") {
    ProblemSpec spec;
    spec.phantom.rows = 2;
    spec.phantom.cols = 3;
    spec.phantom.voxel_size = 1.0;
    spec.phantom.masks["tumor"] = {0};
    spec.phantom.masks["mean_oar"] = {1};
    spec.phantom.masks["max_oar"] = {3, 4, 5};
    Mat T(1, 2);
    T << 1.0, 0.5;
    Mat Hmean(1, 2);
    Hmean << 0.1, 0.1;
    Mat Hmax(3, 2);
    Hmax << 0.3, 0.0, 0.0, 0.4, 0.2, 0.2;
    spec.modalities.push_back(instances::make_modality(
        "M1", T, {{"mean_oar", Hmean}, {"max_oar", Hmax}}, {0}));
    spec.constraints.push_back({"mean_oar", ConstraintKind::Mean, 1.0});
    spec.constraints.push_back({"max_oar", ConstraintKind::Max, 1.0});
    spec.N_max = 25;
    spec.validate();

    auto sys = assemble(spec, FractionationPlan::of({2}));
    CHECK(sys.constraint_count() == 4);  // 1 mean + 3 voxels

    Vec u(2);
    u << 1.0, 1.5;
    const Vec be = constraint_be(u, sys);
    // each max entry equals the single-voxel BE at its own dose
    const Vec dose = Hmax.sparseView() * u;
    for (int j = 0; j < 3; ++j) {
        const double expect = 2 * (0.35 * dose[j] + 0.175 * dose[j] * dose[j]);
        CHECK(be[1 + j] == doctest::Approx(expect).epsilon(1e-12));
    }
}

TEST_CASE("assemble stacks alpha_tilde in modality order and scales B with N") {
    ProblemSpec spec = tiny_dual();
    auto sys = assemble(spec, FractionationPlan::of({3, 7}));
    const Vec& at = sys.alpha_tilde();
    REQUIRE(at.size() == 4);
    CHECK(at[0] == doctest::Approx(-3 * 0.35));
    CHECK(at[1] == doctest::Approx(-3 * 0.35));
    CHECK(at[2] == doctest::Approx(-7 * 0.35));
    CHECK(at[3] == doctest::Approx(-7 * 0.35));

    auto doubled = assemble(spec, FractionationPlan::of({6, 7}));
    CHECK(doubled.B_diag().head(2) == (2.0 * sys.B_diag().head(2)).eval());
    CHECK(doubled.B_diag().tail(2) == sys.B_diag().tail(2));
}

TEST_CASE("BE expressions are degree-2 in the fluence") {
    ProblemSpec spec = tiny_dual();
    auto sys = assemble(spec, FractionationPlan::of({2, 5}));
    Vec u(4);
    u << 0.5, 1.0, 0.25, 0.75;

    const Vec d = sys.apply_T(u);
    const double L = -sys.alpha_tilde().dot(d);
    const double Q = d.dot(sys.B_diag().cwiseProduct(d));
    for (double c : {0.0, 1.0, 2.0})
        CHECK(tumor_be(c * u, sys) == doctest::Approx(c * L + c * c * Q).epsilon(1e-12));
}

TEST_CASE("modality permutation equivariance") {
    ProblemSpec spec = tiny_dual();
    ProblemSpec swapped = spec;
    std::swap(swapped.modalities[0], swapped.modalities[1]);

    auto sys = assemble(spec, FractionationPlan::of({4, 9}));
    auto sys_swapped = assemble(swapped, FractionationPlan::of({9, 4}));

    Vec u(4);
    u << 0.3, 1.2, 0.9, 0.1;
    Vec u_swapped(4);
    u_swapped << 0.9, 0.1, 0.3, 1.2;

    CHECK(tumor_be(u, sys) ==
          doctest::Approx(tumor_be(u_swapped, sys_swapped)).epsilon(1e-12));
    CHECK(objective_F(u, sys) ==
          doctest::Approx(objective_F(u_swapped, sys_swapped)).epsilon(1e-12));
    const Vec be_a = constraint_be(u, sys);
    const Vec be_b = constraint_be(u_swapped, sys_swapped);
    for (int i = 0; i < be_a.size(); ++i)
        CHECK(be_a[i] == doctest::Approx(be_b[i]).epsilon(1e-12));
}

TEST_CASE("shape and invariant violations are rejected") {
    ProblemSpec spec = tiny_single();
    auto sys = assemble(spec, FractionationPlan::of({1}));
    CHECK_THROWS_AS(tumor_be(Vec::Zero(3), sys), DimensionError);
    CHECK_THROWS_AS(constraint_be(Vec::Zero(5), sys), DimensionError);
    CHECK_THROWS_AS(assemble(spec, FractionationPlan::of({1, 1})), DimensionError);
    CHECK_THROWS_AS(assemble(spec, FractionationPlan::of({0})), DomainError);
    CHECK_THROWS_AS(assemble(spec, FractionationPlan::of({26})), DomainError);
    CHECK_THROWS_AS(assemble(spec, FractionationPlan::of({-1})), DomainError);

    ProblemSpec bad = tiny_single();
    bad.modalities[0].alpha[0] = 0.0;  // must be strictly positive
    CHECK_THROWS_AS(bad.validate(), DomainError);

    ProblemSpec overlap = tiny_single();
    overlap.phantom.masks["oar"] = {0};  // collides with the tumor
    CHECK_THROWS_AS(overlap.validate(), ConfigError);

    ProblemSpec orphan = tiny_single();
    orphan.constraints[0].oar_name = "nothing";
    CHECK_THROWS_AS(orphan.validate(), ConfigError);
}

TEST_CASE("fractional plans are accepted by assemble") {
    ProblemSpec spec = tiny_dual();
    auto sys = assemble(spec, FractionationPlan::of({1.5, 2.25}));
    CHECK(sys.B_diag()[0] == doctest::Approx(1.5 * 0.035));
    CHECK(sys.B_diag()[2] == doctest::Approx(2.25 * 0.035));
}
