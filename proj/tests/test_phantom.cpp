#include "doctest.h"
#include "oracles.hpp"

#include "craniotk/error.hpp"
#include "craniotk/phantom.hpp"

#include <numbers>

using namespace craniotk;

TEST_SUITE("phantom") {

TEST_CASE("voxel count tracks the analytic shell volume") {
    const PhantomSpec spec;
    const auto m = generate_phantom(spec, phantom_geometry(spec, {1, 1, 1}));
    const double analytic = phantom_volume(spec);
    CHECK(std::abs(static_cast<double>(m.count()) - analytic) / analytic < 0.02);
}

TEST_CASE("analytic volume without a base cut is the ellipsoid difference") {
    PhantomSpec spec;
    spec.base_cut_fraction = 0.0;
    const double a = 70, b = 90, c = 65, t = 6;
    const double want = 4.0 / 3.0 * std::numbers::pi * (a * b * c - (a - t) * (b - t) * (c - t));
    CHECK(phantom_volume(spec) == doctest::Approx(want).epsilon(1e-9));
}

TEST_CASE("invariants are enforced") {
    PhantomSpec spec;
    spec.thickness = 70.0;
    CHECK_THROWS_AS(spec.validate(), Error);
    spec = {};
    spec.thickness = 0.0;
    CHECK_THROWS_AS(spec.validate(), Error);
    spec = {};
    spec.base_cut_fraction = 0.5;
    CHECK_THROWS_AS(spec.validate(), Error);
    spec = {};
    spec.base_cut_fraction = -0.1;
    CHECK_THROWS_AS(spec.validate(), Error);
}

TEST_CASE("generation is deterministic") {
    PhantomSpec spec;
    spec.pose = RigidTransform::from_euler_zyx({0.1, -0.05, 0.2}, {3, -2, 1});
    const auto g = phantom_geometry(spec, {2, 2, 2});
    CHECK(generate_phantom(spec, g) == generate_phantom(spec, g));
}

TEST_CASE("phantom must fit the grid") {
    const PhantomSpec spec;
    try {
        generate_phantom(spec, oracle::grid(40, 40, 40, {2, 2, 2}, {-40, -40, -40}));
        FAIL("expected OutOfBounds");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::OutOfBounds);
    }
}

TEST_CASE("membership follows the pose") {
    PhantomSpec spec;
    spec.pose = RigidTransform::from_euler_zyx({0.4, 0.1, -0.2}, {5, 6, -7});
    const auto g = phantom_geometry(spec, {3, 3, 3});
    const auto m = generate_phantom(spec, g);
    const auto back = spec.pose.inverse();
    for (std::int64_t n = 0; n < m.size(); n += 7) {
        REQUIRE(m.get(n) == phantom_contains(spec, back.apply(g.world(g.unravel(n)))));
    }
}

TEST_CASE("single 6-connected component and mid-sagittal symmetry") {
    const PhantomSpec spec;
    const auto m = generate_phantom(spec, phantom_geometry(spec, {1, 1, 1}));
    CHECK(component_count(m, Connectivity::Face6) == 1);
    // The grid is centered on the phantom, so the mid-plane is x = 0.
    CHECK(oracle::dice(m, mirror_x(m)) >= 0.99);
}

TEST_CASE("population sampling") {
    const auto one = sample_population(1, 5, PopulationVariability::none());
    REQUIRE(one.size() == 1);
    const PhantomSpec def;
    CHECK(one[0].outer_semiaxes == def.outer_semiaxes);
    CHECK(one[0].thickness == def.thickness);
    CHECK(one[0].base_cut_fraction == def.base_cut_fraction);
    CHECK(one[0].pose.matrix() == def.pose.matrix());

    const auto a = sample_population(20, 42);
    const auto b = sample_population(20, 42);
    REQUIRE(a.size() == 20);
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].outer_semiaxes == b[i].outer_semiaxes);
        CHECK(a[i].thickness == b[i].thickness);
        CHECK(a[i].pose.matrix() == b[i].pose.matrix());
        CHECK(a[i].seed == b[i].seed);
        CHECK_NOTHROW(a[i].validate());
    }
    CHECK(sample_population(20, 43)[0].outer_semiaxes != a[0].outer_semiaxes);
}

TEST_CASE("population draws respect the truncation bound") {
    const PopulationVariability var;
    const PhantomSpec base;
    for (const auto& s : sample_population(200, 9, var)) {
        CHECK(std::abs(s.outer_semiaxes.x - base.outer_semiaxes.x) <= 2 * var.semiaxes_mm.x + 1e-9);
        CHECK(std::abs(s.thickness - base.thickness) <= 2 * var.thickness_mm + 1e-9);
        CHECK(rotation_angle(s.pose.rotation()) * 180.0 / std::numbers::pi <= 3 * 2 * var.rotation_deg + 1e-6);
    }
}

} // TEST_SUITE
