#include "doctest.h"
#include "oracles.hpp"

#include "craniotk/craniectomy.hpp"
#include "craniotk/error.hpp"
#include "craniotk/nelder_mead.hpp"
#include "craniotk/phantom.hpp"
#include "craniotk/registration.hpp"

#include <numbers>

using namespace craniotk;

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

// Rotation angle (degrees) and displacement of the centroid (mm) left over
// when `recovered` should undo `applied`.
std::pair<double, double> residual(const RigidTransform& recovered, const RigidTransform& applied, Vec3 at) {
    const RigidTransform e = recovered * applied;
    return {rotation_angle(e.rotation()) / kDeg, norm(e.apply(at) - at)};
}

struct Fixture {
    PhantomSpec spec;
    GridGeometry geometry;
    VoxelGrid full;
    explicit Fixture(double spacing) {
        geometry = phantom_geometry(spec, {spacing, spacing, spacing}, 25.0);
        full = generate_phantom(spec, geometry);
    }
};

const Fixture& fixture_1mm() {
    static const Fixture f(1.0);
    return f;
}

} // namespace

TEST_SUITE("registration") {

TEST_CASE("rigid transform algebra") {
    const auto t = RigidTransform::from_euler_zyx({0.3, -0.2, 0.1}, {4, -5, 6}, {1, 2, 3});
    CHECK(max_abs_difference(t * t.inverse(), RigidTransform::identity()) < 1e-12);
    CHECK(max_abs_difference(t.inverse().inverse(), t) < 1e-9);
    const Vec3 angles = euler_zyx(t.rotation());
    CHECK(angles.x == doctest::Approx(0.3));
    CHECK(angles.y == doctest::Approx(-0.2));
    CHECK(angles.z == doctest::Approx(0.1));
    // Rotation is about the center.
    const auto r = RigidTransform::from_euler_zyx({0.5, 0, 0}, {}, {7, 8, 9});
    CHECK(norm(r.apply({7, 8, 9}) - Vec3{7, 8, 9}) < 1e-12);
    CHECK(determinant(t.rotation()) == doctest::Approx(1.0));
    CHECK(rotation_angle(rotation_zyx(0.25, 0, 0)) == doctest::Approx(0.25));

    auto m = t.matrix();
    CHECK(max_abs_difference(RigidTransform::from_matrix(m), t) == 0.0);
    m[0] *= 1.01;
    CHECK_THROWS_AS(RigidTransform::from_matrix(m), Error);
    auto reflect = RigidTransform::identity().matrix();
    reflect[0] = -1.0;
    CHECK_THROWS_AS(RigidTransform::from_matrix(reflect), Error);
    auto bottom = RigidTransform::identity().matrix();
    bottom[12] = 0.5;
    CHECK_THROWS_AS(RigidTransform::from_matrix(bottom), Error);
}

TEST_CASE("nelder-mead minimises a quadratic") {
    auto f = [](const std::vector<double>& x) { return (x[0] - 1) * (x[0] - 1) + 3 * (x[1] + 2) * (x[1] + 2) + 5; };
    const auto r = nelder_mead(f, {0, 0}, {1, 1}, 500, 1e-12);
    CHECK(r.converged);
    CHECK(r.x[0] == doctest::Approx(1.0).epsilon(1e-4));
    CHECK(r.x[1] == doctest::Approx(-2.0).epsilon(1e-4));
    for (std::size_t i = 1; i < r.best_history.size(); ++i) {
        REQUIRE(r.best_history[i] <= r.best_history[i - 1]);
    }
    const auto capped = nelder_mead(f, {0, 0}, {1, 1}, 3, 1e-12);
    CHECK_FALSE(capped.converged);
    CHECK(capped.iterations == 3);
}

TEST_CASE("resample identity and lattice shifts") {
    Rng rng(2);
    const auto g = oracle::grid(12, 10, 8, {1.0, 1.5, 2.0}, {3, 4, 5});
    const auto m = oracle::random_mask(g, 0.4, rng);
    CHECK(resample(m, RigidTransform::identity(), g) == m);
    CHECK(resample(m, RigidTransform::identity(), g, Interpolation::TrilinearThreshold) == m);

    const auto shifted = resample(m, RigidTransform::translation({1.0, 0, 0}), g);
    for (std::int64_t k = 0; k < 8; ++k)
        for (std::int64_t j = 0; j < 10; ++j) {
            REQUIRE_FALSE(shifted.get(0, j, k));
            for (std::int64_t i = 1; i < 12; ++i) REQUIRE(shifted.get(i, j, k) == m.get(i - 1, j, k));
        }
    // Interior count is preserved; only the column pushed off the edge is lost.
    std::int64_t lost = 0;
    for (std::int64_t k = 0; k < 8; ++k)
        for (std::int64_t j = 0; j < 10; ++j) lost += m.get(11, j, k);
    CHECK(shifted.count() == m.count() - lost);
}

TEST_CASE("resample samples the source at the inverse-mapped point") {
    Rng rng(8);
    const auto src = oracle::random_mask(oracle::grid(9, 9, 9, {1.2, 1.2, 1.2}), 0.5, rng);
    const auto dst_geom = oracle::grid(7, 8, 9, {0.9, 1.1, 1.3}, {-1, 0.5, 1});
    const auto t = RigidTransform::from_euler_zyx({0.2, 0.1, -0.3}, {0.5, -0.25, 0.75}, {5, 5, 5});
    const auto out = resample(src, t, dst_geom);
    const auto inv = t.inverse();
    for (std::int64_t n = 0; n < out.size(); ++n) {
        const Index3 v = src.geometry().index(inv.apply(dst_geom.world(dst_geom.unravel(n))));
        REQUIRE(out.get(n) == (src.geometry().contains(v) && src.get(v)));
    }
}

TEST_CASE("map_back") {
    Rng rng(3);
    const auto g = oracle::grid(10, 10, 10);
    const auto m = oracle::random_mask(g, 0.3, rng);
    CHECK(map_back(VoxelGrid(g), RigidTransform::from_euler_zyx({0.1, 0, 0}, {1, 2, 3}), g).empty());
    CHECK(map_back(m, RigidTransform::identity(), g) == m);
}

TEST_CASE("resample round trip on a smooth phantom") {
    const auto& f = fixture_1mm();
    const auto t = RigidTransform::from_euler_zyx({12 * kDeg, -6 * kDeg, 4 * kDeg}, {6.3, -4.1, 2.7});
    const auto there = resample(f.full, t, f.geometry, Interpolation::TrilinearThreshold);
    const auto back = resample(there, t.inverse(), f.geometry, Interpolation::TrilinearThreshold);
    CHECK(oracle::dice(back, f.full) >= 0.95);
}

TEST_CASE("forward-resampled defect maps back") {
    const auto& f = fixture_1mm();
    const auto trip = apply_craniectomy(f.full, sample_spec(f.full, 77));
    const auto t = RigidTransform::from_euler_zyx({-9 * kDeg, 5 * kDeg, 7 * kDeg}, {-3.3, 8.2, 1.1});
    const auto common = resample(trip.defect, t, f.geometry);
    CHECK(oracle::dice(map_back(common, t, f.geometry), trip.defect) >= 0.90);
}

TEST_CASE("self registration is the identity") {
    const auto& f = fixture_1mm();
    const auto r = register_rigid(f.full, f.full);
    const auto [deg, mm] = residual(r.transform, RigidTransform::identity(), centroid(f.full));
    CHECK(deg <= 0.5);
    CHECK(mm <= 0.5);
    CHECK(r.objective >= r.initial_objective);
}

TEST_CASE("recovers a known rotation and shift") {
    const auto& f = fixture_1mm();
    const auto applied = RigidTransform::from_euler_zyx({10 * kDeg, 0, 0}, {8, 0, 0});
    const auto moving = resample(f.full, applied, f.geometry);
    const auto r = register_rigid(moving, f.full);
    const auto [deg, mm] = residual(r.transform, applied, centroid(f.full));
    CHECK(deg <= 2.0);
    CHECK(mm <= 2.0);
    CHECK(r.objective >= r.initial_objective);
}

TEST_CASE("recovery without the moment start") {
    const auto& f = fixture_1mm();
    const auto applied = RigidTransform::from_euler_zyx({4 * kDeg, 3 * kDeg, 0}, {5, -3, 2});
    const auto moving = resample(f.full, applied, f.geometry);
    RegistrationOptions opts;
    opts.moment_init = false;
    const auto r = register_rigid(moving, f.full, opts);
    const auto [deg, mm] = residual(r.transform, applied, centroid(f.full));
    CHECK(deg <= 2.0);
    CHECK(mm <= 2.0);
}

TEST_CASE("a defected skull still registers") {
    const auto& f = fixture_1mm();
    const auto trip = apply_craniectomy(f.full, sample_spec(f.full, 5));
    const auto applied = RigidTransform::from_euler_zyx({-7 * kDeg, 4 * kDeg, 3 * kDeg}, {-6, 5, 3});
    const auto moving = resample(trip.defected, applied, f.geometry);
    const RegistrationTarget target(f.full);
    const auto r = register_rigid(moving, target);
    const auto [deg, mm] = residual(r.transform, applied, centroid(f.full));
    CHECK(deg <= 2.0);
    CHECK(mm <= 2.0);
    // Alignment never lowers overlap with the target.
    const double before = oracle::dice(resample(moving, RigidTransform::identity(), f.geometry), f.full);
    const double after = oracle::dice(resample(moving, r.transform, f.geometry), f.full);
    CHECK(after >= before);
}

TEST_CASE("swapping moving and fixed inverts the result") {
    Fixture f(2.0);
    const auto applied = RigidTransform::from_euler_zyx({8 * kDeg, -3 * kDeg, 2 * kDeg}, {4, 3, -2});
    const auto b = resample(f.full, applied, f.geometry);
    const auto ab = register_rigid(f.full, b).transform;
    const auto ba = register_rigid(b, f.full).transform;
    const auto [deg, mm] = residual(ab, ba, centroid(f.full));
    CHECK(deg <= 1.0);
    CHECK(mm <= 1.0);
}

TEST_CASE("registration is deterministic") {
    Fixture f(2.0);
    const auto moving = resample(f.full, RigidTransform::from_euler_zyx({0.1, 0, 0}, {3, 0, 0}), f.geometry);
    CHECK(register_rigid(moving, f.full).transform.matrix() == register_rigid(moving, f.full).transform.matrix());
}

TEST_CASE("registration errors") {
    Fixture f(3.0);
    const VoxelGrid empty(f.geometry);
    CHECK_THROWS_AS(register_rigid(empty, f.full), Error);
    try {
        register_rigid(empty, f.full);
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::EmptyInput);
    }
    try {
        RegistrationTarget t(empty);
        FAIL("expected EmptyInput");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::EmptyInput);
    }
}

TEST_CASE("iteration cap reports non-convergence with the best result") {
    Fixture f(3.0);
    const auto moving = resample(f.full, RigidTransform::from_euler_zyx({0.2, 0, 0}, {6, 0, 0}), f.geometry);
    RegistrationOptions opts;
    opts.max_iterations = 20;
    opts.moment_init = false;
    const auto r = register_rigid(moving, f.full, opts);
    CHECK_FALSE(r.converged);
    CHECK(r.objective >= r.initial_objective);
    try {
        require_converged(r);
        FAIL("expected NonConvergence");
    } catch (const NonConvergenceError& e) {
        CHECK(e.code() == ErrorCode::NonConvergence);
        CHECK(e.result().transform.matrix() == r.transform.matrix());
    }
}

TEST_CASE("principal frame centers and aligns the skull") {
    Fixture f(2.0);
    const auto pose = RigidTransform::from_euler_zyx({0.2, -0.1, 0.15}, {10, -5, 3});
    const auto posed = resample(f.full, pose, f.geometry);
    const auto frame = principal_frame(posed);
    CHECK(norm(frame.apply(centroid(posed))) < 1e-9);
    // The canonical phantom is already in its principal frame, so frame * pose
    // is a pure shift taking the unposed centroid to the origin.
    const auto e = frame * pose;
    CHECK(rotation_angle(e.rotation()) / kDeg <= 1.0);
    CHECK(norm(e.apply(centroid(f.full))) <= 1.0);
}

} // TEST_SUITE
