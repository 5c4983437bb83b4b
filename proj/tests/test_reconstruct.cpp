#include "doctest.h"
#include "oracles.hpp"

#include "craniotk/craniectomy.hpp"
#include "craniotk/phantom.hpp"
#include "craniotk/reconstruct.hpp"

using namespace craniotk;

namespace {

const VoxelGrid& skull() {
    static const VoxelGrid m = [] {
        const PhantomSpec spec;
        return generate_phantom(spec, phantom_geometry(spec, {1.5, 1.5, 1.5}));
    }();
    return m;
}

Atlas atlas_of(const VoxelGrid& m) {
    Atlas a;
    a.average = ScalarGrid(m.geometry());
    for (std::int64_t n = 0; n < m.size(); ++n) a.average[n] = m.get(n) ? 1.0 : 0.0;
    a.binary = m;
    return a;
}

// Surface point of the skull straight out from the center along `dir`.
Vec3 surface_point(const VoxelGrid& m, Vec3 dir) {
    const auto& g = m.geometry();
    const Vec3 c = g.world((g.dims[0] - 1) / 2, (g.dims[1] - 1) / 2, (g.dims[2] - 1) / 2);
    Vec3 last = c;
    for (double t = 0; t < 200; t += 0.25) {
        const Vec3 p = c + t * dir;
        const Index3 v = g.index(p);
        if (!g.contains(v)) break;
        if (m.get(v)) last = g.world(v);
    }
    return last;
}

CraniectomySpec sphere_at(Vec3 c, double r) {
    CraniectomySpec s;
    s.center = c;
    s.radius = r;
    return s;
}

} // namespace

TEST_SUITE("reconstruct") {

TEST_CASE("postprocess basics") {
    const auto g = oracle::grid(40, 20, 20);
    const VoxelGrid empty(g);
    CHECK(postprocess(empty, empty).empty());

    // A 500-voxel slab and a 20-voxel bar.
    VoxelGrid raw(g);
    for (int i = 0; i < 10; ++i)
        for (int j = 0; j < 10; ++j)
            for (int k = 0; k < 5; ++k) raw.set(2 + i, 2 + j, 2 + k);
    for (int i = 0; i < 20; ++i) raw.set(15 + i, 15, 15);
    PostprocessOptions no_close;
    no_close.close_radius_mm = 0.0;
    const auto kept = postprocess(raw, empty, no_close);
    CHECK(kept.count() == 500);
    CHECK_FALSE(kept.get(20, 15, 15));
}

TEST_CASE("distance gate drops far specks") {
    const auto g = oracle::grid(80, 20, 20);
    VoxelGrid defected(g);
    for (int j = 0; j < 20; ++j)
        for (int k = 0; k < 20; ++k) defected.set(0, j, k);
    VoxelGrid raw(g);
    raw.set(55, 10, 10);
    CHECK(postprocess(raw, defected).empty());
    VoxelGrid near(g);
    near.set(5, 10, 10);
    CHECK(postprocess(near, defected).count() == 1);
}

TEST_CASE("postprocess is idempotent and never overlaps bone") {
    Rng rng(12);
    for (int trial = 0; trial < 20; ++trial) {
        const auto g = oracle::random_geometry(rng, 14);
        const auto raw = oracle::random_mask(g, 0.5, rng);
        const auto bone = oracle::random_mask(g, 0.15, rng);
        const auto once = postprocess(raw, bone);
        REQUIRE(postprocess(once, bone) == once);
        REQUIRE(set_ops(once, bone, SetOp::Intersect).empty());
    }
}

TEST_CASE("atlas subtract on an intact skull is empty") {
    const auto atlas = atlas_of(skull());
    const auto r = atlas_subtract(skull(), atlas, RigidTransform::identity());
    CHECK(r.empty_prediction);
    CHECK(r.prediction.empty());
}

TEST_CASE("atlas subtract recovers a removed flap") {
    const auto atlas = atlas_of(skull());
    const auto& full = skull();
    const CraniectomySampler sampler(full);
    for (std::uint64_t seed = 0; seed < 6; ++seed) {
        const auto trip = apply_craniectomy(full, sampler.draw(seed));
        const auto r = atlas_subtract(trip.defected, atlas, RigidTransform::identity());
        CHECK_FALSE(r.empty_prediction);
        CHECK(oracle::dice(r.prediction, trip.defect) >= 0.99);
        CHECK(is_subset(r.prediction, atlas.binary));
        CHECK(set_ops(r.prediction, trip.defected, SetOp::Intersect).empty());
    }
}

TEST_CASE("atlas subtract honors the transform") {
    const auto atlas = atlas_of(skull());
    const auto trip = apply_craniectomy(skull(), sample_spec(skull(), 3));
    // Moving the input by a lattice step and handing over the inverse must
    // reproduce the unmoved result.
    const auto shift = RigidTransform::translation({1.5, 0, 0});
    const auto moved = resample(trip.defected, shift, skull().geometry());
    const auto r = atlas_subtract(moved, atlas, shift.inverse());
    CHECK(oracle::dice(r.prediction, trip.defect) >= 0.99);
}

TEST_CASE("mirror of a symmetric skull is empty") {
    const auto r = mirror_reconstruct(skull());
    CHECK(r.empty_prediction);
}

TEST_CASE("mirror recovers a unilateral flap") {
    const auto& full = skull();
    for (Vec3 dir : {Vec3{1, 0, 1}, Vec3{1, 0.5, 0.3}, Vec3{-1, -0.3, 0.8}}) {
        const auto trip = apply_craniectomy(full, sphere_at(surface_point(full, (1.0 / norm(dir)) * dir), 22.0));
        const auto r = mirror_reconstruct(trip.defected);
        CHECK(oracle::dice(r.prediction, trip.defect) >= 0.90);
        CHECK(set_ops(r.prediction, trip.defected, SetOp::Intersect).empty());
    }
}

TEST_CASE("mirror cannot fill bilateral flaps") {
    const auto& full = skull();
    const Vec3 right = surface_point(full, (1.0 / std::sqrt(2.0)) * Vec3{1, 0, 1});
    const Vec3 left{-right.x, right.y, right.z};
    auto trip = apply_craniectomy(full, sphere_at(right, 22.0));
    const auto both = apply_craniectomy(trip.defected, sphere_at(left, 22.0));
    const auto defect = set_ops(trip.defect, both.defect, SetOp::Union);
    const auto r = mirror_reconstruct(both.defected);
    CHECK(static_cast<double>(r.prediction.count()) < 0.05 * static_cast<double>(defect.count()));
}

} // TEST_SUITE
