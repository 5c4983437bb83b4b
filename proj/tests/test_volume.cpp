#include "doctest.h"
#include "oracles.hpp"

#include "craniotk/error.hpp"
#include "craniotk/volume.hpp"

using namespace craniotk;

namespace {

ErrorCode code_of(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected an error");
    return ErrorCode::InvalidArgument;
}

} // namespace

TEST_SUITE("volume") {

TEST_CASE("geometry world and index round trip") {
    const auto g = oracle::grid(7, 5, 3, {0.7, 1.3, 2.1}, {-3.5, 10.0, 0.25});
    for (std::int64_t n = 0; n < g.voxel_count(); ++n) {
        const Index3 v = g.unravel(n);
        CHECK(g.linear(v[0], v[1], v[2]) == n);
        CHECK(g.index(g.world(v)) == v);
    }
    GridGeometry bad = g;
    bad.spacing.y = 0.0;
    CHECK(code_of([&] { bad.validate(); }) == ErrorCode::InvalidArgument);
    bad = g;
    bad.dims[2] = 0;
    CHECK(code_of([&] { bad.validate(); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("threshold") {
    ScalarGrid zeros(oracle::grid(3, 3, 3));
    CHECK(threshold(zeros, 0.5).empty());
    ScalarGrid ones(oracle::grid(3, 3, 3), 1.0);
    CHECK(threshold(ones, 0.5).count() == 27);

    ScalarGrid two(oracle::grid(2, 1, 1));
    two[0] = 0.3;
    two[1] = 0.7;
    const VoxelGrid m = threshold(two, 0.5);
    CHECK_FALSE(m.get(0));
    CHECK(m.get(1));
    CHECK(same_geometry(m.geometry(), two.geometry()));
}

TEST_CASE("threshold is monotone") {
    Rng rng(3);
    ScalarGrid g(oracle::grid(6, 6, 6));
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (auto& v : g.values()) v = u(rng);
    for (double t1 = 0.0; t1 <= 1.0; t1 += 0.1) {
        CHECK(is_subset(threshold(g, t1 + 0.05), threshold(g, t1)));
    }
}

TEST_CASE("signed distance of a single voxel") {
    VoxelGrid m(oracle::grid(9, 9, 9));
    m.set(4, 4, 4);
    CHECK(signed_distance(m).at(7, 4, 4) == 3.0);
    CHECK(signed_distance(m).at(4, 4, 4) == 0.0);

    VoxelGrid wide(oracle::grid(9, 9, 9, {2, 1, 1}));
    wide.set(4, 4, 4);
    CHECK(signed_distance(wide).at(7, 4, 4) == 6.0);
}

TEST_CASE("signed distance errors") {
    VoxelGrid m(oracle::grid(4, 4, 4));
    CHECK(code_of([&] { signed_distance(m); }) == ErrorCode::EmptyMask);
    CHECK(code_of([&] { signed_distance(m.complement()); }) == ErrorCode::FullMask);
}

TEST_CASE("signed distance matches brute force") {
    Rng rng(11);
    for (int trial = 0; trial < 40; ++trial) {
        const auto g = oracle::random_geometry(rng, 10);
        const auto m = oracle::random_mask(g, 0.3, rng);
        if (m.empty() || m.count() == m.size()) continue;
        const auto fast = signed_distance(m);
        const auto slow = oracle::signed_distance(m);
        for (std::int64_t n = 0; n < m.size(); ++n) {
            REQUIRE(fast[n] == doctest::Approx(slow[static_cast<std::size_t>(n)]).epsilon(1e-12));
        }
    }
}

TEST_CASE("surface is the face-adjacency boundary") {
    Rng rng(5);
    for (int trial = 0; trial < 30; ++trial) {
        const auto m = oracle::random_mask(oracle::random_geometry(rng), 0.6, rng);
        const auto s = surface(m);
        for (std::int64_t n = 0; n < m.size(); ++n) {
            const Index3 v = m.geometry().unravel(n);
            REQUIRE(s.get(n) == oracle::is_surface(m, v[0], v[1], v[2]));
        }
    }
}

TEST_CASE("morphology") {
    Rng rng(9);
    const auto m = oracle::random_mask(oracle::grid(6, 6, 6), 0.3, rng);
    CHECK(morph(m, MorphOp::Dilate, 0.0) == m);
    CHECK(morph(m, MorphOp::Erode, 0.0) == m);

    VoxelGrid dot(oracle::grid(5, 5, 5));
    dot.set(2, 2, 2);
    const auto cross = morph(dot, MorphOp::Dilate, 1.0);
    CHECK(cross.count() == 7);
    CHECK(cross == oracle::dilate(dot, 1.0));

    VoxelGrid all(oracle::grid(5, 5, 5));
    all = all.complement();
    CHECK(morph(all, MorphOp::Erode, 1.7).count() <= all.count());

    CHECK(code_of([&] { morph(m, MorphOp::Dilate, -1.0); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("morphology matches brute-force balls") {
    Rng rng(21);
    std::uniform_real_distribution<double> radius(0.0, 3.5);
    for (int trial = 0; trial < 25; ++trial) {
        const auto g = oracle::random_geometry(rng, 8);
        const auto m = oracle::random_mask(g, 0.25, rng);
        const double r = radius(rng);
        REQUIRE(morph(m, MorphOp::Dilate, r) == oracle::dilate(m, r));
        REQUIRE(morph(m, MorphOp::Erode, r) == oracle::erode(m, r));
        REQUIRE(morph(m, MorphOp::Close, r) == oracle::erode(oracle::dilate(m, r), r));
        REQUIRE(morph(m, MorphOp::Open, r) == oracle::dilate(oracle::erode(m, r), r));
    }
}

TEST_CASE("closing contains a convex shape") {
    VoxelGrid ball(oracle::grid(21, 21, 21, {1.0, 1.0, 1.5}));
    for (std::int64_t n = 0; n < ball.size(); ++n) {
        const Vec3 p = ball.geometry().world(ball.geometry().unravel(n)) - Vec3{10, 10, 15};
        ball.set(n, norm(p) <= 7.0);
    }
    for (double r : {1.0, 1.5, 2.5}) {
        CHECK(is_subset(ball, morph(ball, MorphOp::Close, r)));
    }
}

TEST_CASE("largest component") {
    VoxelGrid m(oracle::grid(12, 4, 4));
    for (int i = 0; i < 10; ++i) m.set(i % 5, i / 5, 0);
    for (int i = 0; i < 3; ++i) m.set(9 + i, 3, 3);
    const auto big = largest_component(m, Connectivity::Face6);
    CHECK(big.count() == 10);
    CHECK_FALSE(big.get(9, 3, 3));

    VoxelGrid empty(oracle::grid(3, 3, 3));
    CHECK(largest_component(empty, Connectivity::Full26).empty());

    VoxelGrid tie(oracle::grid(3, 1, 1));
    tie.set(0, 0, 0);
    tie.set(2, 0, 0);
    const auto first = largest_component(tie, Connectivity::Face6);
    CHECK(first.count() == 1);
    CHECK(first.get(0, 0, 0));
}

TEST_CASE("components match union-find") {
    Rng rng(13);
    for (int trial = 0; trial < 40; ++trial) {
        const auto m = oracle::random_mask(oracle::random_geometry(rng), 0.35, rng);
        for (auto conn : {Connectivity::Face6, Connectivity::Full26}) {
            const auto c = label_components(m, conn);
            const auto want = oracle::component_sizes(m, static_cast<int>(conn));
            REQUIRE(c.sizes.size() == want.size() + 1);
            for (std::size_t i = 0; i < want.size(); ++i) {
                REQUIRE(c.sizes[i + 1] == want[i]);
            }
            REQUIRE(component_count(m, conn) == static_cast<std::int64_t>(want.size()));
        }
    }
}

TEST_CASE("set operations") {
    Rng rng(17);
    const auto g = oracle::grid(5, 4, 3);
    const auto a = oracle::random_mask(g, 0.5, rng);
    const auto b = oracle::random_mask(g, 0.5, rng);
    const VoxelGrid none(g);
    CHECK(set_ops(a, none, SetOp::Union) == a);
    CHECK(set_ops(a, a, SetOp::Subtract).empty());
    CHECK(set_ops(a, a, SetOp::Union) == a);
    for (std::int64_t n = 0; n < a.size(); ++n) {
        REQUIRE(set_ops(a, b, SetOp::Union).get(n) == (a.get(n) || b.get(n)));
        REQUIRE(set_ops(a, b, SetOp::Intersect).get(n) == (a.get(n) && b.get(n)));
        REQUIRE(set_ops(a, b, SetOp::Subtract).get(n) == (a.get(n) && !b.get(n)));
        REQUIRE(set_ops(a, b, SetOp::Xor).get(n) == (a.get(n) != b.get(n)));
    }

    VoxelGrid p(oracle::grid(2, 1, 1)), q(oracle::grid(2, 1, 1));
    p.set(0);
    q.set(0);
    q.set(1);
    const auto x = set_ops(p, q, SetOp::Xor);
    CHECK_FALSE(x.get(0));
    CHECK(x.get(1));

    const VoxelGrid moved(oracle::grid(5, 4, 3, {1, 1, 1}, {0, 0, 1e-6}));
    CHECK(code_of([&] { set_ops(a, moved, SetOp::Union); }) == ErrorCode::GeometryMismatch);
    const VoxelGrid other(oracle::grid(5, 4, 4));
    CHECK(code_of([&] { set_ops(a, other, SetOp::Union); }) == ErrorCode::GeometryMismatch);
}

TEST_CASE("mirror and centroid") {
    VoxelGrid m(oracle::grid(5, 2, 1, {2, 1, 1}, {10, 0, 0}));
    m.set(0, 1, 0);
    const auto r = mirror_x(m);
    CHECK(r.get(4, 1, 0));
    CHECK(r.count() == 1);
    CHECK(mirror_x(r) == m);
    const Vec3 c = centroid(m);
    CHECK(c.x == 10.0);
    CHECK(c.y == 1.0);
    CHECK(code_of([&] { centroid(VoxelGrid(oracle::grid(2, 2, 2))); }) == ErrorCode::EmptyMask);
}

TEST_CASE("bounding box") {
    VoxelGrid m(oracle::grid(6, 6, 6));
    CHECK_FALSE(bounding_box(m).has_value());
    m.set(1, 2, 3);
    m.set(4, 2, 5);
    const auto b = bounding_box(m);
    REQUIRE(b.has_value());
    CHECK(b->lo == Index3{1, 2, 3});
    CHECK(b->hi == Index3{5, 3, 6});
}

TEST_CASE("complement keeps padding bits clear") {
    VoxelGrid m(oracle::grid(3, 3, 3));
    const auto c = m.complement();
    CHECK(c.count() == 27);
    CHECK((c.words()[0] >> 27) == 0u);
}

} // TEST_SUITE
