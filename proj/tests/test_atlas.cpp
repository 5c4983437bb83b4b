#include "doctest.h"
#include "oracles.hpp"

#include "craniotk/atlas.hpp"
#include "craniotk/error.hpp"
#include "craniotk/io.hpp"
#include "craniotk/phantom.hpp"

#include <filesystem>

using namespace craniotk;

namespace {

// Coarse common grid so that atlas builds stay fast.
AtlasOptions coarse(double spacing = 3.0) {
    AtlasOptions o;
    const auto n = [&](double mm) { return static_cast<std::int64_t>(std::ceil(mm / spacing)); };
    o.grid.dims = {n(200), n(240), n(180)};
    o.grid.spacing = {spacing, spacing, spacing};
    return o;
}

std::vector<VoxelGrid> population(int n, std::uint64_t seed, double spacing) {
    std::vector<VoxelGrid> out;
    for (const auto& spec : sample_population(n, seed)) {
        out.push_back(generate_phantom(spec, phantom_geometry(spec, {spacing, spacing, spacing})));
    }
    return out;
}

std::filesystem::path scratch(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / ("craniotk_unit_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

} // namespace

TEST_SUITE("atlas") {

TEST_CASE("identical skulls reproduce the input") {
    const PhantomSpec spec;
    const auto g = phantom_geometry(spec, {3, 3, 3});
    const auto skull = generate_phantom(spec, g);
    AtlasOptions o = coarse();
    o.canonical_frame = false;
    o.geometry = g;
    o.iterations = 1;
    const auto exact = build_atlas({skull, skull, skull}, o);
    for (double v : exact.average.values()) {
        REQUIRE((v == 0.0 || v == 1.0));
    }
    CHECK(oracle::dice(exact.binary, skull) >= 0.98);
    CHECK(exact.case_ids.size() == 3);
}

TEST_CASE("two skulls at t = 0.5 keep the voxels both share") {
    const auto fulls = population(2, 5, 3.0);
    const auto atlas = build_atlas(fulls, coarse());
    for (std::int64_t n = 0; n < atlas.average.size(); ++n) {
        const double v = atlas.average[n];
        REQUIRE((v == 0.0 || v == 0.5 || v == 1.0));
        REQUIRE(atlas.binary.get(n) == (v >= 0.5));
    }
}

TEST_CASE("refinement raises the mean Dice to the inputs") {
    const auto fulls = population(20, 11, 2.0);
    const auto atlas = build_atlas(fulls, coarse(2.0));
    REQUIRE(atlas.round_dice.size() == 3);
    CHECK(atlas.round_dice[1] > atlas.round_dice[0]);
    // One dominant 6-connected shell. Tilted base cuts leave a few detached
    // single voxels along the rim, so the whole mask is not one component.
    const auto comps = label_components(atlas.binary, Connectivity::Face6);
    const auto largest = *std::max_element(comps.sizes.begin() + 1, comps.sizes.end());
    CHECK(static_cast<double>(largest) >= 0.999 * static_cast<double>(atlas.binary.count()));
    for (double v : atlas.average.values()) {
        REQUIRE(v >= 0.0);
        REQUIRE(v <= 1.0);
    }
    CHECK(atlas.binary == threshold(atlas.average, 0.5));
}

TEST_CASE("higher thresholds give smaller atlases") {
    const auto fulls = population(4, 3, 3.0);
    auto lo = coarse();
    lo.threshold = 0.4;
    lo.iterations = 0;
    auto hi = lo;
    hi.threshold = 0.6;
    // Without refinement rounds the registrations do not depend on t.
    const auto a = build_atlas(fulls, lo);
    const auto b = build_atlas(fulls, hi);
    CHECK(is_subset(b.binary, a.binary));
    const auto refined = build_atlas(fulls, coarse());
    CHECK(is_subset(threshold(refined.average, 0.6), threshold(refined.average, 0.4)));
}

TEST_CASE("build is deterministic and thread-count independent") {
    const auto fulls = population(4, 8, 3.0);
    auto one = coarse();
    auto many = coarse();
    many.threads = 4;
    const auto a = build_atlas(fulls, one);
    const auto b = build_atlas(fulls, many);
    CHECK(a.binary == b.binary);
    CHECK(std::equal(a.average.values().begin(), a.average.values().end(), b.average.values().begin()));
}

TEST_CASE("the common grid is centered on the reference skull") {
    const auto fulls = population(2, 2, 3.0);
    const auto atlas = build_atlas(fulls, coarse());
    const auto& g = atlas.geometry();
    const Vec3 mid = g.world((g.dims[0] - 1) / 2, (g.dims[1] - 1) / 2, (g.dims[2] - 1) / 2);
    CHECK(norm(mid) <= 2.0 * 3.0);
    // Every coordinate survives a float32 round trip.
    for (int a = 0; a < 3; ++a) {
        CHECK(static_cast<double>(static_cast<float>(g.origin[a])) == g.origin[a]);
        CHECK(static_cast<double>(static_cast<float>(g.spacing[a])) == g.spacing[a]);
    }
}

TEST_CASE("save and load") {
    const auto fulls = population(3, 4, 3.0);
    const auto atlas = build_atlas(fulls, coarse(), {"a", "b", "c"});
    const auto dir = scratch("atlas");
    save_atlas(atlas, dir);
    const auto back = load_atlas(dir);
    CHECK(back.binary == atlas.binary);
    CHECK(same_geometry(back.geometry(), atlas.geometry()));
    CHECK(back.threshold == atlas.threshold);
    CHECK(back.iterations == atlas.iterations);
    CHECK(back.case_ids == std::vector<std::string>{"a", "b", "c"});
    for (std::int64_t n = 0; n < atlas.average.size(); ++n) {
        REQUIRE(back.average[n] == doctest::Approx(atlas.average[n]).epsilon(1e-6));
    }

    // Meta that disagrees with the volumes is rejected.
    auto meta = read_text_file(dir / "atlas.meta");
    const auto pos = meta.find("threshold=");
    meta.replace(pos, meta.find('\n', pos) - pos, "threshold=0.9");
    write_text_file(dir / "atlas.meta", meta);
    try {
        load_atlas(dir);
        FAIL("expected SchemaViolation");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::SchemaViolation);
    }
}

TEST_CASE("prior channels") {
    const auto fulls = population(2, 6, 3.0);
    const auto atlas = build_atlas(fulls, coarse());
    const VoxelGrid empty(atlas.geometry());
    const auto [c1, c2] = prior_channel(empty, atlas);
    CHECK(c1.empty());
    CHECK(c2 == atlas.binary);
    const auto [d1, d2] = prior_channel(atlas.binary, atlas);
    CHECK(d1 == atlas.binary);
    CHECK(d2 == atlas.binary);
    CHECK(same_geometry(d1.geometry(), d2.geometry()));
    try {
        prior_channel(fulls[0], atlas);
        FAIL("expected GeometryMismatch");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::GeometryMismatch);
    }
}

TEST_CASE("argument checks") {
    const auto fulls = population(2, 1, 3.0);
    auto code = [](auto&& fn) {
        try {
            fn();
        } catch (const Error& e) {
            return e.code();
        }
        return ErrorCode::IoFailure;
    };
    CHECK(code([&] { build_atlas({fulls[0]}, coarse()); }) == ErrorCode::InvalidArgument);
    auto bad = coarse();
    bad.threshold = 0.0;
    CHECK(code([&] { build_atlas(fulls, bad); }) == ErrorCode::InvalidArgument);
    CHECK(code([&] { build_atlas(fulls, coarse(), {"only-one"}); }) == ErrorCode::InvalidArgument);
    CHECK(code([&] { build_atlas({fulls[0], VoxelGrid(fulls[1].geometry())}, coarse()); }) == ErrorCode::EmptyInput);
}

} // TEST_SUITE
