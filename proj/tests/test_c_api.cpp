// Exercises the shared library through its C header only.
#include "doctest.h"

#include "craniotk/craniotk.h"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

namespace {

std::string scratch(const char* name) {
    const auto dir = std::filesystem::temp_directory_path() / (std::string("craniotk_capi_") + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir.string();
}

ctk_volume* cube_volume(int64_t n, int64_t lo, int64_t hi) {
    const int64_t dims[3] = {n, n, n};
    const double spacing[3] = {1, 1, 1};
    const double origin[3] = {0, 0, 0};
    ctk_volume* v = nullptr;
    REQUIRE(ctk_volume_create(dims, spacing, origin, &v) == CTK_OK);
    for (int64_t k = lo; k < hi; ++k)
        for (int64_t j = lo; j < hi; ++j)
            for (int64_t i = lo; i < hi; ++i) ctk_volume_set(v, i, j, k, 1);
    return v;
}

} // namespace

TEST_SUITE("c_api") {

TEST_CASE("version and status names") {
    CHECK(std::string(ctk_version()) == "0.3.0");
    CHECK(std::string(ctk_status_name(CTK_GEOMETRY_MISMATCH)) == "GeometryMismatch");
    CHECK(std::string(ctk_status_name(CTK_OK)) == "Ok");
    CHECK(ctk_resolve_threads(3) == 3);
    CHECK(ctk_derive_seed(1, 2) == ctk_derive_seed(1, 2));
    CHECK(ctk_derive_seed(1, 2) != ctk_derive_seed(1, 3));
}

TEST_CASE("volumes and errors") {
    ctk_volume* a = cube_volume(8, 2, 5);
    int64_t count = 0;
    CHECK(ctk_volume_count(a, &count) == CTK_OK);
    CHECK(count == 27);

    std::vector<uint8_t> buf(512);
    CHECK(ctk_volume_export(a, buf.data(), buf.size()) == CTK_OK);
    CHECK(buf[2 + 8 * (2 + 8 * 2)] == 1);
    CHECK(ctk_volume_export(a, buf.data(), 10) == CTK_INVALID_ARGUMENT);

    ctk_volume* b = cube_volume(9, 0, 1);
    ctk_volume* out = nullptr;
    CHECK(ctk_volume_set_op(a, b, CTK_UNION, &out) == CTK_GEOMETRY_MISMATCH);
    CHECK(std::strlen(ctk_last_error()) > 0);
    CHECK(out == nullptr);

    int value = -1;
    CHECK(ctk_volume_get(a, 8, 0, 0, &value) == CTK_OUT_OF_BOUNDS);
    CHECK(ctk_volume_get(nullptr, 0, 0, 0, &value) == CTK_INVALID_ARGUMENT);

    ctk_volume* dil = nullptr;
    CHECK(ctk_volume_morph(a, CTK_DILATE, 1.0, &dil) == CTK_OK);
    ctk_volume_count(dil, &count);
    CHECK(count == 27 + 6 * 9);

    double c[3];
    CHECK(ctk_volume_centroid(a, c) == CTK_OK);
    CHECK(c[0] == 3.0);

    const std::string dir = scratch("vol");
    const std::string path = dir + "/a.nii.gz";
    CHECK(ctk_volume_write(a, path.c_str()) == CTK_OK);
    ctk_volume* back = nullptr;
    CHECK(ctk_volume_read(path.c_str(), &back) == CTK_OK);
    int equal = 0;
    CHECK(ctk_volume_equal(a, back, &equal) == CTK_OK);
    CHECK(equal == 1);
    CHECK(ctk_volume_read((dir + "/missing.nii").c_str(), &out) == CTK_IO_FAILURE);

    ctk_volume_free(a);
    ctk_volume_free(b);
    ctk_volume_free(dil);
    ctk_volume_free(back);
    ctk_volume_free(nullptr);
}

TEST_CASE("metrics") {
    ctk_volume* a = cube_volume(10, 2, 6);
    ctk_volume* b = cube_volume(10, 3, 7);
    double dice = 0, hd = 0;
    CHECK(ctk_dice(a, a, &dice) == CTK_OK);
    CHECK(dice == 1.0);
    CHECK(ctk_hausdorff(a, b, 100.0, &hd) == CTK_OK);
    CHECK(hd == doctest::Approx(std::sqrt(3.0)));
    int has_hd = 1;
    ctk_volume* empty = cube_volume(10, 0, 0);
    CHECK(ctk_evaluate_case(empty, a, 100.0, &dice, &has_hd, &hd) == CTK_OK);
    CHECK(dice == 0.0);
    CHECK(has_hd == 0);
    CHECK(ctk_hausdorff(empty, a, 100.0, &hd) == CTK_EMPTY_MASK);

    ctk_report* r = nullptr;
    REQUIRE(ctk_report_create(100.0, &r) == CTK_OK);
    CHECK(ctk_report_add(r, "x", "test", 0.8, 1, 2.0) == CTK_OK);
    CHECK(ctk_report_add(r, "y", "test", 0.9, 1, 4.0) == CTK_OK);
    CHECK(ctk_report_add(r, "z", "nope", 0.9, 1, 4.0) == CTK_SCHEMA_VIOLATION);
    int present = 0, n = 0;
    double md = 0, sd = 0, mh = 0, sh = 0;
    CHECK(ctk_report_aggregate(r, "test", &present, &n, &md, &sd, &has_hd, &mh, &sh) == CTK_OK);
    CHECK(present == 1);
    CHECK(n == 2);
    CHECK(md == doctest::Approx(0.85));
    CHECK(sd == doctest::Approx(0.05));
    CHECK(mh == doctest::Approx(3.0));
    CHECK(ctk_report_aggregate(r, "test-extra", &present, &n, &md, &sd, &has_hd, &mh, &sh) == CTK_OK);
    CHECK(present == 0);
    const std::string dir = scratch("report");
    CHECK(ctk_report_write(r, (dir + "/r.json").c_str(), (dir + "/r.csv").c_str()) == CTK_OK);
    CHECK(std::filesystem::exists(dir + "/r.csv"));
    ctk_report_free(r);
    ctk_volume_free(a);
    ctk_volume_free(b);
    ctk_volume_free(empty);
}

TEST_CASE("phantom, craniectomy and registration") {
    ctk_phantom_params p;
    ctk_phantom_params_default(&p);
    CHECK(p.outer_semiaxes[1] == 90.0);
    ctk_volume* full = nullptr;
    REQUIRE(ctk_phantom_generate(&p, 3.0, 20.0, &full) == CTK_OK);

    ctk_phantom_params bad = p;
    bad.thickness = 100.0;
    ctk_volume* none = nullptr;
    CHECK(ctk_phantom_generate(&bad, 3.0, 20.0, &none) == CTK_INVALID_ARGUMENT);

    ctk_sampler_config cfg;
    ctk_sampler_config_default(&cfg);
    ctk_craniectomy_spec specs[30];
    REQUIRE(ctk_craniectomy_sample_many(full, 5, 30, &cfg, specs) == CTK_OK);
    ctk_volume *defected = nullptr, *defect = nullptr;
    REQUIRE(ctk_craniectomy_apply(full, &specs[0], &defected, &defect) == CTK_OK);
    int64_t nf = 0, nd = 0, ny = 0;
    ctk_volume_count(full, &nf);
    ctk_volume_count(defected, &nd);
    ctk_volume_count(defect, &ny);
    CHECK(nd + ny == nf);
    ctk_template_kind kind;
    CHECK(ctk_template_parse("challenge", &kind) == CTK_OK);
    CHECK(kind == CTK_CHALLENGE);
    CHECK(ctk_template_parse("blob", &kind) == CTK_INVALID_ARGUMENT);

    const double angles[3] = {6, 0, 0};
    const double shift[3] = {4, -3, 2};
    const double center[3] = {0, 0, 0};
    ctk_transform* t = nullptr;
    REQUIRE(ctk_transform_from_euler(angles, shift, center, &t) == CTK_OK);
    ctk_volume* moving = nullptr;
    REQUIRE(ctk_resample(full, t, full, CTK_NEAREST, &moving) == CTK_OK);

    ctk_registration_options ro;
    ctk_registration_options_default(&ro);
    CHECK(ro.band_mm == 20.0);
    ctk_target* target = nullptr;
    REQUIRE(ctk_target_create(full, &ro, &target) == CTK_OK);
    ctk_transform* rec = nullptr;
    ctk_registration_info info;
    REQUIRE(ctk_register(moving, target, &rec, &info) == CTK_OK);
    CHECK(info.objective >= info.initial_objective);
    ctk_transform* e = nullptr;
    REQUIRE(ctk_transform_compose(rec, t, &e) == CTK_OK);
    double m[16];
    ctk_transform_matrix(e, m);
    CHECK(std::abs(m[3]) < 3.0);
    CHECK(m[0] > std::cos(3.0 * 3.14159265 / 180.0));

    const std::string dir = scratch("tx");
    CHECK(ctk_transform_write(rec, (dir + "/t.txt").c_str()) == CTK_OK);
    ctk_transform* rt = nullptr;
    CHECK(ctk_transform_read((dir + "/t.txt").c_str(), &rt) == CTK_OK);
    double m2[16];
    ctk_transform_matrix(rec, m);
    ctk_transform_matrix(rt, m2);
    CHECK(std::memcmp(m, m2, sizeof m) == 0);
    double shear[16] = {1, 0.5, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1};
    ctk_transform* st = nullptr;
    CHECK(ctk_transform_from_matrix(shear, &st) == CTK_INVALID_ARGUMENT);

    ctk_volume* back = nullptr;
    REQUIRE(ctk_map_back(moving, t, full, &back) == CTK_OK);
    double dice = 0;
    ctk_dice(back, full, &dice);
    CHECK(dice >= 0.9);

    ctk_volume* empty = cube_volume(4, 0, 0);
    ctk_transform* dummy = nullptr;
    CHECK(ctk_register(empty, target, &dummy, &info) == CTK_EMPTY_INPUT);

    for (ctk_volume* v : {full, defected, defect, moving, back, empty}) ctk_volume_free(v);
    for (ctk_transform* x : {t, rec, e, rt}) ctk_transform_free(x);
    ctk_target_free(target);
}

TEST_CASE("atlas, reconstruction and training channels") {
    ctk_population_variability var;
    ctk_population_variability_default(&var);
    ctk_phantom_params params[3];
    REQUIRE(ctk_phantom_population(3, 7, &var, nullptr, params) == CTK_OK);
    ctk_volume* fulls[3];
    for (int i = 0; i < 3; ++i) REQUIRE(ctk_phantom_generate(&params[i], 3.0, 10.0, &fulls[i]) == CTK_OK);

    ctk_atlas_options ao;
    ctk_atlas_options_default(&ao);
    CHECK(ao.dims[0] == 304);
    CHECK(ao.spacing[2] == 0.715);
    ao.dims[0] = 70;
    ao.dims[1] = 80;
    ao.dims[2] = 60;
    ao.spacing[0] = ao.spacing[1] = ao.spacing[2] = 3.0;
    ao.iterations = 1;
    const char* ids[3] = {"p0", "p1", "p2"};
    ctk_atlas* atlas = nullptr;
    REQUIRE(ctk_atlas_build(fulls, 3, ids, &ao, &atlas) == CTK_OK);
    double rd[4];
    size_t nr = 0;
    CHECK(ctk_atlas_round_dice(atlas, rd, 4, &nr) == CTK_OK);
    CHECK(nr == 2);
    CHECK(ctk_atlas_build(fulls, 1, ids, &ao, &atlas) == CTK_INVALID_ARGUMENT);

    const std::string dir = scratch("atlas");
    CHECK(ctk_atlas_save(atlas, dir.c_str()) == CTK_OK);
    ctk_atlas* loaded = nullptr;
    REQUIRE(ctk_atlas_load(dir.c_str(), &loaded) == CTK_OK);
    ctk_volume *b1 = nullptr, *b2 = nullptr;
    ctk_atlas_binary(atlas, &b1);
    ctk_atlas_binary(loaded, &b2);
    int equal = 0;
    ctk_volume_equal(b1, b2, &equal);
    CHECK(equal == 1);

    // Intact atlas in, nothing out.
    ctk_volume* pred = nullptr;
    int empty_flag = 0;
    REQUIRE(ctk_reconstruct_atlas(b1, atlas, nullptr, nullptr, &pred, &empty_flag) == CTK_OK);
    CHECK(empty_flag == 1);
    ctk_volume_free(pred);

    ctk_volume *c1 = nullptr, *c2 = nullptr;
    REQUIRE(ctk_prior_channels(b1, atlas, &c1, &c2) == CTK_OK);
    ctk_volume_equal(c2, b1, &equal);
    CHECK(equal == 1);
    CHECK(ctk_prior_channels(fulls[0], atlas, &c1, &c2) == CTK_GEOMETRY_MISMATCH);

    ctk_volume* mirror = nullptr;
    CHECK(ctk_reconstruct_mirror(b1, nullptr, &mirror, &empty_flag) == CTK_OK);

    for (ctk_volume* v : {fulls[0], fulls[1], fulls[2], b1, b2, c1, c2, mirror}) ctk_volume_free(v);
    ctk_atlas_free(atlas);
    ctk_atlas_free(loaded);
}

TEST_CASE("manifests") {
    ctk_manifest* m = nullptr;
    REQUIRE(ctk_manifest_create("capi", 77, &m) == CTK_OK);
    size_t i = 0;
    REQUIRE(ctk_manifest_add_case(m, "c0", "train", &i) == CTK_OK);
    CHECK(ctk_manifest_add_case(m, "c1", "holdout", &i) == CTK_SCHEMA_VIOLATION);
    CHECK(ctk_manifest_set_path(m, 0, "channel1", "c0_ch1.nii.gz") == CTK_OK);
    CHECK(ctk_manifest_set_path(m, 0, "bogus", "x") == CTK_SCHEMA_VIOLATION);
    CHECK(ctk_manifest_set_seed(m, 0, 5) == CTK_OK);
    CHECK(ctk_manifest_set_noise_p(m, 0, 0.01) == CTK_OK);
    const std::string dir = scratch("manifest");
    const std::string path = dir + "/m.json";
    REQUIRE(ctk_manifest_write(m, path.c_str()) == CTK_OK);
    ctk_manifest* back = nullptr;
    REQUIRE(ctk_manifest_read(path.c_str(), &back) == CTK_OK);
    CHECK(ctk_manifest_case_count(back) == 1);
    CHECK(ctk_manifest_master_seed(back) == 77);
    CHECK(std::string(ctk_manifest_case_id(back, 0)) == "c0");
    CHECK(std::string(ctk_manifest_case_path(back, 0, "channel1")) == "c0_ch1.nii.gz");
    CHECK(ctk_manifest_case_path(back, 0, "target") == nullptr);
    int has_seed = 0;
    uint64_t seed = 0;
    CHECK(ctk_manifest_case_seed(back, 0, &has_seed, &seed) == CTK_OK);
    CHECK(seed == 5);
    CHECK(ctk_manifest_validate(back, dir.c_str()) == CTK_SCHEMA_VIOLATION);
    CHECK(ctk_manifest_validate(back, nullptr) == CTK_OK);
    ctk_manifest_free(m);
    ctk_manifest_free(back);
}

} // TEST_SUITE
