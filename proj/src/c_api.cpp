#include "craniotk/craniotk.h"

#include "craniotk/atlas.hpp"
#include "craniotk/craniectomy.hpp"
#include "craniotk/error.hpp"
#include "craniotk/io.hpp"
#include "craniotk/metrics.hpp"
#include "craniotk/parallel.hpp"
#include "craniotk/phantom.hpp"
#include "craniotk/random.hpp"
#include "craniotk/reconstruct.hpp"
#include "craniotk/registration.hpp"

#include <cstring>
#include <filesystem>
#include <memory>
#include <numbers>
#include <string>

using namespace craniotk;

struct ctk_volume {
    VoxelGrid grid;
};
struct ctk_transform {
    RigidTransform t;
};
struct ctk_target {
    RegistrationTarget target;
};
struct ctk_atlas {
    Atlas atlas;
};
struct ctk_manifest {
    DatasetManifest m;
};
struct ctk_report {
    std::vector<EvaluationRow> rows;
    double hd_percentile = 100.0;
};

namespace {

thread_local std::string last_error;

constexpr double kDeg = std::numbers::pi / 180.0;

template <class F>
ctk_status guard(F&& f) {
    try {
        f();
        last_error.clear();
        return CTK_OK;
    } catch (const Error& e) {
        last_error = e.what();
        return static_cast<ctk_status>(e.code());
    } catch (const std::filesystem::filesystem_error& e) {
        last_error = e.what();
        return CTK_IO_FAILURE;
    } catch (const std::exception& e) {
        last_error = e.what();
        return CTK_INTERNAL;
    } catch (...) {
        last_error = "unknown failure";
        return CTK_INTERNAL;
    }
}

template <class T>
const T& need(const T* p, const char* what) {
    if (p == nullptr) {
        fail(ErrorCode::InvalidArgument, std::string(what) + " must not be NULL");
    }
    return *p;
}

template <class T>
T& need_mut(T* p, const char* what) {
    if (p == nullptr) {
        fail(ErrorCode::InvalidArgument, std::string(what) + " must not be NULL");
    }
    return *p;
}

void need_out(const void* p) {
    if (p == nullptr) {
        fail(ErrorCode::InvalidArgument, "output pointer must not be NULL");
    }
}

ctk_volume* wrap(VoxelGrid g) { return new ctk_volume{std::move(g)}; }

Vec3 vec(const double v[3]) { return {v[0], v[1], v[2]}; }

PhantomSpec to_spec(const ctk_phantom_params& p) {
    PhantomSpec s;
    s.outer_semiaxes = vec(p.outer_semiaxes);
    s.thickness = p.thickness;
    s.base_cut_fraction = p.base_cut_fraction;
    std::array<double, 16> m;
    std::copy(p.pose, p.pose + 16, m.begin());
    s.pose = RigidTransform::from_matrix(m);
    s.seed = p.seed;
    return s;
}

ctk_phantom_params from_spec(const PhantomSpec& s) {
    ctk_phantom_params p{};
    for (int a = 0; a < 3; ++a) {
        p.outer_semiaxes[a] = s.outer_semiaxes[a];
    }
    p.thickness = s.thickness;
    p.base_cut_fraction = s.base_cut_fraction;
    std::copy(s.pose.matrix().begin(), s.pose.matrix().end(), p.pose);
    p.seed = s.seed;
    return p;
}

CraniectomySpec to_spec(const ctk_craniectomy_spec& c) {
    CraniectomySpec s;
    if (c.kind < CTK_SPHERE || c.kind > CTK_CHALLENGE) {
        fail(ErrorCode::InvalidArgument, "unknown template kind");
    }
    s.kind = static_cast<TemplateKind>(c.kind);
    s.radius = c.radius;
    s.edge = c.edge;
    s.cylinder_radius = c.cylinder_radius;
    s.center = vec(c.center);
    s.orientation = c.orientation;
    s.seed = c.seed;
    return s;
}

ctk_craniectomy_spec from_spec(const CraniectomySpec& s) {
    ctk_craniectomy_spec c{};
    c.kind = static_cast<ctk_template_kind>(s.kind);
    c.radius = s.radius;
    c.edge = s.edge;
    c.cylinder_radius = s.cylinder_radius;
    for (int a = 0; a < 3; ++a) {
        c.center[a] = s.center[a];
    }
    c.orientation = s.orientation;
    c.seed = s.seed;
    return c;
}

SamplerConfig to_config(const ctk_sampler_config* c) {
    SamplerConfig s;
    if (c == nullptr) {
        return s;
    }
    for (int i = 0; i < 3; ++i) {
        s.template_mix[static_cast<std::size_t>(i)] = c->template_mix[i];
    }
    s.upper_percentile = c->upper_percentile;
    s.sphere_radius_min = c->sphere_radius_min;
    s.sphere_radius_max = c->sphere_radius_max;
    s.cube_edge_min = c->cube_edge_min;
    s.cube_edge_max = c->cube_edge_max;
    s.cylinder_ratio = c->cylinder_ratio;
    return s;
}

RegistrationOptions to_options(const ctk_registration_options* o) {
    RegistrationOptions r;
    if (o != nullptr) {
        r.band_mm = o->band_mm;
        r.max_iterations = o->max_iterations;
        r.tolerance = o->tolerance;
        r.max_samples = o->max_samples;
        r.rotation_step_deg = o->rotation_step_deg;
        r.translation_step_mm = o->translation_step_mm;
        r.moment_init = o->moment_init != 0;
    }
    r.validate();
    return r;
}

PostprocessOptions to_options(const ctk_postprocess_options* o) {
    PostprocessOptions p;
    if (o != nullptr) {
        p.close_radius_mm = o->close_radius_mm;
        p.max_distance_mm = o->max_distance_mm;
        p.max_passes = o->max_passes;
    }
    return p;
}

const ManifestCase& case_at(const ctk_manifest* m, std::size_t i) {
    const auto& cases = need(m, "manifest").m.cases;
    if (i >= cases.size()) {
        fail(ErrorCode::OutOfBounds, "manifest case index out of range");
    }
    return cases[i];
}

ManifestCase& case_at(ctk_manifest* m, std::size_t i) {
    auto& cases = need_mut(m, "manifest").m.cases;
    if (i >= cases.size()) {
        fail(ErrorCode::OutOfBounds, "manifest case index out of range");
    }
    return cases[i];
}

std::string need_str(const char* s, const char* what) {
    if (s == nullptr) {
        fail(ErrorCode::InvalidArgument, std::string(what) + " must not be NULL");
    }
    return s;
}

} // namespace

extern "C" {

const char* ctk_version(void) { return "0.3.0"; }

const char* ctk_last_error(void) { return last_error.c_str(); }

const char* ctk_status_name(ctk_status status) {
    if (status == CTK_OK) {
        return "Ok";
    }
    if (status >= CTK_INVALID_ARGUMENT && status <= CTK_REGISTRATION_FAILED) {
        return to_string(static_cast<ErrorCode>(status)).data();
    }
    return "Internal";
}

int ctk_resolve_threads(int requested) { return resolve_thread_count(requested); }

uint64_t ctk_derive_seed(uint64_t master, uint64_t index) { return derive_seed(master, index); }

// ---- volumes

ctk_status ctk_volume_create(const int64_t dims[3], const double spacing[3], const double origin[3], ctk_volume** out) {
    return guard([&] {
        need_out(out);
        need(dims, "dims");
        GridGeometry g;
        for (int a = 0; a < 3; ++a) {
            g.dims[a] = dims[a];
            g.spacing[a] = spacing ? spacing[a] : 1.0;
            g.origin[a] = origin ? origin[a] : 0.0;
        }
        g.validate();
        *out = wrap(VoxelGrid(g));
    });
}

void ctk_volume_free(ctk_volume* v) { delete v; }

ctk_status ctk_volume_clone(const ctk_volume* v, ctk_volume** out) {
    return guard([&] {
        need_out(out);
        *out = wrap(need(v, "volume").grid);
    });
}

ctk_status ctk_volume_geometry(const ctk_volume* v, int64_t dims[3], double spacing[3], double origin[3]) {
    return guard([&] {
        const GridGeometry& g = need(v, "volume").grid.geometry();
        for (int a = 0; a < 3; ++a) {
            if (dims) dims[a] = g.dims[a];
            if (spacing) spacing[a] = g.spacing[a];
            if (origin) origin[a] = g.origin[a];
        }
    });
}

ctk_status ctk_volume_get(const ctk_volume* v, int64_t i, int64_t j, int64_t k, int* value) {
    return guard([&] {
        need_out(value);
        const VoxelGrid& g = need(v, "volume").grid;
        if (!g.geometry().contains({i, j, k})) {
            fail(ErrorCode::OutOfBounds, "voxel index outside the grid");
        }
        *value = g.get(i, j, k) ? 1 : 0;
    });
}

ctk_status ctk_volume_set(ctk_volume* v, int64_t i, int64_t j, int64_t k, int value) {
    return guard([&] {
        VoxelGrid& g = need_mut(v, "volume").grid;
        if (!g.geometry().contains({i, j, k})) {
            fail(ErrorCode::OutOfBounds, "voxel index outside the grid");
        }
        g.set(i, j, k, value != 0);
    });
}

ctk_status ctk_volume_count(const ctk_volume* v, int64_t* count) {
    return guard([&] {
        need_out(count);
        *count = need(v, "volume").grid.count();
    });
}

ctk_status ctk_volume_export(const ctk_volume* v, uint8_t* buffer, size_t len) {
    return guard([&] {
        const VoxelGrid& g = need(v, "volume").grid;
        need_out(buffer);
        if (len != static_cast<size_t>(g.size())) {
            fail(ErrorCode::InvalidArgument, "buffer length must equal the voxel count");
        }
        for (std::int64_t n = 0; n < g.size(); ++n) {
            buffer[n] = g.get(n) ? 1 : 0;
        }
    });
}

ctk_status ctk_volume_import(ctk_volume* v, const uint8_t* buffer, size_t len) {
    return guard([&] {
        VoxelGrid& g = need_mut(v, "volume").grid;
        need(buffer, "buffer");
        if (len != static_cast<size_t>(g.size())) {
            fail(ErrorCode::InvalidArgument, "buffer length must equal the voxel count");
        }
        for (std::int64_t n = 0; n < g.size(); ++n) {
            g.set(n, buffer[n] != 0);
        }
    });
}

ctk_status ctk_volume_equal(const ctk_volume* a, const ctk_volume* b, int* equal) {
    return guard([&] {
        need_out(equal);
        *equal = need(a, "a").grid == need(b, "b").grid ? 1 : 0;
    });
}

ctk_status ctk_volume_read(const char* path, ctk_volume** out) {
    return guard([&] {
        need_out(out);
        *out = wrap(read_volume(need_str(path, "path")));
    });
}

ctk_status ctk_volume_write(const ctk_volume* v, const char* path) {
    return guard([&] { write_volume(need(v, "volume").grid, need_str(path, "path")); });
}

ctk_status ctk_volume_set_op(const ctk_volume* a, const ctk_volume* b, ctk_set_op op, ctk_volume** out) {
    return guard([&] {
        need_out(out);
        if (op < CTK_UNION || op > CTK_XOR) {
            fail(ErrorCode::InvalidArgument, "unknown set operation");
        }
        *out = wrap(set_ops(need(a, "a").grid, need(b, "b").grid, static_cast<SetOp>(op)));
    });
}

ctk_status ctk_volume_morph(const ctk_volume* v, ctk_morph_op op, double radius_mm, ctk_volume** out) {
    return guard([&] {
        need_out(out);
        if (op < CTK_DILATE || op > CTK_OPEN) {
            fail(ErrorCode::InvalidArgument, "unknown morphology operation");
        }
        *out = wrap(morph(need(v, "volume").grid, static_cast<MorphOp>(op), radius_mm));
    });
}

namespace {
Connectivity to_connectivity(int c) {
    if (c == 6) return Connectivity::Face6;
    if (c == 26) return Connectivity::Full26;
    fail(ErrorCode::InvalidArgument, "connectivity must be 6 or 26");
}
} // namespace

ctk_status ctk_volume_largest_component(const ctk_volume* v, int connectivity, ctk_volume** out) {
    return guard([&] {
        need_out(out);
        *out = wrap(largest_component(need(v, "volume").grid, to_connectivity(connectivity)));
    });
}

ctk_status ctk_volume_component_count(const ctk_volume* v, int connectivity, int64_t* count) {
    return guard([&] {
        need_out(count);
        *count = component_count(need(v, "volume").grid, to_connectivity(connectivity));
    });
}

ctk_status ctk_volume_mirror_x(const ctk_volume* v, ctk_volume** out) {
    return guard([&] {
        need_out(out);
        *out = wrap(mirror_x(need(v, "volume").grid));
    });
}

ctk_status ctk_volume_centroid(const ctk_volume* v, double c[3]) {
    return guard([&] {
        need_out(c);
        const Vec3 p = centroid(need(v, "volume").grid);
        for (int a = 0; a < 3; ++a) {
            c[a] = p[a];
        }
    });
}

// ---- phantoms

void ctk_phantom_params_default(ctk_phantom_params* params) {
    if (params != nullptr) {
        *params = from_spec(PhantomSpec{});
    }
}

void ctk_population_variability_default(ctk_population_variability* var) {
    if (var == nullptr) {
        return;
    }
    const PopulationVariability d;
    for (int a = 0; a < 3; ++a) {
        var->semiaxes_mm[a] = d.semiaxes_mm[a];
    }
    var->thickness_mm = d.thickness_mm;
    var->rotation_deg = d.rotation_deg;
    var->translation_mm = d.translation_mm;
}

ctk_status ctk_phantom_generate(const ctk_phantom_params* params, double spacing_mm, double margin_mm,
                                ctk_volume** out) {
    return guard([&] {
        need_out(out);
        const PhantomSpec spec = to_spec(need(params, "params"));
        if (!(spacing_mm > 0.0)) {
            fail(ErrorCode::InvalidArgument, "spacing must be > 0");
        }
        const GridGeometry g = phantom_geometry(spec, {spacing_mm, spacing_mm, spacing_mm}, margin_mm);
        *out = wrap(generate_phantom(spec, g));
    });
}

ctk_status ctk_phantom_population(int n, uint64_t seed, const ctk_population_variability* var,
                                  const ctk_phantom_params* base, ctk_phantom_params* out) {
    return guard([&] {
        need_out(out);
        PopulationVariability v;
        if (var != nullptr) {
            v.semiaxes_mm = vec(var->semiaxes_mm);
            v.thickness_mm = var->thickness_mm;
            v.rotation_deg = var->rotation_deg;
            v.translation_mm = var->translation_mm;
        }
        const PhantomSpec b = base ? to_spec(*base) : PhantomSpec{};
        const auto specs = sample_population(n, seed, v, b);
        for (std::size_t i = 0; i < specs.size(); ++i) {
            out[i] = from_spec(specs[i]);
        }
    });
}

ctk_status ctk_phantom_volume_mm3(const ctk_phantom_params* params, double* volume) {
    return guard([&] {
        need_out(volume);
        *volume = phantom_volume(to_spec(need(params, "params")));
    });
}

// ---- craniectomy

void ctk_sampler_config_default(ctk_sampler_config* config) {
    if (config == nullptr) {
        return;
    }
    const SamplerConfig d;
    for (int i = 0; i < 3; ++i) {
        config->template_mix[i] = d.template_mix[static_cast<std::size_t>(i)];
    }
    config->upper_percentile = d.upper_percentile;
    config->sphere_radius_min = d.sphere_radius_min;
    config->sphere_radius_max = d.sphere_radius_max;
    config->cube_edge_min = d.cube_edge_min;
    config->cube_edge_max = d.cube_edge_max;
    config->cylinder_ratio = d.cylinder_ratio;
}

const char* ctk_template_name(ctk_template_kind kind) {
    if (kind < CTK_SPHERE || kind > CTK_CHALLENGE) {
        return "unknown";
    }
    return to_string(static_cast<TemplateKind>(kind)).data();
}

ctk_status ctk_template_parse(const char* name, ctk_template_kind* kind) {
    return guard([&] {
        need_out(kind);
        *kind = static_cast<ctk_template_kind>(template_kind_from_string(need_str(name, "name")));
    });
}

ctk_status ctk_craniectomy_sample(const ctk_volume* full, uint64_t seed, const ctk_sampler_config* config,
                                  ctk_craniectomy_spec* spec) {
    return guard([&] {
        need_out(spec);
        *spec = from_spec(sample_spec(need(full, "full").grid, seed, to_config(config)));
    });
}

ctk_status ctk_craniectomy_sample_many(const ctk_volume* full, uint64_t seed, size_t count,
                                       const ctk_sampler_config* config, ctk_craniectomy_spec* specs) {
    return guard([&] {
        need_out(specs);
        const CraniectomySampler sampler(need(full, "full").grid, to_config(config));
        for (size_t i = 0; i < count; ++i) {
            specs[i] = from_spec(sampler.draw(derive_seed(seed, i)));
        }
    });
}

ctk_status ctk_craniectomy_template(const ctk_craniectomy_spec* spec, const ctk_volume* like, ctk_volume** out) {
    return guard([&] {
        need_out(out);
        *out = wrap(make_template(to_spec(need(spec, "spec")), need(like, "like").grid.geometry()));
    });
}

ctk_status ctk_craniectomy_apply(const ctk_volume* full, const ctk_craniectomy_spec* spec, ctk_volume** defected,
                                 ctk_volume** defect) {
    return guard([&] {
        need_out(defected);
        need_out(defect);
        CaseTriplet t = apply_craniectomy(need(full, "full").grid, to_spec(need(spec, "spec")));
        auto a = std::make_unique<ctk_volume>(ctk_volume{std::move(t.defected)});
        auto b = std::make_unique<ctk_volume>(ctk_volume{std::move(t.defect)});
        *defected = a.release();
        *defect = b.release();
    });
}

ctk_status ctk_salt_pepper(const ctk_volume* v, double p, uint64_t seed, ctk_volume** out) {
    return guard([&] {
        need_out(out);
        *out = wrap(salt_pepper(need(v, "volume").grid, p, seed));
    });
}

// ---- transforms and registration

ctk_status ctk_transform_identity(ctk_transform** out) {
    return guard([&] {
        need_out(out);
        *out = new ctk_transform{RigidTransform::identity()};
    });
}

ctk_status ctk_transform_from_matrix(const double matrix[16], ctk_transform** out) {
    return guard([&] {
        need_out(out);
        need(matrix, "matrix");
        std::array<double, 16> m;
        std::copy(matrix, matrix + 16, m.begin());
        *out = new ctk_transform{RigidTransform::from_matrix(m)};
    });
}

ctk_status ctk_transform_from_euler(const double angles_deg[3], const double shift[3], const double center[3],
                                    ctk_transform** out) {
    return guard([&] {
        need_out(out);
        need(angles_deg, "angles");
        const Vec3 angles = kDeg * vec(angles_deg);
        *out = new ctk_transform{
            RigidTransform::from_euler_zyx(angles, shift ? vec(shift) : Vec3{}, center ? vec(center) : Vec3{})};
    });
}

void ctk_transform_free(ctk_transform* t) { delete t; }

ctk_status ctk_transform_matrix(const ctk_transform* t, double matrix[16]) {
    return guard([&] {
        need_out(matrix);
        const auto& m = need(t, "transform").t.matrix();
        std::copy(m.begin(), m.end(), matrix);
    });
}

ctk_status ctk_transform_inverse(const ctk_transform* t, ctk_transform** out) {
    return guard([&] {
        need_out(out);
        *out = new ctk_transform{need(t, "transform").t.inverse()};
    });
}

ctk_status ctk_transform_compose(const ctk_transform* a, const ctk_transform* b, ctk_transform** out) {
    return guard([&] {
        need_out(out);
        *out = new ctk_transform{need(a, "a").t * need(b, "b").t};
    });
}

ctk_status ctk_transform_read(const char* path, ctk_transform** out) {
    return guard([&] {
        need_out(out);
        *out = new ctk_transform{read_transform(need_str(path, "path"))};
    });
}

ctk_status ctk_transform_write(const ctk_transform* t, const char* path) {
    return guard([&] { write_transform(need(t, "transform").t, need_str(path, "path")); });
}

void ctk_registration_options_default(ctk_registration_options* options) {
    if (options == nullptr) {
        return;
    }
    const RegistrationOptions d;
    options->band_mm = d.band_mm;
    options->max_iterations = d.max_iterations;
    options->tolerance = d.tolerance;
    options->max_samples = d.max_samples;
    options->rotation_step_deg = d.rotation_step_deg;
    options->translation_step_mm = d.translation_step_mm;
    options->moment_init = d.moment_init ? 1 : 0;
}

ctk_status ctk_target_create(const ctk_volume* fixed, const ctk_registration_options* options, ctk_target** out) {
    return guard([&] {
        need_out(out);
        *out = new ctk_target{RegistrationTarget(need(fixed, "fixed").grid, to_options(options))};
    });
}

ctk_status ctk_target_from_atlas(const ctk_atlas* atlas, const ctk_registration_options* options, ctk_target** out) {
    return guard([&] {
        need_out(out);
        *out = new ctk_target{RegistrationTarget(need(atlas, "atlas").atlas.binary, to_options(options))};
    });
}

void ctk_target_free(ctk_target* t) { delete t; }

ctk_status ctk_register(const ctk_volume* moving, const ctk_target* target, ctk_transform** out,
                        ctk_registration_info* info) {
    return guard([&] {
        need_out(out);
        const RegistrationResult r = register_rigid(need(moving, "moving").grid, need(target, "target").target);
        if (info != nullptr) {
            info->objective = r.objective;
            info->initial_objective = r.initial_objective;
            info->iterations = r.iterations;
            info->converged = r.converged ? 1 : 0;
        }
        *out = new ctk_transform{r.transform};
    });
}

namespace {
Interpolation to_interp(ctk_interpolation i) {
    if (i == CTK_NEAREST) return Interpolation::Nearest;
    if (i == CTK_TRILINEAR_THRESHOLD) return Interpolation::TrilinearThreshold;
    fail(ErrorCode::InvalidArgument, "unknown interpolation");
}
} // namespace

ctk_status ctk_resample(const ctk_volume* v, const ctk_transform* t, const ctk_volume* like, ctk_interpolation interp,
                        ctk_volume** out) {
    return guard([&] {
        need_out(out);
        *out = wrap(resample(need(v, "volume").grid, need(t, "transform").t, need(like, "like").grid.geometry(),
                             to_interp(interp)));
    });
}

ctk_status ctk_resample_to_atlas(const ctk_volume* v, const ctk_transform* t, const ctk_atlas* atlas,
                                 ctk_interpolation interp, ctk_volume** out) {
    return guard([&] {
        need_out(out);
        *out = wrap(resample(need(v, "volume").grid, need(t, "transform").t, need(atlas, "atlas").atlas.geometry(),
                             to_interp(interp)));
    });
}

ctk_status ctk_map_back(const ctk_volume* prediction, const ctk_transform* t, const ctk_volume* original,
                        ctk_volume** out) {
    return guard([&] {
        need_out(out);
        *out = wrap(map_back(need(prediction, "prediction").grid, need(t, "transform").t,
                             need(original, "original").grid.geometry()));
    });
}

// ---- atlas

void ctk_atlas_options_default(ctk_atlas_options* options) {
    if (options == nullptr) {
        return;
    }
    const AtlasOptions d;
    options->threshold = d.threshold;
    options->iterations = d.iterations;
    for (int a = 0; a < 3; ++a) {
        options->dims[a] = d.grid.dims[a];
        options->spacing[a] = d.grid.spacing[a];
        options->origin[a] = 0.0;
    }
    options->use_origin = 0;
    options->canonical_frame = d.canonical_frame ? 1 : 0;
    options->threads = 1;
    ctk_registration_options_default(&options->registration);
}

ctk_status ctk_atlas_build(const ctk_volume* const* fulls, size_t n, const char* const* ids,
                           const ctk_atlas_options* options, ctk_atlas** out) {
    return guard([&] {
        need_out(out);
        need(fulls, "fulls");
        std::vector<VoxelGrid> grids;
        std::vector<std::string> names;
        for (size_t i = 0; i < n; ++i) {
            grids.push_back(need(fulls[i], "input volume").grid);
            if (ids != nullptr) {
                names.push_back(need_str(ids[i], "case id"));
            }
        }
        AtlasOptions o;
        if (options != nullptr) {
            o.threshold = options->threshold;
            o.iterations = options->iterations;
            for (int a = 0; a < 3; ++a) {
                o.grid.dims[a] = options->dims[a];
                o.grid.spacing[a] = options->spacing[a];
            }
            if (options->use_origin) {
                o.geometry = GridGeometry{o.grid.dims, o.grid.spacing, vec(options->origin)};
            }
            o.canonical_frame = options->canonical_frame != 0;
            o.threads = options->threads;
            o.registration = to_options(&options->registration);
        }
        *out = new ctk_atlas{build_atlas(grids, o, names)};
    });
}

void ctk_atlas_free(ctk_atlas* a) { delete a; }

ctk_status ctk_atlas_save(const ctk_atlas* a, const char* dir) {
    return guard([&] { save_atlas(need(a, "atlas").atlas, need_str(dir, "dir")); });
}

ctk_status ctk_atlas_load(const char* dir, ctk_atlas** out) {
    return guard([&] {
        need_out(out);
        *out = new ctk_atlas{load_atlas(need_str(dir, "dir"))};
    });
}

ctk_status ctk_atlas_binary(const ctk_atlas* a, ctk_volume** out) {
    return guard([&] {
        need_out(out);
        *out = wrap(need(a, "atlas").atlas.binary);
    });
}

ctk_status ctk_atlas_threshold(const ctk_atlas* a, double* threshold) {
    return guard([&] {
        need_out(threshold);
        *threshold = need(a, "atlas").atlas.threshold;
    });
}

ctk_status ctk_atlas_round_dice(const ctk_atlas* a, double* out, size_t cap, size_t* n) {
    return guard([&] {
        const auto& d = need(a, "atlas").atlas.round_dice;
        if (n != nullptr) {
            *n = d.size();
        }
        for (size_t i = 0; i < d.size() && i < cap && out != nullptr; ++i) {
            out[i] = d[i];
        }
    });
}

ctk_status ctk_prior_channels(const ctk_volume* defected_registered, const ctk_atlas* a, ctk_volume** channel1,
                              ctk_volume** channel2) {
    return guard([&] {
        need_out(channel1);
        need_out(channel2);
        auto [c1, c2] = prior_channel(need(defected_registered, "defected").grid, need(a, "atlas").atlas);
        auto p1 = std::make_unique<ctk_volume>(ctk_volume{std::move(c1)});
        auto p2 = std::make_unique<ctk_volume>(ctk_volume{std::move(c2)});
        *channel1 = p1.release();
        *channel2 = p2.release();
    });
}

// ---- reconstruction

void ctk_postprocess_options_default(ctk_postprocess_options* options) {
    if (options == nullptr) {
        return;
    }
    const PostprocessOptions d;
    options->close_radius_mm = d.close_radius_mm;
    options->max_distance_mm = d.max_distance_mm;
    options->max_passes = d.max_passes;
}

ctk_status ctk_postprocess(const ctk_volume* raw, const ctk_volume* defected, const ctk_postprocess_options* options,
                           ctk_volume** out) {
    return guard([&] {
        need_out(out);
        *out = wrap(postprocess(need(raw, "raw").grid, need(defected, "defected").grid, to_options(options)));
    });
}

ctk_status ctk_reconstruct_atlas(const ctk_volume* defected, const ctk_atlas* a, const ctk_transform* t,
                                 const ctk_postprocess_options* options, ctk_volume** out, int* empty_prediction) {
    return guard([&] {
        need_out(out);
        Reconstruction r = atlas_subtract(need(defected, "defected").grid, need(a, "atlas").atlas,
                                          t ? t->t : RigidTransform::identity(), to_options(options));
        if (empty_prediction != nullptr) {
            *empty_prediction = r.empty_prediction ? 1 : 0;
        }
        *out = wrap(std::move(r.prediction));
    });
}

ctk_status ctk_reconstruct_mirror(const ctk_volume* defected, const ctk_postprocess_options* options, ctk_volume** out,
                                  int* empty_prediction) {
    return guard([&] {
        need_out(out);
        Reconstruction r = mirror_reconstruct(need(defected, "defected").grid, to_options(options));
        if (empty_prediction != nullptr) {
            *empty_prediction = r.empty_prediction ? 1 : 0;
        }
        *out = wrap(std::move(r.prediction));
    });
}

// ---- metrics and reports

ctk_status ctk_dice(const ctk_volume* a, const ctk_volume* b, double* out) {
    return guard([&] {
        need_out(out);
        *out = dice(need(a, "a").grid, need(b, "b").grid);
    });
}

ctk_status ctk_hausdorff(const ctk_volume* a, const ctk_volume* b, double percentile, double* hd_mm) {
    return guard([&] {
        need_out(hd_mm);
        *hd_mm = hausdorff(need(a, "a").grid, need(b, "b").grid, percentile);
    });
}

ctk_status ctk_evaluate_case(const ctk_volume* prediction, const ctk_volume* truth, double percentile, double* d,
                             int* has_hd, double* hd_mm) {
    return guard([&] {
        need_out(d);
        need_out(has_hd);
        need_out(hd_mm);
        const VoxelGrid& p = need(prediction, "prediction").grid;
        const VoxelGrid& t = need(truth, "truth").grid;
        const double dv = dice(p, t);
        if (p.empty() || t.empty()) {
            *has_hd = 0;
            *hd_mm = 0.0;
        } else {
            *hd_mm = hausdorff(p, t, percentile);
            *has_hd = 1;
        }
        *d = dv;
    });
}

ctk_status ctk_report_create(double hd_percentile, ctk_report** out) {
    return guard([&] {
        need_out(out);
        if (!(hd_percentile > 0.0 && hd_percentile <= 100.0)) {
            fail(ErrorCode::InvalidArgument, "hd percentile must lie in (0, 100]");
        }
        *out = new ctk_report{{}, hd_percentile};
    });
}

void ctk_report_free(ctk_report* r) { delete r; }

ctk_status ctk_report_add(ctk_report* r, const char* case_id, const char* subset, double d, int has_hd, double hd_mm) {
    return guard([&] {
        EvaluationRow row;
        row.case_id = need_str(case_id, "case_id");
        row.subset = subset_from_string(need_str(subset, "subset"));
        row.dice = d;
        if (has_hd) {
            row.hd_mm = hd_mm;
        }
        need_mut(r, "report").rows.push_back(std::move(row));
    });
}

ctk_status ctk_report_aggregate(const ctk_report* r, const char* key, int* present, int* n, double* mean_dice,
                                double* std_dice, int* has_hd, double* mean_hd, double* std_hd) {
    return guard([&] {
        need_out(present);
        const ctk_report& rep = need(r, "report");
        const EvaluationReport agg = aggregate(rep.rows, rep.hd_percentile);
        const auto it = agg.aggregates.find(need_str(key, "key"));
        *present = it != agg.aggregates.end() ? 1 : 0;
        if (!*present) {
            return;
        }
        const Aggregate& a = it->second;
        if (n) *n = a.n;
        if (mean_dice) *mean_dice = a.mean_dice;
        if (std_dice) *std_dice = a.std_dice;
        if (has_hd) *has_hd = a.mean_hd ? 1 : 0;
        if (mean_hd) *mean_hd = a.mean_hd.value_or(0.0);
        if (std_hd) *std_hd = a.std_hd.value_or(0.0);
    });
}

ctk_status ctk_report_write(const ctk_report* r, const char* json_path, const char* csv_path) {
    return guard([&] {
        const ctk_report& rep = need(r, "report");
        const EvaluationReport agg = aggregate(rep.rows, rep.hd_percentile);
        if (json_path != nullptr) {
            write_text_file(json_path, report_to_json(agg));
        }
        if (csv_path != nullptr) {
            write_text_file(csv_path, report_to_csv(agg));
        }
    });
}

// ---- manifests

ctk_status ctk_manifest_create(const char* created_by, uint64_t master_seed, ctk_manifest** out) {
    return guard([&] {
        need_out(out);
        DatasetManifest m;
        m.created_by = created_by ? created_by : "";
        m.master_seed = master_seed;
        *out = new ctk_manifest{std::move(m)};
    });
}

ctk_status ctk_manifest_read(const char* path, ctk_manifest** out) {
    return guard([&] {
        need_out(out);
        *out = new ctk_manifest{read_manifest(need_str(path, "path"))};
    });
}

ctk_status ctk_manifest_write(const ctk_manifest* m, const char* path) {
    return guard([&] { write_manifest(need(m, "manifest").m, need_str(path, "path")); });
}

void ctk_manifest_free(ctk_manifest* m) { delete m; }

ctk_status ctk_manifest_validate(const ctk_manifest* m, const char* base_dir) {
    return guard([&] {
        std::optional<std::filesystem::path> base;
        if (base_dir != nullptr) {
            base = base_dir;
        }
        validate_manifest(need(m, "manifest").m, base);
    });
}

size_t ctk_manifest_case_count(const ctk_manifest* m) { return m ? m->m.cases.size() : 0; }

uint64_t ctk_manifest_master_seed(const ctk_manifest* m) { return m ? m->m.master_seed : 0; }

const char* ctk_manifest_case_id(const ctk_manifest* m, size_t i) {
    return m && i < m->m.cases.size() ? m->m.cases[i].case_id.c_str() : nullptr;
}

const char* ctk_manifest_case_subset(const ctk_manifest* m, size_t i) {
    return m && i < m->m.cases.size() ? m->m.cases[i].subset.c_str() : nullptr;
}

const char* ctk_manifest_case_path(const ctk_manifest* m, size_t i, const char* role) {
    if (m == nullptr || role == nullptr || i >= m->m.cases.size()) {
        return nullptr;
    }
    for (const auto& [k, v] : m->m.cases[i].paths) {
        if (k == role) {
            return v.c_str();
        }
    }
    return nullptr;
}

ctk_status ctk_manifest_case_seed(const ctk_manifest* m, size_t i, int* has_seed, uint64_t* seed) {
    return guard([&] {
        need_out(has_seed);
        need_out(seed);
        const ManifestCase& c = case_at(m, i);
        *has_seed = c.seed ? 1 : 0;
        *seed = c.seed.value_or(0);
    });
}

ctk_status ctk_manifest_case_spec(const ctk_manifest* m, size_t i, int* has_spec, ctk_craniectomy_spec* spec) {
    return guard([&] {
        need_out(has_spec);
        need_out(spec);
        const ManifestCase& c = case_at(m, i);
        *has_spec = c.craniectomy ? 1 : 0;
        if (c.craniectomy) {
            *spec = from_spec(*c.craniectomy);
        }
    });
}

ctk_status ctk_manifest_case_noise_p(const ctk_manifest* m, size_t i, double* noise_p) {
    return guard([&] {
        need_out(noise_p);
        *noise_p = case_at(m, i).noise_p;
    });
}

ctk_status ctk_manifest_add_case(ctk_manifest* m, const char* case_id, const char* subset, size_t* index) {
    return guard([&] {
        auto& cases = need_mut(m, "manifest").m.cases;
        ManifestCase c;
        c.case_id = need_str(case_id, "case_id");
        c.subset = subset ? subset : "train";
        if (c.subset != "train" && c.subset != "test" && c.subset != "test-extra") {
            fail(ErrorCode::SchemaViolation, "unknown subset '" + c.subset + "'");
        }
        for (const auto& other : cases) {
            if (other.case_id == c.case_id) {
                fail(ErrorCode::SchemaViolation, "duplicate case_id '" + c.case_id + "'");
            }
        }
        cases.push_back(std::move(c));
        if (index != nullptr) {
            *index = cases.size() - 1;
        }
    });
}

ctk_status ctk_manifest_set_path(ctk_manifest* m, size_t i, const char* role, const char* path) {
    return guard([&] { case_at(m, i).set_path(need_str(role, "role"), need_str(path, "path")); });
}

ctk_status ctk_manifest_set_seed(ctk_manifest* m, size_t i, uint64_t seed) {
    return guard([&] { case_at(m, i).seed = seed; });
}

ctk_status ctk_manifest_set_spec(ctk_manifest* m, size_t i, const ctk_craniectomy_spec* spec) {
    return guard([&] {
        ManifestCase& c = case_at(m, i);
        c.craniectomy = to_spec(need(spec, "spec"));
        c.provided = false;
    });
}

ctk_status ctk_manifest_set_provided(ctk_manifest* m, size_t i) {
    return guard([&] {
        ManifestCase& c = case_at(m, i);
        c.provided = true;
        c.craniectomy.reset();
    });
}

ctk_status ctk_manifest_set_noise_p(ctk_manifest* m, size_t i, double noise_p) {
    return guard([&] {
        if (!(noise_p >= 0.0 && noise_p <= 1.0)) {
            fail(ErrorCode::InvalidArgument, "noise_p must lie in [0, 1]");
        }
        case_at(m, i).noise_p = noise_p;
    });
}

} // extern "C"
