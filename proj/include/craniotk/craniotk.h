/* craniotk C API.
 *
 * Every fallible call returns a ctk_status; on failure the message is
 * available from ctk_last_error() on the calling thread until its next call.
 * Handles are opaque and owned by the caller: release each with its _free
 * function. Output handles are written only on success. Strings returned by
 * accessors belong to the handle and stay valid until it is modified or freed.
 *
 * Voxel buffers are x-fastest (index = i + nx * (j + ny * k)), one byte per
 * voxel, 0 or 1. World coordinates are millimetres; transforms are row-major
 * 4x4 matrices mapping one world frame onto another.
 */
#ifndef CRANIOTK_H
#define CRANIOTK_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(CRANIOTK_BUILDING)
#    define CTK_API __declspec(dllexport)
#  else
#    define CTK_API __declspec(dllimport)
#  endif
#else
#  define CTK_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum ctk_status {
    CTK_OK = 0,
    CTK_INVALID_ARGUMENT = 1,
    CTK_GEOMETRY_MISMATCH = 2,
    CTK_EMPTY_MASK = 3,
    CTK_FULL_MASK = 4,
    CTK_OUT_OF_BOUNDS = 5,
    CTK_NO_UPPER_SURFACE = 6,
    CTK_EMPTY_DEFECT = 7,
    CTK_EMPTY_INPUT = 8,
    CTK_NON_CONVERGENCE = 9,
    CTK_BAD_MAGIC = 10,
    CTK_UNSUPPORTED_DATATYPE = 11,
    CTK_NON_ORTHOGONAL_ORIENTATION = 12,
    CTK_UNSUPPORTED_HEADER = 13,
    CTK_TRUNCATED = 14,
    CTK_IO_FAILURE = 15,
    CTK_SCHEMA_VIOLATION = 16,
    CTK_REGISTRATION_FAILED = 17,
    CTK_INTERNAL = 99
} ctk_status;

typedef struct ctk_volume ctk_volume;
typedef struct ctk_transform ctk_transform;
typedef struct ctk_target ctk_target;
typedef struct ctk_atlas ctk_atlas;
typedef struct ctk_manifest ctk_manifest;
typedef struct ctk_report ctk_report;

CTK_API const char* ctk_version(void);
CTK_API const char* ctk_last_error(void);
/* Stable identifier such as "SchemaViolation". */
CTK_API const char* ctk_status_name(ctk_status status);
/* requested > 0 wins, then CRANIOTK_THREADS, then the hardware count. */
CTK_API int ctk_resolve_threads(int requested);
CTK_API uint64_t ctk_derive_seed(uint64_t master, uint64_t index);

/* ---- volumes ---------------------------------------------------------- */

CTK_API ctk_status ctk_volume_create(const int64_t dims[3], const double spacing[3], const double origin[3],
                                     ctk_volume** out);
CTK_API void ctk_volume_free(ctk_volume* v);
CTK_API ctk_status ctk_volume_clone(const ctk_volume* v, ctk_volume** out);
CTK_API ctk_status ctk_volume_geometry(const ctk_volume* v, int64_t dims[3], double spacing[3], double origin[3]);
CTK_API ctk_status ctk_volume_get(const ctk_volume* v, int64_t i, int64_t j, int64_t k, int* value);
CTK_API ctk_status ctk_volume_set(ctk_volume* v, int64_t i, int64_t j, int64_t k, int value);
CTK_API ctk_status ctk_volume_count(const ctk_volume* v, int64_t* count);
/* len must equal the voxel count. */
CTK_API ctk_status ctk_volume_export(const ctk_volume* v, uint8_t* buffer, size_t len);
CTK_API ctk_status ctk_volume_import(ctk_volume* v, const uint8_t* buffer, size_t len);
/* Same geometry and same voxels. */
CTK_API ctk_status ctk_volume_equal(const ctk_volume* a, const ctk_volume* b, int* equal);
CTK_API ctk_status ctk_volume_read(const char* path, ctk_volume** out);
CTK_API ctk_status ctk_volume_write(const ctk_volume* v, const char* path);

typedef enum ctk_set_op { CTK_UNION = 0, CTK_INTERSECT = 1, CTK_SUBTRACT = 2, CTK_XOR = 3 } ctk_set_op;
typedef enum ctk_morph_op { CTK_DILATE = 0, CTK_ERODE = 1, CTK_CLOSE = 2, CTK_OPEN = 3 } ctk_morph_op;

CTK_API ctk_status ctk_volume_set_op(const ctk_volume* a, const ctk_volume* b, ctk_set_op op, ctk_volume** out);
CTK_API ctk_status ctk_volume_morph(const ctk_volume* v, ctk_morph_op op, double radius_mm, ctk_volume** out);
/* connectivity 6 or 26 */
CTK_API ctk_status ctk_volume_largest_component(const ctk_volume* v, int connectivity, ctk_volume** out);
CTK_API ctk_status ctk_volume_component_count(const ctk_volume* v, int connectivity, int64_t* count);
CTK_API ctk_status ctk_volume_mirror_x(const ctk_volume* v, ctk_volume** out);
CTK_API ctk_status ctk_volume_centroid(const ctk_volume* v, double centroid[3]);

/* ---- phantoms --------------------------------------------------------- */

typedef struct ctk_phantom_params {
    double outer_semiaxes[3];
    double thickness;
    double base_cut_fraction;
    /* canonical frame -> world */
    double pose[16];
    uint64_t seed;
} ctk_phantom_params;

typedef struct ctk_population_variability {
    double semiaxes_mm[3];
    double thickness_mm;
    double rotation_deg;
    double translation_mm;
} ctk_population_variability;

CTK_API void ctk_phantom_params_default(ctk_phantom_params* params);
CTK_API void ctk_population_variability_default(ctk_population_variability* var);
/* Rasterised on a cubic grid of `spacing_mm` large enough for any rotation. */
CTK_API ctk_status ctk_phantom_generate(const ctk_phantom_params* params, double spacing_mm, double margin_mm,
                                        ctk_volume** out);
/* Fills out[0..n) with jittered copies of `base` (NULL = defaults). */
CTK_API ctk_status ctk_phantom_population(int n, uint64_t seed, const ctk_population_variability* var,
                                          const ctk_phantom_params* base, ctk_phantom_params* out);
CTK_API ctk_status ctk_phantom_volume_mm3(const ctk_phantom_params* params, double* volume);

/* ---- virtual craniectomy ---------------------------------------------- */

typedef enum ctk_template_kind { CTK_SPHERE = 0, CTK_CUBE = 1, CTK_CHALLENGE = 2 } ctk_template_kind;

typedef struct ctk_craniectomy_spec {
    ctk_template_kind kind;
    double radius;
    double edge;
    double cylinder_radius;
    double center[3];
    /* radians about world z */
    double orientation;
    uint64_t seed;
} ctk_craniectomy_spec;

typedef struct ctk_sampler_config {
    /* relative weights: sphere, cube, challenge */
    double template_mix[3];
    double upper_percentile;
    double sphere_radius_min;
    double sphere_radius_max;
    double cube_edge_min;
    double cube_edge_max;
    double cylinder_ratio;
} ctk_sampler_config;

CTK_API void ctk_sampler_config_default(ctk_sampler_config* config);
CTK_API const char* ctk_template_name(ctk_template_kind kind);
CTK_API ctk_status ctk_template_parse(const char* name, ctk_template_kind* kind);
CTK_API ctk_status ctk_craniectomy_sample(const ctk_volume* full, uint64_t seed, const ctk_sampler_config* config,
                                          ctk_craniectomy_spec* spec);
/* Draws `count` specs for seeds derive_seed(seed, 0..count) reusing one
 * candidate set. */
CTK_API ctk_status ctk_craniectomy_sample_many(const ctk_volume* full, uint64_t seed, size_t count,
                                               const ctk_sampler_config* config, ctk_craniectomy_spec* specs);
CTK_API ctk_status ctk_craniectomy_template(const ctk_craniectomy_spec* spec, const ctk_volume* like,
                                            ctk_volume** out);
CTK_API ctk_status ctk_craniectomy_apply(const ctk_volume* full, const ctk_craniectomy_spec* spec,
                                         ctk_volume** defected, ctk_volume** defect);
CTK_API ctk_status ctk_salt_pepper(const ctk_volume* v, double p, uint64_t seed, ctk_volume** out);

/* ---- transforms and registration -------------------------------------- */

CTK_API ctk_status ctk_transform_identity(ctk_transform** out);
/* Rejects matrices that are not rigid. */
CTK_API ctk_status ctk_transform_from_matrix(const double matrix[16], ctk_transform** out);
/* x -> R (x - center) + center + shift, R = Rz(yaw) Ry(pitch) Rx(roll), degrees */
CTK_API ctk_status ctk_transform_from_euler(const double angles_deg[3], const double shift[3],
                                            const double center[3], ctk_transform** out);
CTK_API void ctk_transform_free(ctk_transform* t);
CTK_API ctk_status ctk_transform_matrix(const ctk_transform* t, double matrix[16]);
CTK_API ctk_status ctk_transform_inverse(const ctk_transform* t, ctk_transform** out);
/* (a * b)(x) = a(b(x)) */
CTK_API ctk_status ctk_transform_compose(const ctk_transform* a, const ctk_transform* b, ctk_transform** out);
CTK_API ctk_status ctk_transform_read(const char* path, ctk_transform** out);
CTK_API ctk_status ctk_transform_write(const ctk_transform* t, const char* path);

typedef struct ctk_registration_options {
    double band_mm;
    int max_iterations;
    double tolerance;
    int max_samples;
    double rotation_step_deg;
    double translation_step_mm;
    int moment_init;
} ctk_registration_options;

typedef struct ctk_registration_info {
    double objective;
    double initial_objective;
    int iterations;
    int converged;
} ctk_registration_info;

CTK_API void ctk_registration_options_default(ctk_registration_options* options);
/* Preprocessed fixed mask; safe to share between threads. */
CTK_API ctk_status ctk_target_create(const ctk_volume* fixed, const ctk_registration_options* options,
                                     ctk_target** out);
CTK_API ctk_status ctk_target_from_atlas(const ctk_atlas* atlas, const ctk_registration_options* options,
                                         ctk_target** out);
CTK_API void ctk_target_free(ctk_target* t);
/* The transform maps moving world coordinates onto the target's. A result
 * that hit the iteration cap is still returned with info->converged = 0. */
CTK_API ctk_status ctk_register(const ctk_volume* moving, const ctk_target* target, ctk_transform** out,
                                ctk_registration_info* info);

typedef enum ctk_interpolation { CTK_NEAREST = 0, CTK_TRILINEAR_THRESHOLD = 1 } ctk_interpolation;

/* Onto the grid of `like`: voxel v samples `v` at transform^-1(world(v)). */
CTK_API ctk_status ctk_resample(const ctk_volume* v, const ctk_transform* t, const ctk_volume* like,
                                ctk_interpolation interp, ctk_volume** out);
/* Onto the atlas grid. */
CTK_API ctk_status ctk_resample_to_atlas(const ctk_volume* v, const ctk_transform* t, const ctk_atlas* atlas,
                                         ctk_interpolation interp, ctk_volume** out);
/* Common-space prediction back onto the grid of `original`; t is the
 * original-to-common transform. */
CTK_API ctk_status ctk_map_back(const ctk_volume* prediction, const ctk_transform* t, const ctk_volume* original,
                                ctk_volume** out);

/* ---- atlas ------------------------------------------------------------ */

typedef struct ctk_atlas_options {
    double threshold;
    int iterations;
    int64_t dims[3];
    double spacing[3];
    /* when nonzero, `origin` fixes the grid; otherwise it is centered on
     * the first input's centroid */
    int use_origin;
    double origin[3];
    /* nonzero: common space is the first input's principal-axes frame, so
     * the grid mid-plane is its symmetry plane; zero: its world frame */
    int canonical_frame;
    int threads;
    ctk_registration_options registration;
} ctk_atlas_options;

CTK_API void ctk_atlas_options_default(ctk_atlas_options* options);
/* ids may be NULL. */
CTK_API ctk_status ctk_atlas_build(const ctk_volume* const* fulls, size_t n, const char* const* ids,
                                   const ctk_atlas_options* options, ctk_atlas** out);
CTK_API void ctk_atlas_free(ctk_atlas* a);
CTK_API ctk_status ctk_atlas_save(const ctk_atlas* a, const char* dir);
CTK_API ctk_status ctk_atlas_load(const char* dir, ctk_atlas** out);
CTK_API ctk_status ctk_atlas_binary(const ctk_atlas* a, ctk_volume** out);
CTK_API ctk_status ctk_atlas_threshold(const ctk_atlas* a, double* threshold);
/* Per-round mean Dice; *n receives the round count, at most cap written. */
CTK_API ctk_status ctk_atlas_round_dice(const ctk_atlas* a, double* out, size_t cap, size_t* n);
/* Channel 1 = defected, channel 2 = atlas binary. */
CTK_API ctk_status ctk_prior_channels(const ctk_volume* defected_registered, const ctk_atlas* a,
                                      ctk_volume** channel1, ctk_volume** channel2);

/* ---- reconstruction --------------------------------------------------- */

typedef struct ctk_postprocess_options {
    double close_radius_mm;
    double max_distance_mm;
    int max_passes;
} ctk_postprocess_options;

CTK_API void ctk_postprocess_options_default(ctk_postprocess_options* options);
CTK_API ctk_status ctk_postprocess(const ctk_volume* raw, const ctk_volume* defected,
                                   const ctk_postprocess_options* options, ctk_volume** out);
/* t = NULL means the defected skull is already on the atlas grid. */
CTK_API ctk_status ctk_reconstruct_atlas(const ctk_volume* defected, const ctk_atlas* a, const ctk_transform* t,
                                         const ctk_postprocess_options* options, ctk_volume** out,
                                         int* empty_prediction);
CTK_API ctk_status ctk_reconstruct_mirror(const ctk_volume* defected, const ctk_postprocess_options* options,
                                          ctk_volume** out, int* empty_prediction);

/* ---- metrics and reports ---------------------------------------------- */

CTK_API ctk_status ctk_dice(const ctk_volume* a, const ctk_volume* b, double* dice);
CTK_API ctk_status ctk_hausdorff(const ctk_volume* a, const ctk_volume* b, double percentile, double* hd_mm);
/* Dice always; HD only when both masks are nonempty (*has_hd = 0 otherwise). */
CTK_API ctk_status ctk_evaluate_case(const ctk_volume* prediction, const ctk_volume* truth, double percentile,
                                     double* dice, int* has_hd, double* hd_mm);

CTK_API ctk_status ctk_report_create(double hd_percentile, ctk_report** out);
CTK_API void ctk_report_free(ctk_report* r);
/* subset: "test", "test-extra", "train-val" or "train" */
CTK_API ctk_status ctk_report_add(ctk_report* r, const char* case_id, const char* subset, double dice, int has_hd,
                                  double hd_mm);
/* Aggregate for a subset name or "overall"; *present = 0 when no rows. */
CTK_API ctk_status ctk_report_aggregate(const ctk_report* r, const char* key, int* present, int* n,
                                        double* mean_dice, double* std_dice, int* has_hd, double* mean_hd,
                                        double* std_hd);
/* Either path may be NULL. */
CTK_API ctk_status ctk_report_write(const ctk_report* r, const char* json_path, const char* csv_path);

/* ---- manifests -------------------------------------------------------- */

CTK_API ctk_status ctk_manifest_create(const char* created_by, uint64_t master_seed, ctk_manifest** out);
CTK_API ctk_status ctk_manifest_read(const char* path, ctk_manifest** out);
CTK_API ctk_status ctk_manifest_write(const ctk_manifest* m, const char* path);
CTK_API void ctk_manifest_free(ctk_manifest* m);
/* base_dir non-NULL also checks that referenced files exist. */
CTK_API ctk_status ctk_manifest_validate(const ctk_manifest* m, const char* base_dir);
CTK_API size_t ctk_manifest_case_count(const ctk_manifest* m);
CTK_API uint64_t ctk_manifest_master_seed(const ctk_manifest* m);
CTK_API const char* ctk_manifest_case_id(const ctk_manifest* m, size_t i);
CTK_API const char* ctk_manifest_case_subset(const ctk_manifest* m, size_t i);
/* NULL when the role is absent. */
CTK_API const char* ctk_manifest_case_path(const ctk_manifest* m, size_t i, const char* role);
CTK_API ctk_status ctk_manifest_case_seed(const ctk_manifest* m, size_t i, int* has_seed, uint64_t* seed);
CTK_API ctk_status ctk_manifest_case_spec(const ctk_manifest* m, size_t i, int* has_spec,
                                          ctk_craniectomy_spec* spec);
CTK_API ctk_status ctk_manifest_case_noise_p(const ctk_manifest* m, size_t i, double* noise_p);
CTK_API ctk_status ctk_manifest_add_case(ctk_manifest* m, const char* case_id, const char* subset, size_t* index);
CTK_API ctk_status ctk_manifest_set_path(ctk_manifest* m, size_t i, const char* role, const char* path);
CTK_API ctk_status ctk_manifest_set_seed(ctk_manifest* m, size_t i, uint64_t seed);
CTK_API ctk_status ctk_manifest_set_spec(ctk_manifest* m, size_t i, const ctk_craniectomy_spec* spec);
CTK_API ctk_status ctk_manifest_set_provided(ctk_manifest* m, size_t i);
CTK_API ctk_status ctk_manifest_set_noise_p(ctk_manifest* m, size_t i, double noise_p);

#ifdef __cplusplus
}
#endif

#endif
