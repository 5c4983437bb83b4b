// craniotk command-line driver. Every stage reads and writes documented
// files only; logs go to stderr as one JSON object per line.

#include "craniotk/craniotk.h"

#include <CLI11.hpp>
#include <json.hpp>

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

// ---- failures and logging

struct Failure {
    ctk_status status;
    std::string message;
};

// Bad flag combinations detected after parsing.
struct UsageError {
    std::string message;
};

void check(ctk_status s) {
    if (s != CTK_OK) {
        throw Failure{s, ctk_last_error()};
    }
}

std::mutex log_mutex;

void log_event(json event) {
    const std::lock_guard<std::mutex> lock(log_mutex);
    std::cerr << event.dump() << '\n';
}

void log_error(const std::string& status, const std::string& message, const std::string& case_id = {}) {
    json e{{"event", "error"}, {"code", status}, {"message", message}};
    if (!case_id.empty()) {
        e["case_id"] = case_id;
    }
    log_event(std::move(e));
}

// ---- owning handles

template <class T, void (*Free)(T*)>
struct Handle {
    T* p = nullptr;
    Handle() = default;
    explicit Handle(T* raw) : p(raw) {}
    Handle(const Handle&) = delete;
    Handle& operator=(const Handle&) = delete;
    Handle(Handle&& o) noexcept : p(std::exchange(o.p, nullptr)) {}
    Handle& operator=(Handle&& o) noexcept {
        std::swap(p, o.p);
        return *this;
    }
    ~Handle() {
        if (p) {
            Free(p);
        }
    }
    T** out() { return &p; }
    T* get() const { return p; }
};

using Volume = Handle<ctk_volume, ctk_volume_free>;
using Transform = Handle<ctk_transform, ctk_transform_free>;
using Target = Handle<ctk_target, ctk_target_free>;
using AtlasH = Handle<ctk_atlas, ctk_atlas_free>;
using Manifest = Handle<ctk_manifest, ctk_manifest_free>;
using Report = Handle<ctk_report, ctk_report_free>;

Volume read_volume(const fs::path& p) {
    Volume v;
    check(ctk_volume_read(p.string().c_str(), v.out()));
    return v;
}

void write_volume(const Volume& v, const fs::path& p) { check(ctk_volume_write(v.get(), p.string().c_str())); }

Manifest read_manifest(const fs::path& p) {
    Manifest m;
    check(ctk_manifest_read(p.string().c_str(), m.out()));
    return m;
}

AtlasH load_atlas(const fs::path& dir) {
    AtlasH a;
    check(ctk_atlas_load(dir.string().c_str(), a.out()));
    return a;
}

Transform read_transform(const fs::path& p) {
    Transform t;
    check(ctk_transform_read(p.string().c_str(), t.out()));
    return t;
}

std::string created_by() { return std::string("craniotk ") + ctk_version(); }

// Manifest paths resolve against the manifest's directory.
fs::path case_path(const ctk_manifest* m, const fs::path& manifest_dir, std::size_t i, const char* role) {
    const char* p = ctk_manifest_case_path(m, i, role);
    if (p == nullptr) {
        throw Failure{CTK_SCHEMA_VIOLATION, std::string("case ") + ctk_manifest_case_id(m, i) + " has no '" + role +
                                                "' path"};
    }
    const fs::path path(p);
    return path.is_absolute() ? path : manifest_dir / path;
}

std::string relative_to(const fs::path& file, const fs::path& dir) {
    return fs::absolute(file).lexically_normal().lexically_relative(fs::absolute(dir).lexically_normal()).generic_string();
}

fs::path dir_of(const fs::path& file) {
    const fs::path d = fs::absolute(file).parent_path();
    return d;
}

// Runs fn(i) for every case on `threads` workers; returns the number of
// failed cases, each already logged.
template <class Fn>
int for_each_case(std::size_t n, int threads, const std::vector<std::string>& ids, Fn&& fn) {
    std::atomic<std::size_t> next{0};
    std::atomic<int> failures{0};
    auto work = [&] {
        for (std::size_t i = next++; i < n; i = next++) {
            try {
                fn(i);
            } catch (const Failure& f) {
                log_error(ctk_status_name(f.status), f.message, ids[i]);
                ++failures;
            } catch (const std::exception& e) {
                log_error("Internal", e.what(), ids[i]);
                ++failures;
            }
        }
    };
    const int workers = std::max(1, std::min<int>(threads, static_cast<int>(n)));
    std::vector<std::thread> pool;
    for (int w = 1; w < workers; ++w) {
        pool.emplace_back(work);
    }
    work();
    for (auto& t : pool) {
        t.join();
    }
    return failures.load();
}

std::vector<std::string> case_ids(const ctk_manifest* m) {
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < ctk_manifest_case_count(m); ++i) {
        ids.emplace_back(ctk_manifest_case_id(m, i));
    }
    return ids;
}

std::string case_name(std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "phantom_%04zu", i);
    return buf;
}

// ---- settings

struct Globals {
    int threads = 0;
};

struct PhantomArgs {
    int n = 0;
    std::uint64_t seed = 0;
    double spacing = 1.0;
    double margin = 10.0;
    std::string jitter = "population";
    std::string out_dir;
};

struct CraniectomyArgs {
    std::string manifest;
    std::uint64_t seed = 0;
    std::string templ = "auto";
    double noise_p = 0.0;
    std::string out_dir;
    std::string subset;
    double extra_fraction = 0.0;
    std::string extra_template = "challenge";
};

struct AtlasArgs {
    std::string manifest;
    double threshold = 0.5;
    int iterations = 2;
    std::string out;
    std::vector<std::int64_t> grid_dims{304, 304, 224};
    std::vector<double> grid_spacing{0.695, 0.695, 0.715};
    std::string role = "full";
};

struct RegisterArgs {
    std::string moving;
    std::string atlas;
    std::string out_transform;
    std::string out_resampled;
    std::string manifest;
    std::string out_dir;
    std::string role = "defected";
    std::string export_training;
    int max_iterations = 200;
};

struct ReconstructArgs {
    std::string method = "atlas-sub";
    std::string defected;
    std::string atlas;
    std::string transform;
    std::string out;
    bool map_back = false;
    std::string manifest;
    std::string out_dir;
    double close_radius = 1.5;
    double max_distance = 10.0;
};

struct EvaluateArgs {
    std::string pred_manifest;
    std::string gt_manifest;
    double hd_percentile = 100.0;
    std::string out_report;
};

json settings_of(const CLI::App* sub) {
    json j = json::object();
    for (const CLI::Option* opt : sub->get_options()) {
        const std::string name = opt->get_name(false, true);
        if (name.empty() || opt->get_single_name() == "help") {
            continue;
        }
        const auto results = opt->reduced_results();
        std::string value;
        for (std::size_t i = 0; i < results.size(); ++i) {
            value += (i ? " " : "") + results[i];
        }
        if (results.empty()) {
            value = opt->get_default_str();
        }
        j[opt->get_single_name()] = value;
    }
    return j;
}

// ---- subcommands

int run_phantom(const PhantomArgs& a, int threads) {
    if (a.n < 1) {
        throw UsageError{"--n must be >= 1"};
    }
    if (!(a.spacing > 0.0)) {
        throw UsageError{"--spacing must be > 0"};
    }
    ctk_population_variability var;
    ctk_population_variability_default(&var);
    if (a.jitter == "none") {
        var = ctk_population_variability{{0, 0, 0}, 0, 0, 0};
    }
    std::vector<ctk_phantom_params> params(static_cast<std::size_t>(a.n));
    check(ctk_phantom_population(a.n, a.seed, &var, nullptr, params.data()));
    const fs::path out(a.out_dir);
    fs::create_directories(out);

    std::vector<std::string> ids;
    for (int i = 0; i < a.n; ++i) {
        ids.push_back(case_name(static_cast<std::size_t>(i)));
    }
    const int failures = for_each_case(ids.size(), threads, ids, [&](std::size_t i) {
        Volume v;
        check(ctk_phantom_generate(&params[i], a.spacing, a.margin, v.out()));
        write_volume(v, out / (ids[i] + "_full.nii.gz"));
        log_event({{"event", "case_done"}, {"case_id", ids[i]}});
    });
    if (failures > 0) {
        return 1;
    }
    Manifest m;
    check(ctk_manifest_create(created_by().c_str(), a.seed, m.out()));
    for (std::size_t i = 0; i < ids.size(); ++i) {
        std::size_t idx = 0;
        check(ctk_manifest_add_case(m.get(), ids[i].c_str(), "train", &idx));
        check(ctk_manifest_set_path(m.get(), idx, "full", (ids[i] + "_full.nii.gz").c_str()));
        check(ctk_manifest_set_seed(m.get(), idx, params[i].seed));
    }
    check(ctk_manifest_write(m.get(), (out / "manifest.json").string().c_str()));
    return 0;
}

ctk_sampler_config mix_for(const std::string& templ) {
    ctk_sampler_config cfg;
    ctk_sampler_config_default(&cfg);
    if (templ != "auto") {
        ctk_template_kind kind;
        check(ctk_template_parse(templ.c_str(), &kind));
        for (int k = 0; k < 3; ++k) {
            cfg.template_mix[k] = k == kind ? 1.0 : 0.0;
        }
    }
    return cfg;
}

int run_craniectomy(const CraniectomyArgs& a, int threads) {
    for (const std::string* t : {&a.templ, &a.extra_template}) {
        ctk_template_kind kind;
        if (*t != "auto" && ctk_template_parse(t->c_str(), &kind) != CTK_OK) {
            throw UsageError{"unknown template '" + *t + "'"};
        }
    }
    if (!(a.noise_p >= 0.0 && a.noise_p <= 1.0)) {
        throw UsageError{"--noise-p must lie in [0, 1]"};
    }
    if (!(a.extra_fraction >= 0.0 && a.extra_fraction <= 1.0)) {
        throw UsageError{"--extra-fraction must lie in [0, 1]"};
    }
    if (!a.subset.empty() && a.subset != "train" && a.subset != "test" && a.subset != "test-extra") {
        throw UsageError{"--subset must be train, test or test-extra"};
    }
    const Manifest in = read_manifest(a.manifest);
    const fs::path in_dir = dir_of(a.manifest);
    const fs::path out(a.out_dir);
    fs::create_directories(out);
    const auto ids = case_ids(in.get());
    const std::size_t n = ids.size();
    const auto n_extra = static_cast<std::size_t>(std::llround(a.extra_fraction * static_cast<double>(n)));
    const ctk_sampler_config base_cfg = mix_for(a.templ);
    const ctk_sampler_config extra_cfg = mix_for(a.extra_template);

    std::vector<std::optional<ctk_craniectomy_spec>> specs(n);
    std::vector<std::string> subsets(n);
    const int failures = for_each_case(n, threads, ids, [&](std::size_t i) {
        const bool extra = i >= n - n_extra;
        subsets[i] = extra ? "test-extra" : (a.subset.empty() ? ctk_manifest_case_subset(in.get(), i) : a.subset);
        const Volume full = read_volume(case_path(in.get(), in_dir, i, "full"));
        const std::uint64_t case_seed = ctk_derive_seed(a.seed, i);
        ctk_craniectomy_spec spec;
        check(ctk_craniectomy_sample(full.get(), case_seed, extra ? &extra_cfg : &base_cfg, &spec));
        Volume defected, defect;
        check(ctk_craniectomy_apply(full.get(), &spec, defected.out(), defect.out()));
        if (a.noise_p > 0.0) {
            Volume noisy;
            check(ctk_salt_pepper(defected.get(), a.noise_p, ctk_derive_seed(case_seed, 1), noisy.out()));
            defected = std::move(noisy);
        }
        write_volume(defected, out / (ids[i] + "_defected.nii.gz"));
        write_volume(defect, out / (ids[i] + "_defect.nii.gz"));
        specs[i] = spec;
        log_event({{"event", "case_done"},
                   {"case_id", ids[i]},
                   {"template", ctk_template_name(spec.kind)},
                   {"subset", subsets[i]}});
    });
    Manifest m;
    check(ctk_manifest_create(created_by().c_str(), a.seed, m.out()));
    for (std::size_t i = 0; i < n; ++i) {
        if (!specs[i]) {
            continue;
        }
        std::size_t idx = 0;
        check(ctk_manifest_add_case(m.get(), ids[i].c_str(), subsets[i].c_str(), &idx));
        check(ctk_manifest_set_path(m.get(), idx, "full",
                                    relative_to(case_path(in.get(), in_dir, i, "full"), out).c_str()));
        check(ctk_manifest_set_path(m.get(), idx, "defected", (ids[i] + "_defected.nii.gz").c_str()));
        check(ctk_manifest_set_path(m.get(), idx, "defect", (ids[i] + "_defect.nii.gz").c_str()));
        check(ctk_manifest_set_seed(m.get(), idx, specs[i]->seed));
        check(ctk_manifest_set_spec(m.get(), idx, &*specs[i]));
        check(ctk_manifest_set_noise_p(m.get(), idx, a.noise_p));
    }
    check(ctk_manifest_write(m.get(), (out / "manifest.json").string().c_str()));
    return failures > 0 ? 1 : 0;
}

int run_atlas(const AtlasArgs& a, int threads) {
    if (a.grid_dims.size() != 3 || a.grid_spacing.size() != 3) {
        throw UsageError{"--grid-dims and --grid-spacing take three values"};
    }
    if (!(a.threshold > 0.0 && a.threshold <= 1.0)) {
        throw UsageError{"--threshold must lie in (0, 1]"};
    }
    if (a.iterations < 0) {
        throw UsageError{"--iterations must be >= 0"};
    }
    const Manifest m = read_manifest(a.manifest);
    const fs::path dir = dir_of(a.manifest);
    const auto ids = case_ids(m.get());
    std::vector<Volume> fulls;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        fulls.push_back(read_volume(case_path(m.get(), dir, i, a.role.c_str())));
    }
    std::vector<const ctk_volume*> ptrs;
    std::vector<const char*> names;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        ptrs.push_back(fulls[i].get());
        names.push_back(ids[i].c_str());
    }
    ctk_atlas_options o;
    ctk_atlas_options_default(&o);
    o.threshold = a.threshold;
    o.iterations = a.iterations;
    for (int k = 0; k < 3; ++k) {
        o.dims[k] = a.grid_dims[static_cast<std::size_t>(k)];
        o.spacing[k] = a.grid_spacing[static_cast<std::size_t>(k)];
    }
    o.threads = threads;
    AtlasH atlas;
    check(ctk_atlas_build(ptrs.data(), ptrs.size(), names.data(), &o, atlas.out()));
    check(ctk_atlas_save(atlas.get(), a.out.c_str()));
    std::vector<double> rounds(16);
    std::size_t n_rounds = 0;
    check(ctk_atlas_round_dice(atlas.get(), rounds.data(), rounds.size(), &n_rounds));
    rounds.resize(std::min(n_rounds, rounds.size()));
    log_event({{"event", "atlas_done"}, {"cases", ids.size()}, {"round_mean_dice", rounds}});
    return 0;
}

void warn_if_unconverged(const ctk_registration_info& info, const std::string& id) {
    if (!info.converged) {
        log_event({{"event", "warning"},
                   {"code", "NonConvergence"},
                   {"case_id", id},
                   {"message", "registration hit the iteration cap while still improving; best-so-far kept"}});
    }
}

int run_register(const RegisterArgs& a, int threads) {
    if (a.atlas.empty()) {
        throw UsageError{"--atlas is required"};
    }
    const bool batch = !a.manifest.empty();
    if (batch == !a.moving.empty()) {
        throw UsageError{"give exactly one of --moving (single case) or --manifest (batch)"};
    }
    if (!a.export_training.empty() && a.export_training != "DE" && a.export_training != "DE-Shape") {
        throw UsageError{"--export-training must be DE or DE-Shape"};
    }
    if (!a.export_training.empty() && !batch) {
        throw UsageError{"--export-training needs --manifest"};
    }
    if (batch && a.out_dir.empty()) {
        throw UsageError{"--out-dir is required with --manifest"};
    }
    if (!batch && a.out_transform.empty()) {
        throw UsageError{"--out-transform is required with --moving"};
    }
    const AtlasH atlas = load_atlas(a.atlas);
    ctk_registration_options ro;
    ctk_registration_options_default(&ro);
    ro.max_iterations = a.max_iterations;
    Target target;
    check(ctk_target_from_atlas(atlas.get(), &ro, target.out()));

    if (!batch) {
        const Volume moving = read_volume(a.moving);
        Transform t;
        ctk_registration_info info{};
        check(ctk_register(moving.get(), target.get(), t.out(), &info));
        warn_if_unconverged(info, a.moving);
        check(ctk_transform_write(t.get(), a.out_transform.c_str()));
        if (!a.out_resampled.empty()) {
            Volume r;
            check(ctk_resample_to_atlas(moving.get(), t.get(), atlas.get(), CTK_NEAREST, r.out()));
            write_volume(r, a.out_resampled);
        }
        log_event({{"event", "registered"}, {"objective", info.objective}, {"iterations", info.iterations}});
        return 0;
    }

    const Manifest in = read_manifest(a.manifest);
    const fs::path in_dir = dir_of(a.manifest);
    const fs::path out(a.out_dir);
    fs::create_directories(out);
    const auto ids = case_ids(in.get());
    const bool shape = a.export_training == "DE-Shape";
    const bool exporting = !a.export_training.empty();
    if (shape) {
        Volume prior;
        check(ctk_atlas_binary(atlas.get(), prior.out()));
        write_volume(prior, out / "atlas_prior.nii.gz");
    }
    std::vector<char> ok(ids.size(), 0);
    std::vector<char> has_target(ids.size(), 0);
    const int failures = for_each_case(ids.size(), threads, ids, [&](std::size_t i) {
        const Volume moving = read_volume(case_path(in.get(), in_dir, i, a.role.c_str()));
        Transform t;
        ctk_registration_info info{};
        check(ctk_register(moving.get(), target.get(), t.out(), &info));
        warn_if_unconverged(info, ids[i]);
        check(ctk_transform_write(t.get(), (out / (ids[i] + "_transform.txt")).string().c_str()));
        if (exporting) {
            const Volume defected = read_volume(case_path(in.get(), in_dir, i, "defected"));
            Volume c1;
            check(ctk_resample_to_atlas(defected.get(), t.get(), atlas.get(), CTK_NEAREST, c1.out()));
            write_volume(c1, out / (ids[i] + "_channel1.nii.gz"));
            if (ctk_manifest_case_path(in.get(), i, "defect") != nullptr) {
                const Volume defect = read_volume(case_path(in.get(), in_dir, i, "defect"));
                Volume y;
                check(ctk_resample_to_atlas(defect.get(), t.get(), atlas.get(), CTK_NEAREST, y.out()));
                write_volume(y, out / (ids[i] + "_target.nii.gz"));
                has_target[i] = 1;
            }
        }
        ok[i] = 1;
        log_event({{"event", "case_done"},
                   {"case_id", ids[i]},
                   {"objective", info.objective},
                   {"iterations", info.iterations}});
    });

    Manifest m;
    check(ctk_manifest_create(created_by().c_str(), ctk_manifest_master_seed(in.get()), m.out()));
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (!ok[i]) {
            continue;
        }
        std::size_t idx = 0;
        check(ctk_manifest_add_case(m.get(), ids[i].c_str(), ctk_manifest_case_subset(in.get(), i), &idx));
        for (const char* role : {"full", "defected", "defect"}) {
            if (ctk_manifest_case_path(in.get(), i, role) != nullptr) {
                check(ctk_manifest_set_path(m.get(), idx, role,
                                            relative_to(case_path(in.get(), in_dir, i, role), out).c_str()));
            }
        }
        check(ctk_manifest_set_path(m.get(), idx, "transform", (ids[i] + "_transform.txt").c_str()));
        if (exporting) {
            check(ctk_manifest_set_path(m.get(), idx, "channel1", (ids[i] + "_channel1.nii.gz").c_str()));
            if (shape) {
                check(ctk_manifest_set_path(m.get(), idx, "channel2", "atlas_prior.nii.gz"));
            }
            if (has_target[i]) {
                check(ctk_manifest_set_path(m.get(), idx, "target", (ids[i] + "_target.nii.gz").c_str()));
            }
        }
        int has_spec = 0;
        ctk_craniectomy_spec spec;
        check(ctk_manifest_case_spec(in.get(), i, &has_spec, &spec));
        if (has_spec) {
            check(ctk_manifest_set_spec(m.get(), idx, &spec));
        }
        int has_seed = 0;
        std::uint64_t seed = 0;
        check(ctk_manifest_case_seed(in.get(), i, &has_seed, &seed));
        if (has_seed) {
            check(ctk_manifest_set_seed(m.get(), idx, seed));
        }
        double p = 0.0;
        check(ctk_manifest_case_noise_p(in.get(), i, &p));
        check(ctk_manifest_set_noise_p(m.get(), idx, p));
    }
    const char* name = exporting ? "training_manifest.json" : "manifest.json";
    check(ctk_manifest_write(m.get(), (out / name).string().c_str()));
    return failures > 0 ? 1 : 0;
}

// One prediction on the atlas grid (or the input grid for a plain mirror),
// optionally mapped back onto the defected skull's grid.
Volume reconstruct_one(const ReconstructArgs& a, const ctk_atlas* atlas, const Volume& defected,
                       const ctk_transform* t, bool& empty) {
    ctk_postprocess_options po;
    ctk_postprocess_options_default(&po);
    po.close_radius_mm = a.close_radius;
    po.max_distance_mm = a.max_distance;
    Volume pred;
    int empty_flag = 0;
    if (a.method == "atlas-sub") {
        check(ctk_reconstruct_atlas(defected.get(), atlas, t, &po, pred.out(), &empty_flag));
    } else if (atlas != nullptr) {
        Transform identity;
        if (t == nullptr) {
            check(ctk_transform_identity(identity.out()));
            t = identity.get();
        }
        Volume common;
        check(ctk_resample_to_atlas(defected.get(), t, atlas, CTK_NEAREST, common.out()));
        check(ctk_reconstruct_mirror(common.get(), &po, pred.out(), &empty_flag));
    } else {
        check(ctk_reconstruct_mirror(defected.get(), &po, pred.out(), &empty_flag));
    }
    empty = empty_flag != 0;
    if (a.map_back && atlas != nullptr) {
        Transform identity;
        if (t == nullptr) {
            check(ctk_transform_identity(identity.out()));
            t = identity.get();
        }
        Volume back;
        check(ctk_map_back(pred.get(), t, defected.get(), back.out()));
        return back;
    }
    return pred;
}

int run_reconstruct(const ReconstructArgs& a, int threads) {
    if (a.method != "atlas-sub" && a.method != "mirror") {
        throw UsageError{"--method must be atlas-sub or mirror"};
    }
    if (a.method == "atlas-sub" && a.atlas.empty()) {
        throw UsageError{"--atlas is required for --method atlas-sub"};
    }
    if (a.map_back && a.atlas.empty()) {
        throw UsageError{"--map-back needs --atlas (the common grid)"};
    }
    const bool batch = !a.manifest.empty();
    if (batch == !a.defected.empty()) {
        throw UsageError{"give exactly one of --defected (single case) or --manifest (batch)"};
    }
    if (batch ? a.out_dir.empty() : a.out.empty()) {
        throw UsageError{batch ? "--out-dir is required with --manifest" : "--out is required with --defected"};
    }
    AtlasH atlas;
    if (!a.atlas.empty()) {
        atlas = load_atlas(a.atlas);
    }
    auto warn_empty = [](const std::string& id) {
        log_event({{"event", "warning"},
                   {"code", "EmptyPrediction"},
                   {"case_id", id},
                   {"message", "nothing survived subtraction and postprocessing"}});
    };
    if (!batch) {
        const Volume defected = read_volume(a.defected);
        Transform t;
        if (!a.transform.empty()) {
            t = read_transform(a.transform);
        }
        bool empty = false;
        const Volume pred = reconstruct_one(a, atlas.get(), defected, t.get(), empty);
        if (empty) {
            warn_empty(a.defected);
        }
        write_volume(pred, a.out);
        return 0;
    }

    const Manifest in = read_manifest(a.manifest);
    const fs::path in_dir = dir_of(a.manifest);
    const fs::path out(a.out_dir);
    fs::create_directories(out);
    const auto ids = case_ids(in.get());
    std::vector<char> ok(ids.size(), 0);
    const int failures = for_each_case(ids.size(), threads, ids, [&](std::size_t i) {
        const Volume defected = read_volume(case_path(in.get(), in_dir, i, "defected"));
        Transform t;
        if (ctk_manifest_case_path(in.get(), i, "transform") != nullptr) {
            t = read_transform(case_path(in.get(), in_dir, i, "transform"));
        }
        bool empty = false;
        const Volume pred = reconstruct_one(a, atlas.get(), defected, t.get(), empty);
        if (empty) {
            warn_empty(ids[i]);
        }
        write_volume(pred, out / (ids[i] + "_prediction.nii.gz"));
        ok[i] = 1;
        log_event({{"event", "case_done"}, {"case_id", ids[i]}, {"empty_prediction", empty}});
    });
    Manifest m;
    check(ctk_manifest_create(created_by().c_str(), ctk_manifest_master_seed(in.get()), m.out()));
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (!ok[i]) {
            continue;
        }
        std::size_t idx = 0;
        check(ctk_manifest_add_case(m.get(), ids[i].c_str(), ctk_manifest_case_subset(in.get(), i), &idx));
        check(ctk_manifest_set_path(m.get(), idx, "prediction", (ids[i] + "_prediction.nii.gz").c_str()));
    }
    check(ctk_manifest_write(m.get(), (out / "manifest.json").string().c_str()));
    return failures > 0 ? 1 : 0;
}

int run_evaluate(const EvaluateArgs& a, int threads) {
    if (!(a.hd_percentile > 0.0 && a.hd_percentile <= 100.0)) {
        throw UsageError{"--hd-percentile must lie in (0, 100]"};
    }
    const Manifest pred = read_manifest(a.pred_manifest);
    const Manifest gt = read_manifest(a.gt_manifest);
    const fs::path pred_dir = dir_of(a.pred_manifest);
    const fs::path gt_dir = dir_of(a.gt_manifest);
    const auto pred_ids = case_ids(pred.get());
    const auto gt_ids = case_ids(gt.get());

    struct Row {
        bool ok = false;
        double dice = 0.0;
        int has_hd = 0;
        double hd = 0.0;
    };
    std::vector<Row> rows(gt_ids.size());
    const int failures = for_each_case(gt_ids.size(), threads, gt_ids, [&](std::size_t i) {
        const auto it = std::find(pred_ids.begin(), pred_ids.end(), gt_ids[i]);
        if (it == pred_ids.end()) {
            throw Failure{CTK_SCHEMA_VIOLATION, "no prediction for case " + gt_ids[i]};
        }
        const auto k = static_cast<std::size_t>(it - pred_ids.begin());
        const char* role = ctk_manifest_case_path(pred.get(), k, "prediction") ? "prediction" : "defect";
        const Volume p = read_volume(case_path(pred.get(), pred_dir, k, role));
        const Volume y = read_volume(case_path(gt.get(), gt_dir, i, "defect"));
        Row r;
        check(ctk_evaluate_case(p.get(), y.get(), a.hd_percentile, &r.dice, &r.has_hd, &r.hd));
        r.ok = true;
        rows[i] = r;
    });
    Report report;
    check(ctk_report_create(a.hd_percentile, report.out()));
    for (std::size_t i = 0; i < gt_ids.size(); ++i) {
        if (rows[i].ok) {
            check(ctk_report_add(report.get(), gt_ids[i].c_str(), ctk_manifest_case_subset(gt.get(), i), rows[i].dice,
                                 rows[i].has_hd, rows[i].hd));
        }
    }
    fs::path csv(a.out_report);
    csv.replace_extension(".csv");
    if (fs::path(a.out_report).has_parent_path()) {
        fs::create_directories(fs::path(a.out_report).parent_path());
    }
    check(ctk_report_write(report.get(), a.out_report.c_str(), csv.string().c_str()));
    for (const char* key : {"test", "test-extra", "train-val", "overall"}) {
        int present = 0, n = 0, has_hd = 0;
        double md = 0, sd = 0, mh = 0, sh = 0;
        check(ctk_report_aggregate(report.get(), key, &present, &n, &md, &sd, &has_hd, &mh, &sh));
        if (present) {
            json e{{"event", "aggregate"}, {"subset", key}, {"n", n}, {"mean_dice", md}, {"std_dice", sd}};
            e["mean_hd_mm"] = has_hd ? json(mh) : json(nullptr);
            e["std_hd_mm"] = has_hd ? json(sh) : json(nullptr);
            log_event(std::move(e));
        }
    }
    return failures > 0 ? 1 : 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"craniotk: virtual craniectomy, atlas priors and implant baselines"};
    app.require_subcommand(1);
    // Global options such as --threads may also follow the subcommand.
    app.fallthrough();
    app.set_version_flag("--version", std::string(ctk_version()));
    app.set_config("--config", "", "key=value settings file; command-line flags take precedence");
    Globals g;
    app.add_option("--threads", g.threads, "worker count (default: CRANIOTK_THREADS, else all cores)")
        ->check(CLI::NonNegativeNumber);

    PhantomArgs pa;
    auto* phantom = app.add_subcommand("phantom", "generate synthetic full skulls");
    phantom->add_option("--n", pa.n, "number of phantoms")->required();
    phantom->add_option("--seed", pa.seed, "master seed")->capture_default_str();
    phantom->add_option("--spacing", pa.spacing, "isotropic voxel size in mm")->capture_default_str();
    phantom->add_option("--margin", pa.margin, "grid margin in mm")->capture_default_str();
    phantom->add_option("--jitter", pa.jitter, "shape and pose jitter")
        ->check(CLI::IsMember({"population", "none"}))
        ->capture_default_str();
    phantom->add_option("--out-dir", pa.out_dir, "output directory")->required();

    CraniectomyArgs ca;
    auto* cran = app.add_subcommand("craniectomy", "simulate flaps on full skulls");
    cran->add_option("--manifest", ca.manifest, "manifest with full skulls")->required();
    cran->add_option("--seed", ca.seed, "master seed")->capture_default_str();
    cran->add_option("--template", ca.templ, "auto|sphere|cube|challenge")->capture_default_str();
    cran->add_option("--noise-p", ca.noise_p, "salt-and-pepper probability on the defected skull")
        ->capture_default_str();
    cran->add_option("--out-dir", ca.out_dir, "output directory")->required();
    cran->add_option("--subset", ca.subset, "override the subset of every case");
    cran->add_option("--extra-fraction", ca.extra_fraction, "trailing fraction of cases marked test-extra")
        ->capture_default_str();
    cran->add_option("--extra-template", ca.extra_template, "template used for test-extra cases")
        ->capture_default_str();

    AtlasArgs aa;
    auto* atlas = app.add_subcommand("atlas", "build the full-skull atlas");
    atlas->add_option("--manifest", aa.manifest, "manifest with full skulls")->required();
    atlas->add_option("--threshold", aa.threshold, "mean-occupancy threshold")->capture_default_str();
    atlas->add_option("--iterations", aa.iterations, "refinement rounds after the reference round")
        ->capture_default_str();
    atlas->add_option("--out", aa.out, "atlas directory")->required();
    atlas->add_option("--grid-dims", aa.grid_dims, "common grid size")->expected(3)->capture_default_str();
    atlas->add_option("--grid-spacing", aa.grid_spacing, "common grid spacing in mm")
        ->expected(3)
        ->capture_default_str();
    atlas->add_option("--role", aa.role, "manifest path role to average")->capture_default_str();

    RegisterArgs ra;
    auto* reg = app.add_subcommand("register", "rigidly align skulls to the atlas");
    reg->add_option("--moving", ra.moving, "single volume to align");
    reg->add_option("--atlas", ra.atlas, "atlas directory");
    reg->add_option("--out-transform", ra.out_transform, "transform file (single mode)");
    reg->add_option("--out-resampled", ra.out_resampled, "volume on the atlas grid (single mode)");
    reg->add_option("--manifest", ra.manifest, "batch input manifest");
    reg->add_option("--out-dir", ra.out_dir, "batch output directory");
    reg->add_option("--role", ra.role, "manifest path role to align")->capture_default_str();
    reg->add_option("--export-training", ra.export_training, "DE|DE-Shape: also write model input channels");
    reg->add_option("--max-iterations", ra.max_iterations, "simplex iterations per level")->capture_default_str();

    ReconstructArgs rca;
    auto* rec = app.add_subcommand("reconstruct", "classical implant estimates");
    rec->add_option("--method", rca.method, "atlas-sub|mirror")->capture_default_str();
    rec->add_option("--defected", rca.defected, "defected skull (single mode)");
    rec->add_option("--atlas", rca.atlas, "atlas directory");
    rec->add_option("--transform", rca.transform, "original-to-atlas transform (single mode)");
    rec->add_option("--out", rca.out, "prediction volume (single mode)");
    rec->add_flag("--map-back", rca.map_back, "write the prediction on the defected skull's grid");
    rec->add_option("--manifest", rca.manifest, "batch manifest with defected and transform paths");
    rec->add_option("--out-dir", rca.out_dir, "batch output directory");
    rec->add_option("--close-radius", rca.close_radius, "closing radius in mm")->capture_default_str();
    rec->add_option("--max-distance", rca.max_distance, "distance gate in mm")->capture_default_str();

    EvaluateArgs ea;
    auto* eval = app.add_subcommand("evaluate", "Dice and Hausdorff report");
    eval->add_option("--pred-manifest", ea.pred_manifest, "predictions (role prediction)")->required();
    eval->add_option("--gt-manifest", ea.gt_manifest, "ground truth (role defect)")->required();
    eval->add_option("--hd-percentile", ea.hd_percentile, "100 = maximum, 95 = HD95")->capture_default_str();
    eval->add_option("--out-report", ea.out_report, "JSON report; a CSV is written alongside")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    const int threads = ctk_resolve_threads(g.threads);
    CLI::App* sub = app.get_subcommands().front();
    log_event({{"event", "start"},
               {"command", sub->get_name()},
               {"version", ctk_version()},
               {"threads", threads},
               {"settings", settings_of(sub)}});
    int rc = 0;
    try {
        if (sub == phantom) rc = run_phantom(pa, threads);
        else if (sub == cran) rc = run_craniectomy(ca, threads);
        else if (sub == atlas) rc = run_atlas(aa, threads);
        else if (sub == reg) rc = run_register(ra, threads);
        else if (sub == rec) rc = run_reconstruct(rca, threads);
        else rc = run_evaluate(ea, threads);
    } catch (const UsageError& e) {
        log_error("Usage", e.message);
        return 2;
    } catch (const Failure& f) {
        log_error(ctk_status_name(f.status), f.message);
        return 1;
    } catch (const std::exception& e) {
        log_error("Internal", e.what());
        return 1;
    }
    log_event({{"event", "finish"}, {"command", sub->get_name()}, {"status", rc}});
    return rc;
}
