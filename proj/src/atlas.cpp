#include "craniotk/atlas.hpp"

#include "craniotk/error.hpp"
#include "craniotk/io.hpp"
#include "craniotk/metrics.hpp"
#include "craniotk/parallel.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

namespace craniotk {

namespace fs = std::filesystem;

namespace {

// Volumes on disk carry float32 spacing and origin; keeping the common grid
// float-representable lets files read back match it exactly.
GridGeometry float_exact(GridGeometry g) {
    for (int a = 0; a < 3; ++a) {
        g.spacing[a] = static_cast<float>(g.spacing[a]);
        g.origin[a] = static_cast<float>(g.origin[a]);
    }
    return g;
}

struct Round {
    std::vector<std::optional<VoxelGrid>> resampled;
    std::vector<std::string> failed;
};

// `frame` maps the reference's world onto the common space.
Round register_round(const std::vector<VoxelGrid>& fulls, const VoxelGrid& reference, bool first_is_reference,
                     const RigidTransform& frame, const GridGeometry& common, const AtlasOptions& options,
                     const std::vector<std::string>& ids) {
    const RegistrationTarget target(reference, options.registration);
    Round round;
    round.resampled.resize(fulls.size());
    std::vector<char> failed(fulls.size(), 0);
    parallel_for(static_cast<std::int64_t>(fulls.size()), options.threads, [&](std::int64_t i) {
        const auto k = static_cast<std::size_t>(i);
        try {
            RigidTransform t;
            if (!(first_is_reference && i == 0)) {
                t = register_rigid(fulls[k], target).transform;
            }
            round.resampled[k] = resample(fulls[k], frame * t, common, Interpolation::TrilinearThreshold);
        } catch (const Error&) {
            failed[k] = 1;
        }
    });
    for (std::size_t k = 0; k < fulls.size(); ++k) {
        if (failed[k]) {
            round.failed.push_back(ids[k]);
        }
    }
    if (2 * round.failed.size() > fulls.size()) {
        fail(ErrorCode::RegistrationFailed, "atlas: " + std::to_string(round.failed.size()) + " of " +
                                                std::to_string(fulls.size()) + " registrations failed");
    }
    return round;
}

void average_round(const Round& round, double t, Atlas& atlas) {
    const auto first = std::find_if(round.resampled.begin(), round.resampled.end(),
                                    [](const auto& r) { return r.has_value(); });
    const GridGeometry& g = (*first)->geometry();
    std::vector<std::uint16_t> hits(static_cast<std::size_t>(g.voxel_count()), 0);
    int used = 0;
    for (const auto& r : round.resampled) {
        if (!r) {
            continue;
        }
        ++used;
        const auto words = r->words();
        for (std::size_t w = 0; w < words.size(); ++w) {
            std::uint64_t bits = words[w];
            while (bits != 0) {
                const int b = std::countr_zero(bits);
                bits &= bits - 1;
                ++hits[w * 64 + static_cast<std::size_t>(b)];
            }
        }
    }
    atlas.average = ScalarGrid(g);
    for (std::size_t n = 0; n < hits.size(); ++n) {
        atlas.average[static_cast<std::int64_t>(n)] = static_cast<double>(hits[n]) / used;
    }
    atlas.binary = threshold(atlas.average, t);
    double sum = 0.0;
    for (const auto& r : round.resampled) {
        if (r) {
            sum += dice(atlas.binary, *r);
        }
    }
    atlas.round_dice.push_back(sum / used);
    atlas.failed_cases.push_back(round.failed);
}

std::string join3(const Vec3& v) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "%.17g %.17g %.17g", v.x, v.y, v.z);
    return buf;
}

} // namespace

Atlas build_atlas(const std::vector<VoxelGrid>& fulls, const AtlasOptions& options, std::vector<std::string> case_ids) {
    if (fulls.size() < 2) {
        fail(ErrorCode::InvalidArgument, "atlas needs at least two input skulls");
    }
    if (fulls.size() > 65535) {
        fail(ErrorCode::InvalidArgument, "atlas supports at most 65535 inputs");
    }
    if (!(options.threshold > 0.0 && options.threshold <= 1.0)) {
        fail(ErrorCode::InvalidArgument, "atlas threshold must lie in (0, 1]");
    }
    if (options.iterations < 0) {
        fail(ErrorCode::InvalidArgument, "atlas iterations must be >= 0");
    }
    options.registration.validate();
    if (case_ids.empty()) {
        for (std::size_t i = 0; i < fulls.size(); ++i) {
            case_ids.push_back("case" + std::to_string(i));
        }
    }
    if (case_ids.size() != fulls.size()) {
        fail(ErrorCode::InvalidArgument, "atlas: one case id per input required");
    }
    for (const auto& f : fulls) {
        if (f.empty()) {
            fail(ErrorCode::EmptyInput, "atlas input skull is empty");
        }
    }
    const RigidTransform frame = options.canonical_frame ? principal_frame(fulls.front()) : RigidTransform::identity();
    const GridGeometry common = float_exact(
        options.geometry ? *options.geometry : options.grid.centered_on(frame.apply(centroid(fulls.front()))));
    common.validate();

    Atlas atlas;
    atlas.threshold = options.threshold;
    atlas.iterations = options.iterations;
    atlas.case_ids = case_ids;
    average_round(register_round(fulls, fulls.front(), true, frame, common, options, case_ids), options.threshold, atlas);
    for (int r = 0; r < options.iterations; ++r) {
        const VoxelGrid reference = atlas.binary;
        if (reference.empty()) {
            fail(ErrorCode::RegistrationFailed, "atlas: thresholded mean is empty; lower the threshold");
        }
        average_round(register_round(fulls, reference, false, RigidTransform::identity(), common, options, case_ids), options.threshold, atlas);
    }
    return atlas;
}

std::pair<VoxelGrid, VoxelGrid> prior_channel(const VoxelGrid& defected_registered, const Atlas& atlas) {
    if (!same_geometry(defected_registered.geometry(), atlas.geometry())) {
        fail(ErrorCode::GeometryMismatch, "prior channel: defected volume is not on the atlas grid");
    }
    return {defected_registered, atlas.binary};
}

void save_atlas(const Atlas& atlas, const fs::path& dir) {
    fs::create_directories(dir);
    write_scalar_volume(atlas.average, dir / "atlas_average.nii.gz");
    write_volume(atlas.binary, dir / "atlas_binary.nii.gz");
    const GridGeometry& g = atlas.geometry();
    std::ostringstream os;
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", atlas.threshold);
    os << "format=craniotk-atlas\n"
       << "format_version=1\n"
       << "threshold=" << buf << "\n"
       << "iterations=" << atlas.iterations << "\n"
       << "dims=" << g.dims[0] << ' ' << g.dims[1] << ' ' << g.dims[2] << "\n"
       << "spacing=" << join3(g.spacing) << "\n"
       << "origin=" << join3(g.origin) << "\n"
       << "cases=";
    for (std::size_t i = 0; i < atlas.case_ids.size(); ++i) {
        os << (i ? "," : "") << atlas.case_ids[i];
    }
    os << "\n";
    write_text_file(dir / "atlas.meta", os.str());
}

Atlas load_atlas(const fs::path& dir) {
    std::map<std::string, std::string> kv;
    {
        std::istringstream in(read_text_file(dir / "atlas.meta"));
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty() || line[0] == '#') {
                continue;
            }
            const auto eq = line.find('=');
            if (eq == std::string::npos) {
                fail(ErrorCode::SchemaViolation, "atlas.meta: line without '=': " + line);
            }
            kv[line.substr(0, eq)] = line.substr(eq + 1);
        }
    }
    auto need = [&](const char* key) -> const std::string& {
        const auto it = kv.find(key);
        if (it == kv.end()) {
            fail(ErrorCode::SchemaViolation, std::string("atlas.meta: missing ") + key);
        }
        return it->second;
    };
    if (need("format") != "craniotk-atlas" || need("format_version") != "1") {
        fail(ErrorCode::SchemaViolation, "atlas.meta: unsupported format or version");
    }
    Atlas atlas;
    GridGeometry g;
    try {
        atlas.threshold = std::stod(need("threshold"));
        atlas.iterations = std::stoi(need("iterations"));
        std::istringstream d(need("dims")), s(need("spacing")), o(need("origin"));
        for (int a = 0; a < 3; ++a) {
            if (!(d >> g.dims[a]) || !(s >> g.spacing[a]) || !(o >> g.origin[a])) {
                throw std::invalid_argument("grid");
            }
        }
    } catch (const std::exception&) {
        fail(ErrorCode::SchemaViolation, "atlas.meta: malformed threshold, iterations or grid");
    }
    std::istringstream cases(need("cases"));
    for (std::string id; std::getline(cases, id, ',');) {
        atlas.case_ids.push_back(id);
    }
    atlas.average = read_scalar_volume(dir / "atlas_average.nii.gz");
    atlas.binary = read_volume(dir / "atlas_binary.nii.gz");
    if (!same_geometry(atlas.average.geometry(), g) || !same_geometry(atlas.binary.geometry(), g)) {
        fail(ErrorCode::SchemaViolation, "atlas.meta: grid disagrees with the atlas volumes");
    }
    if (!(threshold(atlas.average, atlas.threshold) == atlas.binary)) {
        fail(ErrorCode::SchemaViolation, "atlas: binary volume is not the thresholded average");
    }
    return atlas;
}

} // namespace craniotk
