#include "craniotk/reconstruct.hpp"

#include "craniotk/error.hpp"

#include <cmath>

namespace craniotk {

namespace {

// Drops the 26-connected components of x that come no closer than max_mm to
// any seed voxel. Gating whole components keeps the middle of a wide flap,
// which can sit far from the remaining bone, while stray pieces go.
VoxelGrid distance_gate(const VoxelGrid& x, const std::vector<std::int64_t>& seeds, double max_mm) {
    const auto bb = bounding_box(x);
    if (!bb) {
        return x;
    }
    const GridGeometry& g = x.geometry();
    Index3 margin;
    for (int a = 0; a < 3; ++a) {
        margin[a] = static_cast<std::int64_t>(std::ceil(max_mm / g.spacing[a])) + 1;
    }
    const Box box = bb->expanded(margin, g.dims);
    const Dims ext = box.extent();
    auto local = [&](const Index3& v) {
        return static_cast<std::size_t>((v[0] - box.lo[0]) + ext[0] * ((v[1] - box.lo[1]) + ext[1] * (v[2] - box.lo[2])));
    };
    std::vector<std::uint8_t> seed_box(static_cast<std::size_t>(ext[0] * ext[1] * ext[2]), 0);
    for (std::int64_t n : seeds) {
        const Index3 v = g.unravel(n);
        if (v[0] >= box.lo[0] && v[0] < box.hi[0] && v[1] >= box.lo[1] && v[1] < box.hi[1] && v[2] >= box.lo[2] &&
            v[2] < box.hi[2]) {
            seed_box[local(v)] = 1;
        }
    }
    const auto d2 = squared_edt(seed_box, ext, g.spacing);
    const double limit = max_mm * max_mm * (1.0 + 1e-12) + 1e-12;
    const Components comps = label_components(x, Connectivity::Full26);
    std::vector<char> keep(comps.sizes.size(), 0);
    for (std::int64_t k = bb->lo[2]; k < bb->hi[2]; ++k) {
        for (std::int64_t j = bb->lo[1]; j < bb->hi[1]; ++j) {
            for (std::int64_t i = bb->lo[0]; i < bb->hi[0]; ++i) {
                const std::uint32_t label = comps.labels[static_cast<std::size_t>(g.linear(i, j, k))];
                if (label != 0 && d2[local({i, j, k})] <= limit) {
                    keep[label] = 1;
                }
            }
        }
    }
    VoxelGrid out(g);
    for (std::int64_t n = 0; n < x.size(); ++n) {
        if (keep[comps.labels[static_cast<std::size_t>(n)]]) {
            out.set(n);
        }
    }
    return out;
}

Reconstruction finish(VoxelGrid prediction) {
    Reconstruction r;
    r.empty_prediction = prediction.empty();
    r.prediction = std::move(prediction);
    return r;
}

} // namespace

VoxelGrid postprocess(const VoxelGrid& raw, const VoxelGrid& defected, const PostprocessOptions& options) {
    if (!same_geometry(raw.geometry(), defected.geometry())) {
        fail(ErrorCode::GeometryMismatch, "postprocess: prediction and defected skull grids differ");
    }
    if (options.close_radius_mm < 0.0 || options.max_distance_mm < 0.0 || options.max_passes < 1) {
        fail(ErrorCode::InvalidArgument, "postprocess: radii must be >= 0 and passes >= 1");
    }
    const std::vector<std::int64_t> seeds = defected.empty() ? std::vector<std::int64_t>{} : surface_indices(defected);
    VoxelGrid x = raw;
    for (int pass = 0; pass < options.max_passes && !x.empty(); ++pass) {
        VoxelGrid y = options.close_radius_mm > 0.0 ? morph(x, MorphOp::Close, options.close_radius_mm) : x;
        y = set_ops(y, defected, SetOp::Subtract);
        y = largest_component(y, Connectivity::Full26);
        if (!seeds.empty()) {
            y = distance_gate(y, seeds, options.max_distance_mm);
        }
        if (y == x) {
            break;
        }
        x = std::move(y);
    }
    return x;
}

Reconstruction atlas_subtract(const VoxelGrid& defected, const Atlas& atlas, const RigidTransform& to_common,
                              const PostprocessOptions& options) {
    const VoxelGrid registered = resample(defected, to_common, atlas.geometry(), Interpolation::Nearest);
    const VoxelGrid raw = set_ops(atlas.binary, registered, SetOp::Subtract);
    return finish(set_ops(postprocess(raw, registered, options), atlas.binary, SetOp::Intersect));
}

Reconstruction mirror_reconstruct(const VoxelGrid& defected, const PostprocessOptions& options) {
    const VoxelGrid raw = set_ops(mirror_x(defected), defected, SetOp::Subtract);
    return finish(postprocess(raw, defected, options));
}

} // namespace craniotk
