#include "craniotk/craniectomy.hpp"

#include "craniotk/error.hpp"
#include "craniotk/random.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace craniotk {

namespace {

Vec3 to_local(const CraniectomySpec& spec, Vec3 p) {
    const Vec3 d = p - spec.center;
    const double c = std::cos(spec.orientation);
    const double s = std::sin(spec.orientation);
    return {c * d.x + s * d.y, -s * d.x + c * d.y, d.z};
}

bool in_half_open(double v, double half) { return v >= -half && v < half; }

// World-space half extents of the template's axis-aligned bounding box.
Vec3 template_half_extent(const CraniectomySpec& spec) {
    switch (spec.kind) {
    case TemplateKind::Sphere: return {spec.radius, spec.radius, spec.radius};
    case TemplateKind::Cube: {
        const double h = 0.5 * spec.edge * std::sqrt(2.0);
        return {h, h, 0.5 * spec.edge};
    }
    case TemplateKind::Challenge: {
        const double h = 0.5 * spec.edge * std::sqrt(2.0) + spec.cylinder_radius;
        return {h, h, 0.5 * spec.edge};
    }
    }
    return {};
}

// Rasterises without the OutOfBounds check; returns the number of hits.
std::int64_t rasterize(const CraniectomySpec& spec, VoxelGrid& out) {
    const GridGeometry& g = out.geometry();
    const Vec3 half = template_half_extent(spec);
    Index3 lo{};
    Index3 hi{};
    for (int a = 0; a < 3; ++a) {
        lo[a] = std::max<std::int64_t>(
            0, static_cast<std::int64_t>(std::floor((spec.center[a] - half[a] - g.origin[a]) / g.spacing[a])) - 1);
        hi[a] = std::min<std::int64_t>(
            g.dims[a] - 1, static_cast<std::int64_t>(std::ceil((spec.center[a] + half[a] - g.origin[a]) / g.spacing[a])) + 1);
        if (hi[a] < lo[a]) {
            return 0;
        }
    }
    std::int64_t hits = 0;
    for (std::int64_t k = lo[2]; k <= hi[2]; ++k) {
        for (std::int64_t j = lo[1]; j <= hi[1]; ++j) {
            for (std::int64_t i = lo[0]; i <= hi[0]; ++i) {
                if (template_contains(spec, g.world(i, j, k))) {
                    out.set(i, j, k);
                    ++hits;
                }
            }
        }
    }
    return hits;
}

} // namespace

std::string_view to_string(TemplateKind kind) {
    switch (kind) {
    case TemplateKind::Sphere: return "sphere";
    case TemplateKind::Cube: return "cube";
    case TemplateKind::Challenge: return "challenge";
    }
    return "unknown";
}

TemplateKind template_kind_from_string(std::string_view name) {
    if (name == "sphere") return TemplateKind::Sphere;
    if (name == "cube") return TemplateKind::Cube;
    if (name == "challenge") return TemplateKind::Challenge;
    fail(ErrorCode::InvalidArgument, "unknown template kind '" + std::string(name) + "'");
}

void CraniectomySpec::validate() const {
    const bool ok = [&] {
        switch (kind) {
        case TemplateKind::Sphere: return radius > 0.0 && std::isfinite(radius);
        case TemplateKind::Cube: return edge > 0.0 && std::isfinite(edge);
        case TemplateKind::Challenge:
            return edge > 0.0 && cylinder_radius > 0.0 && std::isfinite(edge) && std::isfinite(cylinder_radius);
        }
        return false;
    }();
    if (!ok) {
        fail(ErrorCode::InvalidArgument, "craniectomy template sizes must be finite and > 0");
    }
    if (!std::isfinite(center.x) || !std::isfinite(center.y) || !std::isfinite(center.z) ||
        !std::isfinite(orientation)) {
        fail(ErrorCode::InvalidArgument, "craniectomy center/orientation must be finite");
    }
}

bool template_contains(const CraniectomySpec& spec, Vec3 p) {
    if (spec.kind == TemplateKind::Sphere) {
        const Vec3 d = p - spec.center;
        return dot(d, d) <= spec.radius * spec.radius;
    }
    const Vec3 l = to_local(spec, p);
    const double h = 0.5 * spec.edge;
    if (!in_half_open(l.z, h)) {
        return false;
    }
    if (in_half_open(l.x, h) && in_half_open(l.y, h)) {
        return true;
    }
    if (spec.kind == TemplateKind::Challenge) {
        const double r2 = spec.cylinder_radius * spec.cylinder_radius;
        const double dx = l.x - h;
        const double dy1 = l.y - h;
        const double dy2 = l.y + h;
        return dx * dx + dy1 * dy1 <= r2 || dx * dx + dy2 * dy2 <= r2;
    }
    return false;
}

VoxelGrid make_template(const CraniectomySpec& spec, const GridGeometry& geometry) {
    spec.validate();
    VoxelGrid out(geometry);
    if (rasterize(spec, out) == 0) {
        fail(ErrorCode::OutOfBounds, "craniectomy template lies entirely outside the grid");
    }
    return out;
}

CraniectomySampler::CraniectomySampler(const VoxelGrid& full, SamplerConfig config)
    : geometry_(full.geometry()), config_(config) {
    if (full.empty()) {
        fail(ErrorCode::EmptyMask, "craniectomy sampler: skull mask is empty");
    }
    const auto& mix = config_.template_mix;
    if (std::any_of(mix.begin(), mix.end(), [](double w) { return !(w >= 0.0) || !std::isfinite(w); }) ||
        std::accumulate(mix.begin(), mix.end(), 0.0) <= 0.0) {
        fail(ErrorCode::InvalidArgument, "template_mix must be non-negative with a positive sum");
    }
    if (!(config_.sphere_radius_min > 0.0 && config_.sphere_radius_max >= config_.sphere_radius_min &&
          config_.cube_edge_min > 0.0 && config_.cube_edge_max >= config_.cube_edge_min &&
          config_.cylinder_ratio > 0.0)) {
        fail(ErrorCode::InvalidArgument, "craniectomy size ranges must be positive and ordered");
    }

    // z percentile over all skull voxels via a per-slice histogram.
    const Dims& d = full.dims();
    std::vector<std::int64_t> per_slice(static_cast<std::size_t>(d[2]), 0);
    const std::int64_t plane = d[0] * d[1];
    for (std::int64_t k = 0; k < d[2]; ++k) {
        for (std::int64_t n = k * plane; n < (k + 1) * plane; ++n) {
            per_slice[static_cast<std::size_t>(k)] += full.get(n) ? 1 : 0;
        }
    }
    const std::int64_t total = std::accumulate(per_slice.begin(), per_slice.end(), std::int64_t{0});
    const double rank = config_.upper_percentile / 100.0 * static_cast<double>(total);
    std::int64_t cumulative = 0;
    std::int64_t k_pct = d[2] - 1;
    for (std::int64_t k = 0; k < d[2]; ++k) {
        cumulative += per_slice[static_cast<std::size_t>(k)];
        if (static_cast<double>(cumulative) >= rank) {
            k_pct = k;
            break;
        }
    }
    upper_z_ = geometry_.origin.z + static_cast<double>(k_pct) * geometry_.spacing.z;

    for (std::int64_t n : surface_indices(full)) {
        if (geometry_.unravel(n)[2] > k_pct) {
            candidates_.push_back(n);
        }
    }
    if (candidates_.empty()) {
        fail(ErrorCode::NoUpperSurface, "no skull surface voxel above the upper-region percentile");
    }
    centroid_ = centroid(full);
}

CraniectomySpec CraniectomySampler::draw(std::uint64_t seed) const {
    Rng rng = make_rng(seed);
    std::discrete_distribution<int> kind_dist(config_.template_mix.begin(), config_.template_mix.end());
    std::uniform_int_distribution<std::size_t> pick(0, candidates_.size() - 1);

    CraniectomySpec spec;
    spec.seed = seed;
    spec.kind = static_cast<TemplateKind>(kind_dist(rng));
    spec.center = geometry_.world(geometry_.unravel(candidates_[pick(rng)]));
    const double sphere_r = std::uniform_real_distribution<double>(config_.sphere_radius_min, config_.sphere_radius_max)(rng);
    const double cube_e = std::uniform_real_distribution<double>(config_.cube_edge_min, config_.cube_edge_max)(rng);
    switch (spec.kind) {
    case TemplateKind::Sphere:
        spec.radius = sphere_r;
        break;
    case TemplateKind::Cube:
        spec.edge = cube_e;
        break;
    case TemplateKind::Challenge:
        spec.edge = cube_e;
        spec.cylinder_radius = config_.cylinder_ratio * cube_e;
        // Local +x (the face carrying the cylinders) points away from the
        // skull centroid in the axial plane.
        spec.orientation = std::atan2(spec.center.y - centroid_.y, spec.center.x - centroid_.x);
        break;
    }
    return spec;
}

CraniectomySpec sample_spec(const VoxelGrid& full, std::uint64_t seed, const SamplerConfig& config) {
    return CraniectomySampler(full, config).draw(seed);
}

CaseTriplet apply_craniectomy(const VoxelGrid& full, const CraniectomySpec& spec) {
    spec.validate();
    if (full.empty()) {
        fail(ErrorCode::EmptyMask, "apply_craniectomy: skull mask is empty");
    }
    VoxelGrid tmpl(full.geometry());
    rasterize(spec, tmpl);
    CaseTriplet t;
    t.defect = set_ops(full, tmpl, SetOp::Intersect);
    if (t.defect.empty()) {
        fail(ErrorCode::EmptyDefect, "craniectomy template does not intersect the skull");
    }
    t.defected = set_ops(full, tmpl, SetOp::Subtract);
    t.full = full;
    t.spec = spec;
    return t;
}

VoxelGrid salt_pepper(const VoxelGrid& m, double p, std::uint64_t seed) {
    if (!(p >= 0.0 && p <= 1.0)) {
        fail(ErrorCode::InvalidArgument, "salt_pepper probability must lie in [0, 1]");
    }
    if (p == 0.0) {
        return m;
    }
    if (p == 1.0) {
        return m.complement();
    }
    Rng rng = make_rng(seed);
    std::bernoulli_distribution flip(p);
    VoxelGrid out = m;
    for (std::int64_t n = 0; n < m.size(); ++n) {
        if (flip(rng)) {
            out.set(n, !m.get(n));
        }
    }
    return out;
}

void add_input_noise(CaseTriplet& triplet, double p, std::uint64_t seed) {
    triplet.defected = salt_pepper(triplet.defected, p, seed);
    triplet.noise_applied = p > 0.0;
}

} // namespace craniotk
