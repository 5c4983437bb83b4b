#include "craniotk/phantom.hpp"

#include "craniotk/error.hpp"
#include "craniotk/random.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace craniotk {

namespace {

double quad(Vec3 p, Vec3 s) {
    return (p.x / s.x) * (p.x / s.x) + (p.y / s.y) * (p.y / s.y) + (p.z / s.z) * (p.z / s.z);
}

// Volume of the ellipsoid (a, b, c) above the plane z = z0.
double cap_volume(Vec3 s, double z0) {
    const double c = s.z;
    z0 = std::clamp(z0, -c, c);
    return std::numbers::pi * s.x * s.y * ((c - z0) - (c * c * c - z0 * z0 * z0) / (3.0 * c * c));
}

double truncated_normal(Rng& rng, double sigma) {
    if (sigma <= 0.0) {
        return 0.0;
    }
    std::normal_distribution<double> nd(0.0, 1.0);
    double z = nd(rng);
    while (std::abs(z) > 2.0) {
        z = nd(rng);
    }
    return sigma * z;
}

} // namespace

void PhantomSpec::validate() const {
    const Vec3& s = outer_semiaxes;
    if (!(thickness > 0.0) || !(s.x > thickness) || !(s.y > thickness) || !(s.z > thickness)) {
        fail(ErrorCode::InvalidArgument, "phantom requires semiaxes > thickness > 0");
    }
    if (!(base_cut_fraction >= 0.0 && base_cut_fraction < 0.5)) {
        fail(ErrorCode::InvalidArgument, "phantom base_cut_fraction must lie in [0, 0.5)");
    }
}

bool phantom_contains(const PhantomSpec& spec, Vec3 p) {
    if (p.z < spec.cut_height()) {
        return false;
    }
    const Vec3& s = spec.outer_semiaxes;
    if (quad(p, s) > 1.0) {
        return false;
    }
    const Vec3 inner{s.x - spec.thickness, s.y - spec.thickness, s.z - spec.thickness};
    return quad(p, inner) > 1.0;
}

double phantom_volume(const PhantomSpec& spec) {
    const Vec3& s = spec.outer_semiaxes;
    const Vec3 inner{s.x - spec.thickness, s.y - spec.thickness, s.z - spec.thickness};
    const double z0 = spec.cut_height();
    return cap_volume(s, z0) - cap_volume(inner, z0);
}

VoxelGrid generate_phantom(const PhantomSpec& spec, const GridGeometry& geometry) {
    spec.validate();
    const Vec3& s = spec.outer_semiaxes;

    // Exact world-axis extent of the posed outer ellipsoid (the base cut only
    // shrinks it), checked against the span of voxel centers.
    const Mat3 r = spec.pose.rotation();
    const Vec3 c = spec.pose.translation();
    Vec3 lo{};
    Vec3 hi{};
    for (int a = 0; a < 3; ++a) {
        const double half = std::sqrt(r[a][0] * r[a][0] * s.x * s.x + r[a][1] * r[a][1] * s.y * s.y +
                                      r[a][2] * r[a][2] * s.z * s.z);
        lo[a] = c[a] - half;
        hi[a] = c[a] + half;
    }
    Index3 ilo{};
    Index3 ihi{};
    for (int a = 0; a < 3; ++a) {
        const double first = geometry.origin[a];
        const double last = geometry.origin[a] + static_cast<double>(geometry.dims[a] - 1) * geometry.spacing[a];
        if (lo[a] < first || hi[a] > last) {
            fail(ErrorCode::OutOfBounds, "phantom does not fit inside the grid");
        }
        ilo[a] = static_cast<std::int64_t>(std::floor((lo[a] - first) / geometry.spacing[a]));
        ihi[a] = std::min<std::int64_t>(geometry.dims[a] - 1,
                                        static_cast<std::int64_t>(std::ceil((hi[a] - first) / geometry.spacing[a])));
    }

    const RigidTransform to_canonical = spec.pose.inverse();
    VoxelGrid out(geometry);
    for (std::int64_t k = ilo[2]; k <= ihi[2]; ++k) {
        for (std::int64_t j = ilo[1]; j <= ihi[1]; ++j) {
            for (std::int64_t i = ilo[0]; i <= ihi[0]; ++i) {
                if (phantom_contains(spec, to_canonical.apply(geometry.world(i, j, k)))) {
                    out.set(i, j, k);
                }
            }
        }
    }
    return out;
}

GridGeometry phantom_geometry(const PhantomSpec& spec, Vec3 spacing, double margin_mm) {
    const Vec3& s = spec.outer_semiaxes;
    const double radius = std::max({s.x, s.y, s.z}) + margin_mm;
    const Vec3 center = spec.pose.translation();
    Dims dims{};
    for (int a = 0; a < 3; ++a) {
        dims[a] = 2 * static_cast<std::int64_t>(std::ceil(radius / spacing[a])) + 1;
    }
    return GridGeometry::centered(dims, spacing, center);
}

std::vector<PhantomSpec> sample_population(int n, std::uint64_t seed, const PopulationVariability& var,
                                           const PhantomSpec& base) {
    if (n < 1) {
        fail(ErrorCode::InvalidArgument, "sample_population requires n >= 1");
    }
    base.validate();
    constexpr double deg = std::numbers::pi / 180.0;
    std::vector<PhantomSpec> out;
    out.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const std::uint64_t case_seed = derive_seed(seed, static_cast<std::uint64_t>(i));
        Rng rng(case_seed);
        PhantomSpec spec = base;
        spec.seed = case_seed;
        for (int attempt = 0;; ++attempt) {
            spec.outer_semiaxes = {base.outer_semiaxes.x + truncated_normal(rng, var.semiaxes_mm.x),
                                   base.outer_semiaxes.y + truncated_normal(rng, var.semiaxes_mm.y),
                                   base.outer_semiaxes.z + truncated_normal(rng, var.semiaxes_mm.z)};
            spec.thickness = base.thickness + truncated_normal(rng, var.thickness_mm);
            const Vec3 angles{truncated_normal(rng, var.rotation_deg) * deg, truncated_normal(rng, var.rotation_deg) * deg,
                              truncated_normal(rng, var.rotation_deg) * deg};
            const Vec3 shift{truncated_normal(rng, var.translation_mm), truncated_normal(rng, var.translation_mm),
                             truncated_normal(rng, var.translation_mm)};
            spec.pose = RigidTransform::from_euler_zyx(angles, shift) * base.pose;
            try {
                spec.validate();
                break;
            } catch (const Error&) {
                if (attempt > 100) {
                    throw;
                }
            }
        }
        out.push_back(spec);
    }
    return out;
}

} // namespace craniotk
