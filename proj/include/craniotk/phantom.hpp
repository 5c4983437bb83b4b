#pragma once

#include "craniotk/geometry.hpp"
#include "craniotk/volume.hpp"

#include <cstdint>
#include <vector>

namespace craniotk {

/// Synthetic skull: an ellipsoidal shell with the bottom cut off, placed in
/// the world by `pose`. The canonical shell is centered on the world origin
/// with its semiaxes along x (left-right), y (anterior-posterior) and z
/// (inferior-superior).
struct PhantomSpec {
    Vec3 outer_semiaxes{70.0, 90.0, 65.0};
    double thickness = 6.0;
    double base_cut_fraction = 0.25;
    RigidTransform pose;
    std::uint64_t seed = 0;

    /// Throws InvalidArgument when a,b,c > thickness > 0 or
    /// 0 <= base_cut_fraction < 0.5 is violated.
    void validate() const;

    /// World z of the cut plane in the canonical frame.
    double cut_height() const { return -outer_semiaxes.z + 2.0 * base_cut_fraction * outer_semiaxes.z; }
};

/// Canonical-frame membership test used by the rasteriser.
bool phantom_contains(const PhantomSpec& spec, Vec3 canonical_point);

/// Analytic shell volume (mm^3) above the base cut.
double phantom_volume(const PhantomSpec& spec);

/// Rasterises by voxel-center membership. Throws OutOfBounds when the posed
/// shell is not contained in the grid.
VoxelGrid generate_phantom(const PhantomSpec& spec, const GridGeometry& geometry);

/// Grid centered on the pose translation that holds a phantom of `spec` under any
/// rotation, with `margin_mm` to spare.
GridGeometry phantom_geometry(const PhantomSpec& spec, Vec3 spacing, double margin_mm = 10.0);

/// Standard deviations of the population jitter. Draws are truncated at
/// +-2 sigma and re-drawn if they would break the PhantomSpec invariants.
struct PopulationVariability {
    Vec3 semiaxes_mm{4.0, 4.0, 3.0};
    double thickness_mm = 0.8;
    double rotation_deg = 3.0;
    double translation_mm = 3.0;

    static PopulationVariability none() { return {{0, 0, 0}, 0, 0, 0}; }
};

std::vector<PhantomSpec> sample_population(int n, std::uint64_t seed,
                                           const PopulationVariability& variability = {},
                                           const PhantomSpec& base = {});

} // namespace craniotk
