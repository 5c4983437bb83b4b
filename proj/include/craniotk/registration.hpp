#pragma once

#include "craniotk/error.hpp"
#include "craniotk/geometry.hpp"
#include "craniotk/volume.hpp"

#include <array>
#include <memory>
#include <vector>

namespace craniotk {

/// Atlas common space lattice. The default is the 304 x 304 x 224 grid at
/// 0.695 x 0.695 x 0.715 mm; the origin is chosen when the atlas is built.
struct CommonGridSpec {
    Dims dims{304, 304, 224};
    Vec3 spacing{0.695, 0.695, 0.715};

    /// Grid whose center voxel sits at `center` (the atlas centroid).
    GridGeometry centered_on(Vec3 center) const { return GridGeometry::centered(dims, spacing, center); }
};

struct RegistrationOptions {
    /// Signed distances are clamped to +-band_mm; only moving samples inside
    /// the band enter the objective.
    double band_mm = 20.0;
    /// Downsampling factor per pyramid level, coarse to fine.
    std::vector<int> pyramid{4, 2, 1};
    int max_iterations = 200;
    /// Stop when the simplex objective spread falls below this (mm).
    double tolerance = 1e-5;
    /// Deterministic stride subsampling cap on moving samples per level.
    int max_samples = 30000;
    /// Initial simplex steps at factor-1 resolution; scaled by the level factor.
    double rotation_step_deg = 2.0;
    double translation_step_mm = 2.0;
    /// Centroid + principal-axes initialisation; identity start when false.
    bool moment_init = true;

    void validate() const;
};

struct RegistrationResult {
    /// Maps moving world coordinates onto fixed world coordinates.
    RigidTransform transform;
    /// Similarity at `transform` and at the initialisation, both measured on
    /// the finest pyramid level (higher is better, <= 0).
    double objective = 0.0;
    double initial_objective = 0.0;
    RigidTransform initial_transform;
    int iterations = 0;
    /// False when the last level hit the iteration cap while still improving
    /// by more than the tolerance; `transform` is then the best-so-far.
    bool converged = true;
};

/// Preprocessed fixed mask: clamped signed-distance pyramid plus moments.
/// Build once and reuse when many masks register to the same target.
class RegistrationTarget {
public:
    /// Throws EmptyInput for an empty mask.
    RegistrationTarget(const VoxelGrid& fixed, const RegistrationOptions& options = {});
    ~RegistrationTarget();
    RegistrationTarget(RegistrationTarget&&) noexcept;
    RegistrationTarget& operator=(RegistrationTarget&&) noexcept;

    const GridGeometry& geometry() const;
    const RegistrationOptions& options() const;

    struct Impl;
    const Impl& impl() const { return *impl_; }

private:
    std::unique_ptr<Impl> impl_;
};

/// Rigid alignment of `moving` onto the target: derivative-free simplex
/// search over intrinsic z-y-x Euler angles and translation, coarse to fine,
/// maximising the negative mean absolute difference of band-limited signed
/// distance maps. Throws EmptyInput for an empty moving mask.
RegistrationResult register_rigid(const VoxelGrid& moving, const RegistrationTarget& target);
RegistrationResult register_rigid(const VoxelGrid& moving, const VoxelGrid& fixed,
                                  const RegistrationOptions& options = {});

/// Similarity of `moving` under `transform` on the given pyramid level
/// (index into options.pyramid; -1 = finest).
double registration_objective(const VoxelGrid& moving, const RegistrationTarget& target,
                              const RigidTransform& transform, int level = -1);

/// Thrown by require_converged(); carries the best-so-far result.
class NonConvergenceError : public Error {
public:
    explicit NonConvergenceError(RegistrationResult result)
        : Error(ErrorCode::NonConvergence, "registration hit the iteration cap while still improving"),
          result_(result) {}
    const RegistrationResult& result() const { return result_; }

private:
    RegistrationResult result_;
};

inline const RegistrationResult& require_converged(const RegistrationResult& r) {
    if (!r.converged) {
        throw NonConvergenceError(r);
    }
    return r;
}

/// Maps m's world frame onto one with the centroid at the origin and the
/// principal axes along x, y, z. Among the axis assignments and signs, the
/// one whose rotation is closest to identity wins. Throws EmptyInput.
RigidTransform principal_frame(const VoxelGrid& m);

enum class Interpolation { Nearest, TrilinearThreshold };

/// Output voxel v is the source sampled at transform^-1(world(v)); samples
/// outside the source grid are background.
VoxelGrid resample(const VoxelGrid& m, const RigidTransform& transform, const GridGeometry& target,
                   Interpolation interp = Interpolation::Nearest);

/// Brings a common-space prediction back to the original image grid:
/// nearest-neighbour resampling through transform^-1, where `transform`
/// is the original-to-common map returned by registration.
VoxelGrid map_back(const VoxelGrid& prediction, const RigidTransform& transform,
                   const GridGeometry& original_geometry);

} // namespace craniotk
