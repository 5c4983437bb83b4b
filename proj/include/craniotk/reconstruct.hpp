#pragma once

#include "craniotk/atlas.hpp"
#include "craniotk/geometry.hpp"
#include "craniotk/volume.hpp"

namespace craniotk {

struct PostprocessOptions {
    double close_radius_mm = 1.5;
    /// Components that come no closer than this to the defected skull's
    /// surface are dropped.
    double max_distance_mm = 10.0;
    /// Cleanup repeats until nothing changes, at most this many passes.
    int max_passes = 8;
};

/// close -> remove existing bone -> largest 26-connected component ->
/// distance gate, repeated to a fixpoint. The output never overlaps
/// `defected`. An empty `defected` disables the distance gate.
VoxelGrid postprocess(const VoxelGrid& raw, const VoxelGrid& defected, const PostprocessOptions& options = {});

struct Reconstruction {
    VoxelGrid prediction;
    /// Set when nothing survived; callers report it as a warning.
    bool empty_prediction = false;
};

/// Atlas minus the defected skull. `to_common` maps the defected skull's
/// world frame onto the atlas (identity when it is already registered).
/// The prediction lives on the atlas grid and is a subset of atlas.binary.
Reconstruction atlas_subtract(const VoxelGrid& defected, const Atlas& atlas, const RigidTransform& to_common,
                              const PostprocessOptions& options = {});

/// Mirror about the grid mid-plane x = (nx - 1) / 2 minus the defected skull.
Reconstruction mirror_reconstruct(const VoxelGrid& defected, const PostprocessOptions& options = {});

} // namespace craniotk
