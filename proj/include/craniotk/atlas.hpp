#pragma once

#include "craniotk/registration.hpp"
#include "craniotk/volume.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace craniotk {

/// Mean shape of registered full skulls in the common space.
struct Atlas {
    /// Mean occupancy in [0, 1].
    ScalarGrid average;
    /// threshold(average, threshold).
    VoxelGrid binary;
    double threshold = 0.5;
    /// Registration rounds after the reference round.
    int iterations = 0;
    std::vector<std::string> case_ids;
    /// Mean Dice between each round's binary and the inputs resampled in that
    /// round; entry 0 is the reference round. Empty for a loaded atlas.
    std::vector<double> round_dice;
    /// Cases excluded because their registration threw, per round.
    std::vector<std::vector<std::string>> failed_cases;

    const GridGeometry& geometry() const { return binary.geometry(); }
};

struct AtlasOptions {
    double threshold = 0.5;
    /// Refinement rounds after the reference round.
    int iterations = 2;
    CommonGridSpec grid;
    /// Common space = the reference skull's principal-axes frame (centroid
    /// at the origin), so the grid mid-plane x = (nx - 1) / 2 is its
    /// left-right symmetry plane. When false, the reference's own world
    /// frame is kept.
    bool canonical_frame = true;
    /// Explicit common grid; by default `grid` centered on the reference
    /// skull's centroid.
    std::optional<GridGeometry> geometry;
    RegistrationOptions registration;
    int threads = 1;
};

/// Round 0 registers every input to the first one; each later round
/// registers the inputs to the previous round's binary. Inputs are resampled
/// onto the common grid (trilinear, thresholded at 0.5) and averaged.
/// Errors: InvalidArgument (< 2 inputs, bad threshold or id count),
/// EmptyInput, RegistrationFailed when more than half the cases fail in a round.
Atlas build_atlas(const std::vector<VoxelGrid>& fulls, const AtlasOptions& options = {},
                  std::vector<std::string> case_ids = {});

/// Model input channels: (defected, atlas binary). Throws GeometryMismatch.
std::pair<VoxelGrid, VoxelGrid> prior_channel(const VoxelGrid& defected_registered, const Atlas& atlas);

/// Writes DIR/atlas_average.nii.gz, DIR/atlas_binary.nii.gz and DIR/atlas.meta
/// (key=value lines).
void save_atlas(const Atlas& atlas, const std::filesystem::path& dir);
/// Throws SchemaViolation when the metadata disagrees with the volumes.
Atlas load_atlas(const std::filesystem::path& dir);

} // namespace craniotk
