#pragma once

#include "craniotk/geometry.hpp"
#include "craniotk/volume.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace craniotk {

enum class TemplateKind { Sphere = 0, Cube = 1, Challenge = 2 };

std::string_view to_string(TemplateKind kind);
TemplateKind template_kind_from_string(std::string_view name);

/// One simulated flap. Sizes are in mm; `orientation` is a rotation about the
/// world z axis (radians) applied to the cube and challenge templates.
///
/// The challenge template is the cube unioned with two solid vertical
/// cylinders of `cylinder_radius` whose axes run along the two vertical edges
/// of the cube's local +x face, spanning the cube's height.
struct CraniectomySpec {
    TemplateKind kind = TemplateKind::Sphere;
    double radius = 20.0;          // sphere
    double edge = 40.0;            // cube and challenge
    double cylinder_radius = 20.0; // challenge
    Vec3 center{};
    double orientation = 0.0;
    std::uint64_t seed = 0;

    void validate() const;
};

/// Solid template mask rasterised by voxel-center membership. Cube
/// membership is half-open, [-edge/2, edge/2) per local axis, so a cube
/// centered on a voxel center covers exactly (edge/spacing)^3 centers.
/// Throws OutOfBounds when no voxel center is covered.
VoxelGrid make_template(const CraniectomySpec& spec, const GridGeometry& geometry);

bool template_contains(const CraniectomySpec& spec, Vec3 world_point);

struct SamplerConfig {
    std::array<double, 3> template_mix{1.0, 1.0, 1.0}; // sphere, cube, challenge
    double upper_percentile = 60.0;
    double sphere_radius_min = 10.0;
    double sphere_radius_max = 40.0;
    double cube_edge_min = 20.0;
    double cube_edge_max = 60.0;
    /// Challenge cylinder radius as a fraction of the cube edge.
    double cylinder_ratio = 0.5;
};

/// Precomputes the candidate flap centers of one skull (surface voxels above
/// the configured z percentile) so that many specs can be drawn cheaply.
class CraniectomySampler {
public:
    /// Throws EmptyMask for an empty skull, NoUpperSurface when no surface
    /// voxel lies above the percentile.
    CraniectomySampler(const VoxelGrid& full, SamplerConfig config = {});

    CraniectomySpec draw(std::uint64_t seed) const;

    const std::vector<std::int64_t>& candidates() const { return candidates_; }
    double upper_z() const { return upper_z_; }

private:
    GridGeometry geometry_;
    SamplerConfig config_;
    std::vector<std::int64_t> candidates_;
    Vec3 centroid_{};
    double upper_z_ = 0.0;
};

CraniectomySpec sample_spec(const VoxelGrid& full, std::uint64_t seed, const SamplerConfig& config = {});

/// (X^full, X^defected, Y). `spec` is empty for organiser-provided cases.
struct CaseTriplet {
    VoxelGrid full;
    VoxelGrid defected;
    VoxelGrid defect;
    std::optional<CraniectomySpec> spec;
    bool noise_applied = false;
};

/// defect = full ∩ template, defected = full ∖ template.
/// Throws EmptyMask for an empty skull and EmptyDefect when the template
/// misses the skull.
CaseTriplet apply_craniectomy(const VoxelGrid& full, const CraniectomySpec& spec);

/// Flips every voxel independently with probability p.
VoxelGrid salt_pepper(const VoxelGrid& m, double p, std::uint64_t seed);

/// Applies salt_pepper to the model input (defected) only; the ground-truth
/// defect and the full skull are never touched.
void add_input_noise(CaseTriplet& triplet, double p, std::uint64_t seed);

} // namespace craniotk
