#pragma once

#include "craniotk/geometry.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace craniotk {

/// Dense bit-packed binary mask on an axis-aligned grid.
class VoxelGrid {
public:
    VoxelGrid() = default;
    explicit VoxelGrid(const GridGeometry& geometry);

    const GridGeometry& geometry() const { return geometry_; }
    const Dims& dims() const { return geometry_.dims; }
    std::int64_t size() const { return geometry_.voxel_count(); }

    bool get(std::int64_t n) const { return (words_[n >> 6] >> (n & 63)) & 1u; }
    bool get(std::int64_t i, std::int64_t j, std::int64_t k) const { return get(geometry_.linear(i, j, k)); }
    bool get(const Index3& v) const { return get(v[0], v[1], v[2]); }

    void set(std::int64_t n, bool on = true) {
        const std::uint64_t bit = std::uint64_t{1} << (n & 63);
        if (on) {
            words_[n >> 6] |= bit;
        } else {
            words_[n >> 6] &= ~bit;
        }
    }
    void set(std::int64_t i, std::int64_t j, std::int64_t k, bool on = true) { set(geometry_.linear(i, j, k), on); }

    std::int64_t count() const;
    bool empty() const;

    /// Raw storage; bits past size() are always zero.
    std::span<const std::uint64_t> words() const { return words_; }
    std::span<std::uint64_t> words() { return words_; }

    /// Same geometry, every voxel flipped.
    VoxelGrid complement() const;

    friend bool operator==(const VoxelGrid& a, const VoxelGrid& b);

private:
    void clear_tail();

    GridGeometry geometry_;
    std::vector<std::uint64_t> words_;
};

/// Real-valued samples with the same lattice semantics as VoxelGrid.
class ScalarGrid {
public:
    ScalarGrid() = default;
    explicit ScalarGrid(const GridGeometry& geometry, double fill = 0.0);

    const GridGeometry& geometry() const { return geometry_; }
    std::int64_t size() const { return geometry_.voxel_count(); }

    double operator[](std::int64_t n) const { return values_[static_cast<std::size_t>(n)]; }
    double& operator[](std::int64_t n) { return values_[static_cast<std::size_t>(n)]; }
    double at(std::int64_t i, std::int64_t j, std::int64_t k) const { return (*this)[geometry_.linear(i, j, k)]; }

    std::span<const double> values() const { return values_; }
    std::span<double> values() { return values_; }

private:
    GridGeometry geometry_;
    std::vector<double> values_;
};

/// Inclusive-exclusive index box [lo, hi).
struct Box {
    Index3 lo{0, 0, 0};
    Index3 hi{0, 0, 0};

    bool empty() const { return hi[0] <= lo[0] || hi[1] <= lo[1] || hi[2] <= lo[2]; }
    Dims extent() const { return {hi[0] - lo[0], hi[1] - lo[1], hi[2] - lo[2]}; }

    /// Grow by `margin` voxels per axis, clipped to `dims`.
    Box expanded(const Index3& margin, const Dims& dims) const;
};

/// Tight box around set voxels; nullopt for an empty mask.
std::optional<Box> bounding_box(const VoxelGrid& m);

/// Voxel = 1 iff value >= t.
VoxelGrid threshold(const ScalarGrid& g, double t);

/// Set voxels with at least one in-grid face neighbour unset.
VoxelGrid surface(const VoxelGrid& m);

/// Linear indices of surface(m), ascending.
std::vector<std::int64_t> surface_indices(const VoxelGrid& m);

/// Exact squared Euclidean distance (mm^2) from every voxel of a dense box to
/// the nearest seed voxel, anisotropic spacing honoured. Seeds are nonzero
/// entries of `seeds` (x fastest). Voxels with no seed get +infinity.
std::vector<double> squared_edt(std::span<const std::uint8_t> seeds, const Dims& dims, Vec3 spacing);

/// Distance in mm to the face-adjacency surface of m; negative inside,
/// positive outside, 0 on surface voxels.
/// Throws EmptyMask / FullMask when no surface exists.
ScalarGrid signed_distance(const VoxelGrid& m);

enum class MorphOp { Dilate, Erode, Close, Open };

/// Binary morphology with the discrete ball {d : |d * spacing| <= radius_mm}.
/// The grid border is neutral: erosion never eats in from outside the grid.
VoxelGrid morph(const VoxelGrid& m, MorphOp op, double radius_mm);

enum class Connectivity { Face6 = 6, Full26 = 26 };

/// Connected-component labels (0 = background, 1.. in raster order of each
/// component's first voxel) and component sizes (index 0 unused).
struct Components {
    std::vector<std::uint32_t> labels;
    std::vector<std::int64_t> sizes;
};

Components label_components(const VoxelGrid& m, Connectivity connectivity);

/// Only the largest component; ties go to the component whose first voxel
/// has the lowest linear index.
VoxelGrid largest_component(const VoxelGrid& m, Connectivity connectivity);

/// Number of connected components.
std::int64_t component_count(const VoxelGrid& m, Connectivity connectivity);

enum class SetOp { Union, Intersect, Subtract, Xor };

/// Throws GeometryMismatch unless the grids share geometry.
VoxelGrid set_ops(const VoxelGrid& a, const VoxelGrid& b, SetOp op);

/// a ⊆ b (same geometry required).
bool is_subset(const VoxelGrid& a, const VoxelGrid& b);

/// Reflection i -> nx - 1 - i about the grid mid-plane.
VoxelGrid mirror_x(const VoxelGrid& m);

/// Mean world position of set voxels. Throws EmptyMask.
Vec3 centroid(const VoxelGrid& m);

} // namespace craniotk
