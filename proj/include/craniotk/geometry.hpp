#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace craniotk {

struct Vec3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    constexpr double operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }
    constexpr double& operator[](int i) { return i == 0 ? x : (i == 1 ? y : z); }

    friend constexpr Vec3 operator+(Vec3 a, Vec3 b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
    friend constexpr Vec3 operator-(Vec3 a, Vec3 b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
    friend constexpr Vec3 operator*(double s, Vec3 a) { return {s * a.x, s * a.y, s * a.z}; }
    friend constexpr bool operator==(Vec3 a, Vec3 b) = default;
};

constexpr double dot(Vec3 a, Vec3 b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline double norm(Vec3 a) { return std::sqrt(dot(a, a)); }
constexpr Vec3 hadamard(Vec3 a, Vec3 b) { return {a.x * b.x, a.y * b.y, a.z * b.z}; }

using Dims = std::array<std::int64_t, 3>;

/// Integer voxel index (i, j, k) along (x, y, z).
using Index3 = std::array<std::int64_t, 3>;

/// Axis-aligned lattice placement. Voxel (i,j,k) has its center at
/// origin + (i,j,k) * spacing in world millimetres; x varies fastest in
/// linear storage.
struct GridGeometry {
    Dims dims{1, 1, 1};
    Vec3 spacing{1.0, 1.0, 1.0};
    Vec3 origin{};

    std::int64_t voxel_count() const { return dims[0] * dims[1] * dims[2]; }

    std::int64_t linear(std::int64_t i, std::int64_t j, std::int64_t k) const {
        return i + dims[0] * (j + dims[1] * k);
    }

    Index3 unravel(std::int64_t n) const {
        const std::int64_t i = n % dims[0];
        const std::int64_t rest = n / dims[0];
        return {i, rest % dims[1], rest / dims[1]};
    }

    Vec3 world(std::int64_t i, std::int64_t j, std::int64_t k) const {
        return {origin.x + static_cast<double>(i) * spacing.x,
                origin.y + static_cast<double>(j) * spacing.y,
                origin.z + static_cast<double>(k) * spacing.z};
    }

    Vec3 world(const Index3& v) const { return world(v[0], v[1], v[2]); }

    /// Fractional index of a world point (inverse of world()).
    Vec3 continuous_index(Vec3 p) const {
        return {(p.x - origin.x) / spacing.x, (p.y - origin.y) / spacing.y,
                (p.z - origin.z) / spacing.z};
    }

    /// Nearest voxel index; may lie outside the grid.
    Index3 index(Vec3 p) const {
        const Vec3 c = continuous_index(p);
        return {std::llround(c.x), std::llround(c.y), std::llround(c.z)};
    }

    bool contains(const Index3& v) const {
        return v[0] >= 0 && v[1] >= 0 && v[2] >= 0 && v[0] < dims[0] && v[1] < dims[1] &&
               v[2] < dims[2];
    }

    /// Throws InvalidArgument unless dims >= 1 and spacing > 0 (finite).
    void validate() const;

    /// Grid of the given dims/spacing whose center voxel sits at `center`.
    static GridGeometry centered(Dims dims, Vec3 spacing, Vec3 center);
};

/// Exact on dims, 1e-9 mm on spacing and origin.
bool same_geometry(const GridGeometry& a, const GridGeometry& b, double tol = 1e-9);

using Mat3 = std::array<std::array<double, 3>, 3>;

Mat3 mat_mul(const Mat3& a, const Mat3& b);
Mat3 transpose(const Mat3& a);
Vec3 mat_vec(const Mat3& a, Vec3 v);
double determinant(const Mat3& a);

/// Rotation for intrinsic z-y-x Euler angles (radians): R = Rz(yaw) Ry(pitch) Rx(roll).
Mat3 rotation_zyx(double yaw, double pitch, double roll);

/// Inverse of rotation_zyx; returns (yaw, pitch, roll).
Vec3 euler_zyx(const Mat3& r);

/// Angle in radians of the rotation encoded by `r`.
double rotation_angle(const Mat3& r);

/// World-coordinate rigid map x -> R x + t, stored as a row-major 4x4
/// homogeneous matrix.
class RigidTransform {
public:
    RigidTransform() = default;
    RigidTransform(const Mat3& rotation, Vec3 translation);

    static RigidTransform identity() { return {}; }
    static RigidTransform translation(Vec3 t) { return {identity_rotation(), t}; }

    /// Intrinsic z-y-x Euler angles in radians, rotating about `center`,
    /// followed by `shift`.
    static RigidTransform from_euler_zyx(Vec3 yaw_pitch_roll, Vec3 shift, Vec3 center = {});

    /// Validates orthonormality (tolerance 1e-6), det +1 and the last row.
    static RigidTransform from_matrix(const std::array<double, 16>& row_major);

    Mat3 rotation() const;
    Vec3 translation() const { return {m_[3], m_[7], m_[11]}; }
    const std::array<double, 16>& matrix() const { return m_; }

    Vec3 apply(Vec3 p) const {
        return {m_[0] * p.x + m_[1] * p.y + m_[2] * p.z + m_[3],
                m_[4] * p.x + m_[5] * p.y + m_[6] * p.z + m_[7],
                m_[8] * p.x + m_[9] * p.y + m_[10] * p.z + m_[11]};
    }

    RigidTransform inverse() const;

    /// (a * b)(x) = a(b(x)).
    friend RigidTransform operator*(const RigidTransform& a, const RigidTransform& b);

    static Mat3 identity_rotation() { return {{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}}; }

private:
    std::array<double, 16> m_{1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1};
};

/// Largest absolute entry-wise difference of the two matrices.
double max_abs_difference(const RigidTransform& a, const RigidTransform& b);

} // namespace craniotk
