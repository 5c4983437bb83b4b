#include "craniotk/geometry.hpp"

#include "craniotk/error.hpp"

#include <algorithm>
#include <string>

namespace craniotk {

void GridGeometry::validate() const {
    for (int a = 0; a < 3; ++a) {
        if (dims[a] < 1) {
            fail(ErrorCode::InvalidArgument, "grid dims must be >= 1 (axis " + std::to_string(a) + ")");
        }
        if (!(spacing[a] > 0.0) || !std::isfinite(spacing[a])) {
            fail(ErrorCode::InvalidArgument, "grid spacing must be finite and > 0 (axis " + std::to_string(a) + ")");
        }
        if (!std::isfinite(origin[a])) {
            fail(ErrorCode::InvalidArgument, "grid origin must be finite");
        }
    }
}

GridGeometry GridGeometry::centered(Dims dims, Vec3 spacing, Vec3 center) {
    GridGeometry g;
    g.dims = dims;
    g.spacing = spacing;
    for (int a = 0; a < 3; ++a) {
        g.origin[a] = center[a] - 0.5 * static_cast<double>(dims[a] - 1) * spacing[a];
    }
    g.validate();
    return g;
}

bool same_geometry(const GridGeometry& a, const GridGeometry& b, double tol) {
    if (a.dims != b.dims) {
        return false;
    }
    for (int i = 0; i < 3; ++i) {
        if (std::abs(a.spacing[i] - b.spacing[i]) > tol || std::abs(a.origin[i] - b.origin[i]) > tol) {
            return false;
        }
    }
    return true;
}

Mat3 mat_mul(const Mat3& a, const Mat3& b) {
    Mat3 r{};
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
            r[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j] + a[i][2] * b[2][j];
        }
    }
    return r;
}

Mat3 transpose(const Mat3& a) {
    Mat3 r{};
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
            r[i][j] = a[j][i];
        }
    }
    return r;
}

Vec3 mat_vec(const Mat3& a, Vec3 v) {
    return {a[0][0] * v.x + a[0][1] * v.y + a[0][2] * v.z,
            a[1][0] * v.x + a[1][1] * v.y + a[1][2] * v.z,
            a[2][0] * v.x + a[2][1] * v.y + a[2][2] * v.z};
}

double determinant(const Mat3& a) {
    return a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) -
           a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0]) +
           a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0]);
}

Mat3 rotation_zyx(double yaw, double pitch, double roll) {
    const double ca = std::cos(yaw), sa = std::sin(yaw);
    const double cb = std::cos(pitch), sb = std::sin(pitch);
    const double cc = std::cos(roll), sc = std::sin(roll);
    const Mat3 rz{{{ca, -sa, 0}, {sa, ca, 0}, {0, 0, 1}}};
    const Mat3 ry{{{cb, 0, sb}, {0, 1, 0}, {-sb, 0, cb}}};
    const Mat3 rx{{{1, 0, 0}, {0, cc, -sc}, {0, sc, cc}}};
    return mat_mul(rz, mat_mul(ry, rx));
}

Vec3 euler_zyx(const Mat3& r) {
    const double pitch = std::asin(std::clamp(-r[2][0], -1.0, 1.0));
    double yaw = 0.0;
    double roll = 0.0;
    if (std::abs(std::cos(pitch)) > 1e-12) {
        yaw = std::atan2(r[1][0], r[0][0]);
        roll = std::atan2(r[2][1], r[2][2]);
    } else {
        // Gimbal lock: only yaw - roll (or yaw + roll) is observable.
        yaw = std::atan2(-r[0][1], r[1][1]);
    }
    return {yaw, pitch, roll};
}

double rotation_angle(const Mat3& r) {
    const double sx = 0.5 * (r[2][1] - r[1][2]);
    const double sy = 0.5 * (r[0][2] - r[2][0]);
    const double sz = 0.5 * (r[1][0] - r[0][1]);
    const double c = 0.5 * (r[0][0] + r[1][1] + r[2][2] - 1.0);
    return std::atan2(std::sqrt(sx * sx + sy * sy + sz * sz), c);
}

RigidTransform::RigidTransform(const Mat3& rotation, Vec3 translation) {
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
            m_[4 * i + j] = rotation[i][j];
        }
    }
    m_[3] = translation.x;
    m_[7] = translation.y;
    m_[11] = translation.z;
    m_[12] = m_[13] = m_[14] = 0.0;
    m_[15] = 1.0;
}

RigidTransform RigidTransform::from_euler_zyx(Vec3 yaw_pitch_roll, Vec3 shift, Vec3 center) {
    const Mat3 r = rotation_zyx(yaw_pitch_roll.x, yaw_pitch_roll.y, yaw_pitch_roll.z);
    // x -> R (x - c) + c + shift
    return {r, center - mat_vec(r, center) + shift};
}

RigidTransform RigidTransform::from_matrix(const std::array<double, 16>& m) {
    for (double v : m) {
        if (!std::isfinite(v)) {
            fail(ErrorCode::InvalidArgument, "transform matrix has non-finite entries");
        }
    }
    if (std::abs(m[12]) > 1e-6 || std::abs(m[13]) > 1e-6 || std::abs(m[14]) > 1e-6 ||
        std::abs(m[15] - 1.0) > 1e-6) {
        fail(ErrorCode::InvalidArgument, "transform last row must be (0, 0, 0, 1)");
    }
    Mat3 r{};
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
            r[i][j] = m[4 * i + j];
        }
    }
    const Mat3 rtr = mat_mul(transpose(r), r);
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
            if (std::abs(rtr[i][j] - (i == j ? 1.0 : 0.0)) > 1e-6) {
                fail(ErrorCode::InvalidArgument, "transform rotation block is not orthonormal");
            }
        }
    }
    if (std::abs(determinant(r) - 1.0) > 1e-6) {
        fail(ErrorCode::InvalidArgument, "transform rotation block must have determinant +1");
    }
    RigidTransform t;
    t.m_ = m;
    t.m_[12] = t.m_[13] = t.m_[14] = 0.0;
    t.m_[15] = 1.0;
    return t;
}

Mat3 RigidTransform::rotation() const {
    return {{{m_[0], m_[1], m_[2]}, {m_[4], m_[5], m_[6]}, {m_[8], m_[9], m_[10]}}};
}

RigidTransform RigidTransform::inverse() const {
    const Mat3 rt = transpose(rotation());
    const Vec3 t = mat_vec(rt, translation());
    return {rt, Vec3{-t.x, -t.y, -t.z}};
}

RigidTransform operator*(const RigidTransform& a, const RigidTransform& b) {
    const Mat3 r = mat_mul(a.rotation(), b.rotation());
    return {r, mat_vec(a.rotation(), b.translation()) + a.translation()};
}

double max_abs_difference(const RigidTransform& a, const RigidTransform& b) {
    double d = 0.0;
    for (std::size_t i = 0; i < 16; ++i) {
        d = std::max(d, std::abs(a.matrix()[i] - b.matrix()[i]));
    }
    return d;
}

std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::GeometryMismatch: return "GeometryMismatch";
    case ErrorCode::EmptyMask: return "EmptyMask";
    case ErrorCode::FullMask: return "FullMask";
    case ErrorCode::OutOfBounds: return "OutOfBounds";
    case ErrorCode::NoUpperSurface: return "NoUpperSurface";
    case ErrorCode::EmptyDefect: return "EmptyDefect";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::NonConvergence: return "NonConvergence";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::UnsupportedDatatype: return "UnsupportedDatatype";
    case ErrorCode::NonOrthogonalOrientation: return "NonOrthogonalOrientation";
    case ErrorCode::UnsupportedHeader: return "UnsupportedHeader";
    case ErrorCode::Truncated: return "Truncated";
    case ErrorCode::IoFailure: return "IoFailure";
    case ErrorCode::SchemaViolation: return "SchemaViolation";
    case ErrorCode::RegistrationFailed: return "RegistrationFailed";
    }
    return "Unknown";
}

} // namespace craniotk
