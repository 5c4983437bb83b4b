#pragma once

#include "craniotk/craniectomy.hpp"
#include "craniotk/geometry.hpp"
#include "craniotk/volume.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace craniotk {

// ---------------------------------------------------------------------------
// Volumes: a strict NIfTI-1 subset.
//
// Accepted: single-file "n+1", little-endian, 3-D (trailing unit dims
// allowed), datatype uint8 or float32, scl_slope 0/1 with zero intercept, a
// qform (or, without one, an sform) that is an axis permutation with flips
// times positive scales. Files ending in ".gz" are gzip containers.
// World coordinates are the file's (RAS+) millimetre frame; flipped or
// permuted axes are reordered on read so that internal axes run along +x,
// +y, +z.
// ---------------------------------------------------------------------------

/// Nonzero voxels become 1. Errors: IoFailure, Truncated, BadMagic,
/// UnsupportedDatatype, NonOrthogonalOrientation, UnsupportedHeader.
VoxelGrid read_volume(const std::filesystem::path& path);

/// uint8 or float32 samples as reals.
ScalarGrid read_scalar_volume(const std::filesystem::path& path);

/// uint8, vox_offset 352, qform code 1, identity quaternion. The output
/// bytes depend only on the grid.
void write_volume(const VoxelGrid& m, const std::filesystem::path& path);

/// float32 variant for real-valued grids (atlas averages).
void write_scalar_volume(const ScalarGrid& g, const std::filesystem::path& path);

/// In-memory encode/decode used by the file functions.
std::vector<std::uint8_t> encode_nifti(const VoxelGrid& m);
VoxelGrid decode_nifti(const std::vector<std::uint8_t>& bytes);

// ---------------------------------------------------------------------------
// Transforms: four lines of four space-separated decimals, the row-major
// world-mm matrix. Written with 17 significant digits.
// ---------------------------------------------------------------------------

void write_transform(const RigidTransform& t, const std::filesystem::path& path);
/// Errors: IoFailure, SchemaViolation (not 16 numbers or not rigid).
RigidTransform read_transform(const std::filesystem::path& path);

std::string format_transform(const RigidTransform& t);
RigidTransform parse_transform(const std::string& text);

// ---------------------------------------------------------------------------
// Dataset manifests (JSON).
// ---------------------------------------------------------------------------

/// Path roles a case may carry, in their canonical write order.
inline constexpr const char* kManifestPathKeys[] = {"full",       "defected", "defect",   "transform",
                                                    "prediction", "channel1", "channel2", "target"};

struct ManifestCase {
    std::string case_id;
    std::string subset = "train"; // train | test | test-extra
    /// (role, path) pairs; roles from kManifestPathKeys, each at most once.
    std::vector<std::pair<std::string, std::string>> paths;
    std::optional<std::uint64_t> seed;
    /// Virtual craniectomy record; `provided` marks organiser-style cases.
    std::optional<CraniectomySpec> craniectomy;
    bool provided = false;
    double noise_p = 0.0;

    std::optional<std::string> path(const std::string& role) const;
    void set_path(const std::string& role, const std::string& value);

    friend bool operator==(const ManifestCase& a, const ManifestCase& b);
};

struct DatasetManifest {
    std::string created_by;
    std::uint64_t master_seed = 0;
    std::vector<ManifestCase> cases;

    friend bool operator==(const DatasetManifest& a, const DatasetManifest& b);
};

/// Throws SchemaViolation naming the offending field path.
DatasetManifest parse_manifest(const std::string& json_text);
std::string format_manifest(const DatasetManifest& m);

DatasetManifest read_manifest(const std::filesystem::path& path);
void write_manifest(const DatasetManifest& m, const std::filesystem::path& path);

/// Structural checks (unique ids, known subsets, known path roles) plus, when
/// `base_dir` is given, existence of every referenced file (relative paths
/// resolve against base_dir). Throws SchemaViolation.
void validate_manifest(const DatasetManifest& m, const std::optional<std::filesystem::path>& base_dir = {});

std::filesystem::path resolve_path(const std::filesystem::path& base_dir, const std::string& p);

// ---------------------------------------------------------------------------
// Small shared helpers.
// ---------------------------------------------------------------------------

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);
std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

} // namespace craniotk
