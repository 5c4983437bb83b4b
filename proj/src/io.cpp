#include "craniotk/io.hpp"

#include "craniotk/error.hpp"

#include <json.hpp>
#include <zlib.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

namespace craniotk {

namespace fs = std::filesystem;

namespace {

using ojson = nlohmann::ordered_json;

constexpr std::int32_t kHeaderSize = 348;
constexpr std::int32_t kVoxOffset = 352;
constexpr std::int16_t kUint8 = 2;
constexpr std::int16_t kFloat32 = 16;
constexpr char kDescrip[] = "craniotk nifti-subset v1";

bool has_gz_extension(const fs::path& p) { return p.extension() == ".gz"; }

template <class T>
T get_le(const std::vector<std::uint8_t>& b, std::size_t off) {
    T v;
    std::memcpy(&v, b.data() + off, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) {
        auto* p = reinterpret_cast<std::uint8_t*>(&v);
        std::reverse(p, p + sizeof(T));
    }
    return v;
}

template <class T>
void put_le(std::vector<std::uint8_t>& b, std::size_t off, T v) {
    if constexpr (std::endian::native == std::endian::big) {
        auto* p = reinterpret_cast<std::uint8_t*>(&v);
        std::reverse(p, p + sizeof(T));
    }
    std::memcpy(b.data() + off, &v, sizeof(T));
}

std::vector<std::uint8_t> make_header(const GridGeometry& g, std::int16_t datatype, std::int16_t bitpix) {
    std::vector<std::uint8_t> h(kVoxOffset, 0);
    put_le<std::int32_t>(h, 0, kHeaderSize);
    h[38] = 'r';
    put_le<std::int16_t>(h, 40, 3);
    for (int a = 0; a < 3; ++a) {
        if (g.dims[a] > 32767) {
            fail(ErrorCode::InvalidArgument, "grid dimension exceeds the NIfTI-1 limit of 32767");
        }
        put_le<std::int16_t>(h, 42 + 2 * a, static_cast<std::int16_t>(g.dims[a]));
    }
    for (int a = 3; a < 7; ++a) {
        put_le<std::int16_t>(h, 42 + 2 * a, 1);
    }
    put_le<std::int16_t>(h, 70, datatype);
    put_le<std::int16_t>(h, 72, bitpix);
    put_le<float>(h, 76, 1.0f); // qfac
    for (int a = 0; a < 3; ++a) {
        put_le<float>(h, 80 + 4 * a, static_cast<float>(g.spacing[a]));
    }
    put_le<float>(h, 108, static_cast<float>(kVoxOffset));
    put_le<float>(h, 112, 1.0f);
    h[123] = 2; // mm
    std::memcpy(h.data() + 148, kDescrip, sizeof kDescrip - 1);
    put_le<std::int16_t>(h, 252, 1); // qform_code: scanner
    for (int a = 0; a < 3; ++a) {
        put_le<float>(h, 268 + 4 * a, static_cast<float>(g.origin[a]));
    }
    std::memcpy(h.data() + 344, "n+1\0", 4);
    return h;
}

// Internal-order mapping of a decoded file.
struct Layout {
    GridGeometry geometry;
    Dims file_dims{};
    std::int16_t datatype = 0;
    std::size_t offset = 0;
    // internal axis a reads file axis axis_of[a], reversed when flip[a]
    std::array<int, 3> axis_of{0, 1, 2};
    std::array<bool, 3> flip{false, false, false};
};

Layout parse_header(const std::vector<std::uint8_t>& b) {
    if (b.size() < static_cast<std::size_t>(kHeaderSize)) {
        fail(ErrorCode::Truncated, "NIfTI file shorter than the 348-byte header");
    }
    const auto sizeof_hdr = get_le<std::int32_t>(b, 0);
    if (sizeof_hdr != kHeaderSize) {
        std::int32_t swapped = sizeof_hdr;
        auto* p = reinterpret_cast<std::uint8_t*>(&swapped);
        std::reverse(p, p + 4);
        if (swapped == kHeaderSize) {
            fail(ErrorCode::UnsupportedHeader, "big-endian NIfTI files are not supported");
        }
        fail(ErrorCode::BadMagic, "sizeof_hdr is not 348: not a NIfTI-1 file");
    }
    if (std::memcmp(b.data() + 344, "n+1\0", 4) != 0) {
        fail(ErrorCode::BadMagic, "NIfTI magic is not \"n+1\" (only single-file NIfTI-1 is supported)");
    }
    Layout L;
    const auto ndim = get_le<std::int16_t>(b, 40);
    if (ndim < 3 || ndim > 7) {
        fail(ErrorCode::UnsupportedHeader, "dim[0] must describe a 3-D volume");
    }
    for (int a = 0; a < 3; ++a) {
        L.file_dims[a] = get_le<std::int16_t>(b, 42 + 2 * a);
        if (L.file_dims[a] < 1) {
            fail(ErrorCode::UnsupportedHeader, "dim[1..3] must be >= 1");
        }
    }
    for (int a = 3; a < ndim; ++a) {
        if (get_le<std::int16_t>(b, 42 + 2 * a) != 1) {
            fail(ErrorCode::UnsupportedHeader, "only 3-D volumes are supported (dim[4..] must be 1)");
        }
    }
    L.datatype = get_le<std::int16_t>(b, 70);
    const auto bitpix = get_le<std::int16_t>(b, 72);
    if (L.datatype != kUint8 && L.datatype != kFloat32) {
        fail(ErrorCode::UnsupportedDatatype, "datatype " + std::to_string(L.datatype) + " is not uint8 (2) or float32 (16)");
    }
    if ((L.datatype == kUint8 && bitpix != 8) || (L.datatype == kFloat32 && bitpix != 32)) {
        fail(ErrorCode::UnsupportedHeader, "bitpix does not match datatype");
    }
    const auto slope = get_le<float>(b, 112);
    const auto inter = get_le<float>(b, 116);
    if (!((slope == 0.0f || slope == 1.0f) && inter == 0.0f)) {
        fail(ErrorCode::UnsupportedHeader, "intensity scaling (scl_slope/scl_inter) is not supported");
    }
    const auto vox_offset = get_le<float>(b, 108);
    if (!(vox_offset >= kVoxOffset) || vox_offset != std::floor(vox_offset)) {
        fail(ErrorCode::UnsupportedHeader, "vox_offset must be an integer >= 352");
    }
    L.offset = static_cast<std::size_t>(vox_offset);

    float pixdim[8];
    for (int a = 0; a < 8; ++a) {
        pixdim[a] = get_le<float>(b, 76 + 4 * a);
    }
    for (int a = 1; a <= 3; ++a) {
        if (!(pixdim[a] > 0.0f) || !std::isfinite(pixdim[a])) {
            fail(ErrorCode::UnsupportedHeader, "pixdim[1..3] must be finite and > 0");
        }
    }

    // 3x3 index-to-world matrix (columns = file axes) plus offset.
    double m[3][3];
    double off[3];
    const auto qform = get_le<std::int16_t>(b, 252);
    const auto sform = get_le<std::int16_t>(b, 254);
    if (qform > 0) {
        const double qb = get_le<float>(b, 256), qc = get_le<float>(b, 260), qd = get_le<float>(b, 264);
        const double qa = std::sqrt(std::max(0.0, 1.0 - (qb * qb + qc * qc + qd * qd)));
        const double r[3][3] = {{qa * qa + qb * qb - qc * qc - qd * qd, 2 * (qb * qc - qa * qd), 2 * (qb * qd + qa * qc)},
                                {2 * (qb * qc + qa * qd), qa * qa + qc * qc - qb * qb - qd * qd, 2 * (qc * qd - qa * qb)},
                                {2 * (qb * qd - qa * qc), 2 * (qc * qd + qa * qb), qa * qa + qd * qd - qc * qc - qb * qb}};
        const double qfac = pixdim[0] < 0.0f ? -1.0 : 1.0;
        const double scale[3] = {pixdim[1], pixdim[2], qfac * pixdim[3]};
        for (int i = 0; i < 3; ++i) {
            for (int j = 0; j < 3; ++j) {
                m[i][j] = r[i][j] * scale[j];
            }
            off[i] = get_le<float>(b, 268 + 4 * i);
        }
    } else if (sform > 0) {
        for (int i = 0; i < 3; ++i) {
            for (int j = 0; j < 3; ++j) {
                m[i][j] = get_le<float>(b, 280 + 16 * i + 4 * j);
            }
            off[i] = get_le<float>(b, 280 + 16 * i + 12);
        }
    } else {
        fail(ErrorCode::UnsupportedHeader, "neither qform nor sform is set; orientation is unknown");
    }

    // Each file axis must map onto exactly one world axis.
    std::array<bool, 3> used{false, false, false};
    for (int c = 0; c < 3; ++c) {
        int best = 0;
        double col_norm = 0.0;
        for (int a = 0; a < 3; ++a) {
            col_norm += m[a][c] * m[a][c];
            if (std::abs(m[a][c]) > std::abs(m[best][c])) {
                best = a;
            }
        }
        col_norm = std::sqrt(col_norm);
        if (!(col_norm > 0.0) || !std::isfinite(col_norm)) {
            fail(ErrorCode::NonOrthogonalOrientation, "degenerate orientation matrix");
        }
        for (int a = 0; a < 3; ++a) {
            if (a != best && std::abs(m[a][c]) > 1e-5 * col_norm) {
                fail(ErrorCode::NonOrthogonalOrientation,
                     "orientation is oblique or sheared; only axis permutations with flips are supported");
            }
        }
        if (used[best]) {
            fail(ErrorCode::NonOrthogonalOrientation, "orientation maps two file axes onto one world axis");
        }
        used[best] = true;
        L.axis_of[best] = c;
        L.flip[best] = m[best][c] < 0.0;
        const double step = std::abs(m[best][c]);
        L.geometry.dims[best] = L.file_dims[c];
        L.geometry.spacing[best] = step;
        L.geometry.origin[best] = L.flip[best] ? off[best] - step * static_cast<double>(L.file_dims[c] - 1) : off[best];
    }
    for (int a = 0; a < 3; ++a) {
        if (!std::isfinite(off[a])) {
            fail(ErrorCode::UnsupportedHeader, "non-finite origin");
        }
    }
    const std::size_t voxels = static_cast<std::size_t>(L.file_dims[0] * L.file_dims[1] * L.file_dims[2]);
    const std::size_t bytes_per = L.datatype == kUint8 ? 1 : 4;
    if (b.size() < L.offset + voxels * bytes_per) {
        fail(ErrorCode::Truncated, "NIfTI payload shorter than dims x bitpix");
    }
    return L;
}

// Calls emit(internal_linear_index, value) for every voxel.
template <class Emit>
void decode_payload(const std::vector<std::uint8_t>& b, const Layout& L, Emit&& emit) {
    const Dims& fd = L.file_dims;
    const Dims& id = L.geometry.dims;
    std::int64_t file_n = 0;
    for (std::int64_t fk = 0; fk < fd[2]; ++fk) {
        for (std::int64_t fj = 0; fj < fd[1]; ++fj) {
            for (std::int64_t fi = 0; fi < fd[0]; ++fi, ++file_n) {
                const std::int64_t f[3] = {fi, fj, fk};
                std::int64_t v[3];
                for (int a = 0; a < 3; ++a) {
                    const std::int64_t x = f[L.axis_of[a]];
                    v[a] = L.flip[a] ? id[a] - 1 - x : x;
                }
                const std::int64_t n = v[0] + id[0] * (v[1] + id[1] * v[2]);
                double value = 0.0;
                if (L.datatype == kUint8) {
                    value = b[L.offset + static_cast<std::size_t>(file_n)];
                } else {
                    const float fv = get_le<float>(b, L.offset + 4 * static_cast<std::size_t>(file_n));
                    if (!std::isfinite(fv)) {
                        fail(ErrorCode::UnsupportedHeader, "non-finite float32 voxel value");
                    }
                    value = fv;
                }
                emit(n, value);
            }
        }
    }
}

std::vector<std::uint8_t> gzip_read(const fs::path& path) {
    gzFile f = gzopen(path.string().c_str(), "rb");
    if (f == nullptr) {
        fail(ErrorCode::IoFailure, "cannot open " + path.string());
    }
    std::vector<std::uint8_t> out;
    std::vector<std::uint8_t> chunk(1 << 20);
    while (true) {
        const int n = gzread(f, chunk.data(), static_cast<unsigned>(chunk.size()));
        if (n < 0) {
            int errnum = 0;
            const std::string msg = gzerror(f, &errnum);
            gzclose(f);
            fail(ErrorCode::Truncated, "gzip stream error in " + path.string() + ": " + msg);
        }
        if (n == 0) {
            break;
        }
        out.insert(out.end(), chunk.begin(), chunk.begin() + n);
    }
    gzclose(f);
    return out;
}

void gzip_write(const fs::path& path, const std::vector<std::uint8_t>& bytes) {
    gzFile f = gzopen(path.string().c_str(), "wb6");
    if (f == nullptr) {
        fail(ErrorCode::IoFailure, "cannot create " + path.string());
    }
    std::size_t done = 0;
    while (done < bytes.size()) {
        const auto n = static_cast<unsigned>(std::min<std::size_t>(bytes.size() - done, 1u << 30));
        if (gzwrite(f, bytes.data() + done, n) != static_cast<int>(n)) {
            gzclose(f);
            fail(ErrorCode::IoFailure, "write failed for " + path.string());
        }
        done += n;
    }
    if (gzclose(f) != Z_OK) {
        fail(ErrorCode::IoFailure, "close failed for " + path.string());
    }
}

ojson spec_to_json(const CraniectomySpec& s) {
    return {{"template", std::string(to_string(s.kind))},
            {"radius", s.radius},
            {"edge", s.edge},
            {"cylinder_radius", s.cylinder_radius},
            {"center", {s.center.x, s.center.y, s.center.z}},
            {"orientation", s.orientation},
            {"seed", s.seed}};
}

[[noreturn]] void schema(const std::string& where, const std::string& what) {
    fail(ErrorCode::SchemaViolation, where + ": " + what);
}

double num(const ojson& j, const std::string& key, const std::string& where) {
    if (!j.contains(key) || !j.at(key).is_number()) {
        schema(where + "." + key, "expected a number");
    }
    return j.at(key).get<double>();
}

std::uint64_t u64(const ojson& j, const std::string& where) {
    if (!j.is_number_unsigned() && !(j.is_number_integer() && j.get<std::int64_t>() >= 0)) {
        schema(where, "expected a non-negative integer");
    }
    return j.get<std::uint64_t>();
}

CraniectomySpec spec_from_json(const ojson& j, const std::string& where) {
    if (!j.is_object()) {
        schema(where, "expected an object or \"provided\"");
    }
    static const std::set<std::string> known{"template", "radius", "edge", "cylinder_radius", "center", "orientation", "seed"};
    for (const auto& [k, v] : j.items()) {
        if (!known.count(k)) {
            schema(where + "." + k, "unknown field");
        }
    }
    CraniectomySpec s;
    if (!j.contains("template") || !j.at("template").is_string()) {
        schema(where + ".template", "expected a string");
    }
    try {
        s.kind = template_kind_from_string(j.at("template").get<std::string>());
    } catch (const Error& e) {
        schema(where + ".template", e.what());
    }
    s.radius = num(j, "radius", where);
    s.edge = num(j, "edge", where);
    s.cylinder_radius = num(j, "cylinder_radius", where);
    s.orientation = num(j, "orientation", where);
    if (!j.contains("center") || !j.at("center").is_array() || j.at("center").size() != 3) {
        schema(where + ".center", "expected [x, y, z]");
    }
    for (int a = 0; a < 3; ++a) {
        if (!j.at("center").at(a).is_number()) {
            schema(where + ".center", "expected numbers");
        }
        s.center[a] = j.at("center").at(a).get<double>();
    }
    if (!j.contains("seed")) {
        schema(where + ".seed", "missing");
    }
    s.seed = u64(j.at("seed"), where + ".seed");
    return s;
}

bool known_path_key(const std::string& k) {
    return std::any_of(std::begin(kManifestPathKeys), std::end(kManifestPathKeys),
                       [&](const char* p) { return k == p; });
}

bool known_subset(const std::string& s) { return s == "train" || s == "test" || s == "test-extra"; }

bool same_spec(const CraniectomySpec& a, const CraniectomySpec& b) {
    return a.kind == b.kind && a.radius == b.radius && a.edge == b.edge && a.cylinder_radius == b.cylinder_radius &&
           a.center == b.center && a.orientation == b.orientation && a.seed == b.seed;
}

} // namespace

std::vector<std::uint8_t> read_file_bytes(const fs::path& path) {
    if (has_gz_extension(path)) {
        return gzip_read(path);
    }
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        fail(ErrorCode::IoFailure, "cannot open " + path.string());
    }
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_bytes(const fs::path& path, const std::vector<std::uint8_t>& bytes) {
    if (has_gz_extension(path)) {
        gzip_write(path, bytes);
        return;
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        fail(ErrorCode::IoFailure, "cannot create " + path.string());
    }
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        fail(ErrorCode::IoFailure, "write failed for " + path.string());
    }
}

std::string read_text_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        fail(ErrorCode::IoFailure, "cannot open " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        fail(ErrorCode::IoFailure, "cannot create " + path.string());
    }
    out << text;
    if (!out) {
        fail(ErrorCode::IoFailure, "write failed for " + path.string());
    }
}

std::vector<std::uint8_t> encode_nifti(const VoxelGrid& m) {
    auto bytes = make_header(m.geometry(), kUint8, 8);
    bytes.resize(bytes.size() + static_cast<std::size_t>(m.size()), 0);
    for (std::int64_t n = 0; n < m.size(); ++n) {
        if (m.get(n)) {
            bytes[kVoxOffset + static_cast<std::size_t>(n)] = 1;
        }
    }
    return bytes;
}

VoxelGrid decode_nifti(const std::vector<std::uint8_t>& bytes) {
    const Layout L = parse_header(bytes);
    VoxelGrid out(L.geometry);
    decode_payload(bytes, L, [&](std::int64_t n, double v) {
        if (v != 0.0) {
            out.set(n);
        }
    });
    return out;
}

VoxelGrid read_volume(const fs::path& path) { return decode_nifti(read_file_bytes(path)); }

ScalarGrid read_scalar_volume(const fs::path& path) {
    const auto bytes = read_file_bytes(path);
    const Layout L = parse_header(bytes);
    ScalarGrid out(L.geometry);
    decode_payload(bytes, L, [&](std::int64_t n, double v) { out[n] = v; });
    return out;
}

void write_volume(const VoxelGrid& m, const fs::path& path) { write_file_bytes(path, encode_nifti(m)); }

void write_scalar_volume(const ScalarGrid& g, const fs::path& path) {
    auto bytes = make_header(g.geometry(), kFloat32, 32);
    bytes.resize(bytes.size() + 4 * static_cast<std::size_t>(g.size()), 0);
    for (std::int64_t n = 0; n < g.size(); ++n) {
        put_le<float>(bytes, kVoxOffset + 4 * static_cast<std::size_t>(n), static_cast<float>(g[n]));
    }
    write_file_bytes(path, bytes);
}

std::string format_transform(const RigidTransform& t) {
    std::string out;
    char buf[64];
    for (int r = 0; r < 4; ++r) {
        for (int c = 0; c < 4; ++c) {
            std::snprintf(buf, sizeof buf, "%.17g", t.matrix()[static_cast<std::size_t>(4 * r + c)]);
            out += buf;
            out += c == 3 ? "\n" : " ";
        }
    }
    return out;
}

RigidTransform parse_transform(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    std::array<double, 16> m{};
    std::size_t count = 0;
    while (std::getline(in, line)) {
        const auto hash = line.find('#');
        if (hash != std::string::npos) {
            line.erase(hash);
        }
        std::istringstream ls(line);
        std::string tok;
        while (ls >> tok) {
            if (count == 16) {
                fail(ErrorCode::SchemaViolation, "transform file has more than 16 numbers");
            }
            char* end = nullptr;
            const double v = std::strtod(tok.c_str(), &end);
            if (end == tok.c_str() || *end != '\0') {
                fail(ErrorCode::SchemaViolation, "transform file: cannot parse '" + tok + "'");
            }
            m[count++] = v;
        }
    }
    if (count != 16) {
        fail(ErrorCode::SchemaViolation, "transform file must hold 16 numbers, found " + std::to_string(count));
    }
    try {
        return RigidTransform::from_matrix(m);
    } catch (const Error& e) {
        fail(ErrorCode::SchemaViolation, std::string("transform file: ") + e.what());
    }
}

void write_transform(const RigidTransform& t, const fs::path& path) { write_text_file(path, format_transform(t)); }

RigidTransform read_transform(const fs::path& path) { return parse_transform(read_text_file(path)); }

std::optional<std::string> ManifestCase::path(const std::string& role) const {
    for (const auto& [k, v] : paths) {
        if (k == role) {
            return v;
        }
    }
    return std::nullopt;
}

void ManifestCase::set_path(const std::string& role, const std::string& value) {
    if (!known_path_key(role)) {
        fail(ErrorCode::SchemaViolation, "unknown path role '" + role + "'");
    }
    for (auto& [k, v] : paths) {
        if (k == role) {
            v = value;
            return;
        }
    }
    paths.emplace_back(role, value);
    // Keep canonical order so writes are stable.
    auto rank = [](const std::string& k) {
        return std::find_if(std::begin(kManifestPathKeys), std::end(kManifestPathKeys),
                            [&](const char* p) { return k == p; }) -
               std::begin(kManifestPathKeys);
    };
    std::stable_sort(paths.begin(), paths.end(), [&](const auto& a, const auto& b) { return rank(a.first) < rank(b.first); });
}

bool operator==(const ManifestCase& a, const ManifestCase& b) {
    if (a.case_id != b.case_id || a.subset != b.subset || a.paths != b.paths || a.seed != b.seed ||
        a.provided != b.provided || a.noise_p != b.noise_p || a.craniectomy.has_value() != b.craniectomy.has_value()) {
        return false;
    }
    return !a.craniectomy || same_spec(*a.craniectomy, *b.craniectomy);
}

bool operator==(const DatasetManifest& a, const DatasetManifest& b) {
    return a.created_by == b.created_by && a.master_seed == b.master_seed && a.cases == b.cases;
}

std::string format_manifest(const DatasetManifest& m) {
    ojson j;
    j["format"] = "craniotk-manifest";
    j["format_version"] = 1;
    j["created_by"] = m.created_by;
    j["master_seed"] = m.master_seed;
    ojson cases = ojson::array();
    for (const auto& c : m.cases) {
        ojson jc;
        jc["case_id"] = c.case_id;
        jc["subset"] = c.subset;
        ojson paths = ojson::object();
        for (const char* key : kManifestPathKeys) {
            if (auto p = c.path(key)) {
                paths[key] = *p;
            }
        }
        jc["paths"] = std::move(paths);
        if (c.seed) {
            jc["seed"] = *c.seed;
        }
        if (c.provided) {
            jc["craniectomy"] = "provided";
        } else if (c.craniectomy) {
            jc["craniectomy"] = spec_to_json(*c.craniectomy);
        }
        if (c.noise_p != 0.0) {
            jc["noise_p"] = c.noise_p;
        }
        cases.push_back(std::move(jc));
    }
    j["cases"] = std::move(cases);
    return j.dump(2) + "\n";
}

DatasetManifest parse_manifest(const std::string& text) {
    ojson j;
    try {
        j = ojson::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        schema("$", std::string("invalid JSON: ") + e.what());
    }
    if (!j.is_object()) {
        schema("$", "expected an object");
    }
    static const std::set<std::string> top{"format", "format_version", "created_by", "master_seed", "cases"};
    for (const auto& [k, v] : j.items()) {
        if (!top.count(k)) {
            schema("$." + k, "unknown field");
        }
    }
    if (!j.contains("format") || j.at("format") != "craniotk-manifest") {
        schema("$.format", "expected \"craniotk-manifest\"");
    }
    if (!j.contains("format_version") || j.at("format_version") != 1) {
        schema("$.format_version", "unsupported version (expected 1)");
    }
    DatasetManifest m;
    if (!j.contains("created_by") || !j.at("created_by").is_string()) {
        schema("$.created_by", "expected a string");
    }
    m.created_by = j.at("created_by").get<std::string>();
    if (!j.contains("master_seed")) {
        schema("$.master_seed", "missing");
    }
    m.master_seed = u64(j.at("master_seed"), "$.master_seed");
    if (!j.contains("cases") || !j.at("cases").is_array()) {
        schema("$.cases", "expected an array");
    }
    static const std::set<std::string> case_keys{"case_id", "subset", "paths", "seed", "craniectomy", "noise_p"};
    for (std::size_t i = 0; i < j.at("cases").size(); ++i) {
        const auto& jc = j.at("cases").at(i);
        const std::string where = "$.cases[" + std::to_string(i) + "]";
        if (!jc.is_object()) {
            schema(where, "expected an object");
        }
        for (const auto& [k, v] : jc.items()) {
            if (!case_keys.count(k)) {
                schema(where + "." + k, "unknown field");
            }
        }
        ManifestCase c;
        if (!jc.contains("case_id") || !jc.at("case_id").is_string() || jc.at("case_id").get<std::string>().empty()) {
            schema(where + ".case_id", "expected a non-empty string");
        }
        c.case_id = jc.at("case_id").get<std::string>();
        if (!jc.contains("subset") || !jc.at("subset").is_string()) {
            schema(where + ".subset", "expected a string");
        }
        c.subset = jc.at("subset").get<std::string>();
        if (!jc.contains("paths") || !jc.at("paths").is_object()) {
            schema(where + ".paths", "expected an object");
        }
        for (const auto& [k, v] : jc.at("paths").items()) {
            if (!known_path_key(k)) {
                schema(where + ".paths." + k, "unknown path role");
            }
            if (!v.is_string()) {
                schema(where + ".paths." + k, "expected a string");
            }
            c.set_path(k, v.get<std::string>());
        }
        if (jc.contains("seed")) {
            c.seed = u64(jc.at("seed"), where + ".seed");
        }
        if (jc.contains("craniectomy")) {
            const auto& cr = jc.at("craniectomy");
            if (cr.is_string() && cr.get<std::string>() == "provided") {
                c.provided = true;
            } else {
                c.craniectomy = spec_from_json(cr, where + ".craniectomy");
            }
        }
        if (jc.contains("noise_p")) {
            c.noise_p = num(jc, "noise_p", where);
        }
        m.cases.push_back(std::move(c));
    }
    validate_manifest(m);
    return m;
}

void validate_manifest(const DatasetManifest& m, const std::optional<fs::path>& base_dir) {
    std::set<std::string> ids;
    for (std::size_t i = 0; i < m.cases.size(); ++i) {
        const auto& c = m.cases[i];
        const std::string where = "$.cases[" + std::to_string(i) + "]";
        if (c.case_id.empty()) {
            schema(where + ".case_id", "must not be empty");
        }
        if (!ids.insert(c.case_id).second) {
            schema(where + ".case_id", "duplicate case_id '" + c.case_id + "'");
        }
        if (!known_subset(c.subset)) {
            schema(where + ".subset", "unknown subset '" + c.subset + "' (expected train, test or test-extra)");
        }
        if (!(c.noise_p >= 0.0 && c.noise_p <= 1.0)) {
            schema(where + ".noise_p", "must lie in [0, 1]");
        }
        for (const auto& [k, v] : c.paths) {
            if (!known_path_key(k)) {
                schema(where + ".paths." + k, "unknown path role");
            }
            if (base_dir && !fs::exists(resolve_path(*base_dir, v))) {
                schema(where + ".paths." + k, "file does not exist: " + v);
            }
        }
    }
}

fs::path resolve_path(const fs::path& base_dir, const std::string& p) {
    const fs::path path(p);
    return path.is_absolute() ? path : base_dir / path;
}

DatasetManifest read_manifest(const fs::path& path) { return parse_manifest(read_text_file(path)); }

void write_manifest(const DatasetManifest& m, const fs::path& path) {
    validate_manifest(m);
    write_text_file(path, format_manifest(m));
}

} // namespace craniotk
