#include "craniotk/volume.hpp"

#include "craniotk/error.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>

namespace craniotk {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::size_t word_count(std::int64_t voxels) {
    return static_cast<std::size_t>((voxels + 63) / 64);
}

// Lower envelope of parabolas (Felzenszwalb & Huttenlocher) for one line with
// sample pitch h. `f` and `out` may not alias.
void edt_line(const double* f, double* out, std::int64_t n, double h, std::vector<std::int64_t>& v,
              std::vector<double>& z) {
    v.resize(static_cast<std::size_t>(n));
    z.resize(static_cast<std::size_t>(n) + 1);
    std::int64_t k = -1;
    for (std::int64_t q = 0; q < n; ++q) {
        if (!std::isfinite(f[q])) {
            continue;
        }
        const double fq = f[q] + (q * h) * (q * h);
        if (k < 0) {
            k = 0;
            v[0] = q;
            z[0] = -kInf;
            z[1] = kInf;
            continue;
        }
        // z[0] is -inf, so the scan always stops at k >= 0.
        double s = 0.0;
        while (true) {
            const std::int64_t p = v[k];
            s = (fq - (f[p] + (p * h) * (p * h))) / (2.0 * h * static_cast<double>(q - p));
            if (s <= z[k]) {
                --k;
                continue;
            }
            break;
        }
        ++k;
        v[k] = q;
        z[k] = s;
        z[k + 1] = kInf;
    }
    if (k < 0) {
        std::fill(out, out + n, kInf);
        return;
    }
    std::int64_t j = 0;
    for (std::int64_t q = 0; q < n; ++q) {
        const double x = q * h;
        while (z[j + 1] < x) {
            ++j;
        }
        const double d = static_cast<double>(q - v[j]) * h;
        out[q] = d * d + f[v[j]];
    }
}

std::vector<std::uint8_t> extract_box(const VoxelGrid& m, const Box& box, bool invert) {
    const Dims ext = box.extent();
    std::vector<std::uint8_t> buf(static_cast<std::size_t>(ext[0] * ext[1] * ext[2]));
    std::size_t n = 0;
    for (std::int64_t k = box.lo[2]; k < box.hi[2]; ++k) {
        for (std::int64_t j = box.lo[1]; j < box.hi[1]; ++j) {
            std::int64_t lin = m.geometry().linear(box.lo[0], j, k);
            for (std::int64_t i = box.lo[0]; i < box.hi[0]; ++i, ++lin, ++n) {
                buf[n] = static_cast<std::uint8_t>(m.get(lin) != invert);
            }
        }
    }
    return buf;
}

Index3 radius_in_voxels(double radius_mm, Vec3 spacing) {
    Index3 r{};
    for (int a = 0; a < 3; ++a) {
        r[a] = static_cast<std::int64_t>(std::ceil(radius_mm / spacing[a])) + 1;
    }
    return r;
}

VoxelGrid dilate(const VoxelGrid& m, double r) {
    const auto bb = bounding_box(m);
    if (!bb || r <= 0.0) {
        return m;
    }
    const Box box = bb->expanded(radius_in_voxels(r, m.geometry().spacing), m.dims());
    const auto seeds = extract_box(m, box, false);
    const auto d2 = squared_edt(seeds, box.extent(), m.geometry().spacing);
    const double limit = r * r * (1.0 + 1e-12) + 1e-12;
    VoxelGrid out(m.geometry());
    std::size_t n = 0;
    for (std::int64_t k = box.lo[2]; k < box.hi[2]; ++k) {
        for (std::int64_t j = box.lo[1]; j < box.hi[1]; ++j) {
            for (std::int64_t i = box.lo[0]; i < box.hi[0]; ++i, ++n) {
                if (d2[n] <= limit) {
                    out.set(i, j, k);
                }
            }
        }
    }
    return out;
}

VoxelGrid erode(const VoxelGrid& m, double r) {
    const auto bb = bounding_box(m);
    if (!bb || r <= 0.0) {
        return m;
    }
    const Box box = bb->expanded(radius_in_voxels(r, m.geometry().spacing), m.dims());
    const auto seeds = extract_box(m, box, true);
    if (std::none_of(seeds.begin(), seeds.end(), [](std::uint8_t s) { return s != 0; })) {
        return m;
    }
    const auto d2 = squared_edt(seeds, box.extent(), m.geometry().spacing);
    const double limit = r * r * (1.0 + 1e-12) + 1e-12;
    VoxelGrid out(m.geometry());
    std::size_t n = 0;
    for (std::int64_t k = box.lo[2]; k < box.hi[2]; ++k) {
        for (std::int64_t j = box.lo[1]; j < box.hi[1]; ++j) {
            for (std::int64_t i = box.lo[0]; i < box.hi[0]; ++i, ++n) {
                if (seeds[n] == 0 && d2[n] > limit) {
                    out.set(i, j, k);
                }
            }
        }
    }
    return out;
}

} // namespace

VoxelGrid::VoxelGrid(const GridGeometry& geometry) : geometry_(geometry) {
    geometry_.validate();
    words_.assign(word_count(geometry_.voxel_count()), 0);
}

void VoxelGrid::clear_tail() {
    const std::int64_t rem = size() % 64;
    if (rem != 0 && !words_.empty()) {
        words_.back() &= (std::uint64_t{1} << rem) - 1;
    }
}

std::int64_t VoxelGrid::count() const {
    std::int64_t c = 0;
    for (std::uint64_t w : words_) {
        c += std::popcount(w);
    }
    return c;
}

bool VoxelGrid::empty() const {
    return std::all_of(words_.begin(), words_.end(), [](std::uint64_t w) { return w == 0; });
}

VoxelGrid VoxelGrid::complement() const {
    VoxelGrid out = *this;
    for (auto& w : out.words_) {
        w = ~w;
    }
    out.clear_tail();
    return out;
}

bool operator==(const VoxelGrid& a, const VoxelGrid& b) {
    return a.geometry_.dims == b.geometry_.dims && a.geometry_.spacing == b.geometry_.spacing &&
           a.geometry_.origin == b.geometry_.origin && a.words_ == b.words_;
}

ScalarGrid::ScalarGrid(const GridGeometry& geometry, double fill) : geometry_(geometry) {
    geometry_.validate();
    values_.assign(static_cast<std::size_t>(geometry_.voxel_count()), fill);
}

Box Box::expanded(const Index3& margin, const Dims& dims) const {
    Box b;
    for (int a = 0; a < 3; ++a) {
        b.lo[a] = std::max<std::int64_t>(0, lo[a] - margin[a]);
        b.hi[a] = std::min<std::int64_t>(dims[a], hi[a] + margin[a]);
    }
    return b;
}

std::optional<Box> bounding_box(const VoxelGrid& m) {
    const Dims& d = m.dims();
    Box b{{d[0], d[1], d[2]}, {0, 0, 0}};
    bool any = false;
    const auto words = m.words();
    for (std::size_t w = 0; w < words.size(); ++w) {
        std::uint64_t bits = words[w];
        while (bits != 0) {
            const int t = std::countr_zero(bits);
            bits &= bits - 1;
            const Index3 v = m.geometry().unravel(static_cast<std::int64_t>(w) * 64 + t);
            for (int a = 0; a < 3; ++a) {
                b.lo[a] = std::min(b.lo[a], v[a]);
                b.hi[a] = std::max(b.hi[a], v[a] + 1);
            }
            any = true;
        }
    }
    if (!any) {
        return std::nullopt;
    }
    return b;
}

VoxelGrid threshold(const ScalarGrid& g, double t) {
    if (!std::isfinite(t)) {
        fail(ErrorCode::InvalidArgument, "threshold must be finite");
    }
    VoxelGrid out(g.geometry());
    for (std::int64_t n = 0; n < g.size(); ++n) {
        if (g[n] >= t) {
            out.set(n);
        }
    }
    return out;
}

VoxelGrid surface(const VoxelGrid& m) {
    VoxelGrid out(m.geometry());
    const auto idx = surface_indices(m);
    for (std::int64_t n : idx) {
        out.set(n);
    }
    return out;
}

std::vector<std::int64_t> surface_indices(const VoxelGrid& m) {
    const Dims& d = m.dims();
    const std::int64_t sx = 1, sy = d[0], sz = d[0] * d[1];
    std::vector<std::int64_t> out;
    const auto words = m.words();
    for (std::size_t w = 0; w < words.size(); ++w) {
        std::uint64_t bits = words[w];
        while (bits != 0) {
            const int t = std::countr_zero(bits);
            bits &= bits - 1;
            const std::int64_t n = static_cast<std::int64_t>(w) * 64 + t;
            const Index3 v = m.geometry().unravel(n);
            const bool boundary = (v[0] > 0 && !m.get(n - sx)) || (v[0] + 1 < d[0] && !m.get(n + sx)) ||
                                  (v[1] > 0 && !m.get(n - sy)) || (v[1] + 1 < d[1] && !m.get(n + sy)) ||
                                  (v[2] > 0 && !m.get(n - sz)) || (v[2] + 1 < d[2] && !m.get(n + sz));
            if (boundary) {
                out.push_back(n);
            }
        }
    }
    return out;
}

std::vector<double> squared_edt(std::span<const std::uint8_t> seeds, const Dims& dims, Vec3 spacing) {
    const std::int64_t nx = dims[0], ny = dims[1], nz = dims[2];
    std::vector<double> g(seeds.size());
    for (std::size_t n = 0; n < seeds.size(); ++n) {
        g[n] = seeds[n] != 0 ? 0.0 : kInf;
    }
    const std::int64_t longest = std::max({nx, ny, nz});
    std::vector<double> line(static_cast<std::size_t>(longest));
    std::vector<double> res(static_cast<std::size_t>(longest));
    std::vector<std::int64_t> v;
    std::vector<double> z;

    for (std::int64_t k = 0; k < nz; ++k) {
        for (std::int64_t j = 0; j < ny; ++j) {
            double* row = g.data() + nx * (j + ny * k);
            edt_line(row, res.data(), nx, spacing.x, v, z);
            std::copy(res.begin(), res.begin() + nx, row);
        }
    }
    for (std::int64_t k = 0; k < nz; ++k) {
        for (std::int64_t i = 0; i < nx; ++i) {
            const std::int64_t base = i + nx * ny * k;
            for (std::int64_t j = 0; j < ny; ++j) {
                line[j] = g[base + nx * j];
            }
            edt_line(line.data(), res.data(), ny, spacing.y, v, z);
            for (std::int64_t j = 0; j < ny; ++j) {
                g[base + nx * j] = res[j];
            }
        }
    }
    const std::int64_t plane = nx * ny;
    for (std::int64_t j = 0; j < ny; ++j) {
        for (std::int64_t i = 0; i < nx; ++i) {
            const std::int64_t base = i + nx * j;
            for (std::int64_t k = 0; k < nz; ++k) {
                line[k] = g[base + plane * k];
            }
            edt_line(line.data(), res.data(), nz, spacing.z, v, z);
            for (std::int64_t k = 0; k < nz; ++k) {
                g[base + plane * k] = res[k];
            }
        }
    }
    return g;
}

ScalarGrid signed_distance(const VoxelGrid& m) {
    if (m.empty()) {
        fail(ErrorCode::EmptyMask, "signed_distance: mask is empty");
    }
    const auto surf = surface_indices(m);
    if (surf.empty()) {
        fail(ErrorCode::FullMask, "signed_distance: mask fills the grid, no boundary");
    }
    std::vector<std::uint8_t> seeds(static_cast<std::size_t>(m.size()), 0);
    for (std::int64_t n : surf) {
        seeds[static_cast<std::size_t>(n)] = 1;
    }
    const auto d2 = squared_edt(seeds, m.dims(), m.geometry().spacing);
    ScalarGrid out(m.geometry());
    for (std::int64_t n = 0; n < m.size(); ++n) {
        const double d = std::sqrt(d2[static_cast<std::size_t>(n)]);
        out[n] = m.get(n) ? -d : d;
    }
    return out;
}

VoxelGrid morph(const VoxelGrid& m, MorphOp op, double radius_mm) {
    if (!(radius_mm >= 0.0) || !std::isfinite(radius_mm)) {
        fail(ErrorCode::InvalidArgument, "morph radius must be finite and >= 0");
    }
    switch (op) {
    case MorphOp::Dilate: return dilate(m, radius_mm);
    case MorphOp::Erode: return erode(m, radius_mm);
    case MorphOp::Close: return erode(dilate(m, radius_mm), radius_mm);
    case MorphOp::Open: return dilate(erode(m, radius_mm), radius_mm);
    }
    return m;
}

Components label_components(const VoxelGrid& m, Connectivity connectivity) {
    const Dims& d = m.dims();
    Components c;
    c.labels.assign(static_cast<std::size_t>(m.size()), 0);
    c.sizes.push_back(0);

    std::vector<Index3> offsets;
    for (std::int64_t dz = -1; dz <= 1; ++dz) {
        for (std::int64_t dy = -1; dy <= 1; ++dy) {
            for (std::int64_t dx = -1; dx <= 1; ++dx) {
                const auto manhattan = std::abs(dx) + std::abs(dy) + std::abs(dz);
                if (manhattan == 0 || (connectivity == Connectivity::Face6 && manhattan != 1)) {
                    continue;
                }
                offsets.push_back({dx, dy, dz});
            }
        }
    }

    std::vector<std::int64_t> stack;
    const auto words = m.words();
    for (std::size_t w = 0; w < words.size(); ++w) {
        std::uint64_t bits = words[w];
        while (bits != 0) {
            const int t = std::countr_zero(bits);
            bits &= bits - 1;
            const std::int64_t seed = static_cast<std::int64_t>(w) * 64 + t;
            if (c.labels[static_cast<std::size_t>(seed)] != 0) {
                continue;
            }
            const auto label = static_cast<std::uint32_t>(c.sizes.size());
            std::int64_t size = 0;
            c.labels[static_cast<std::size_t>(seed)] = label;
            stack.push_back(seed);
            while (!stack.empty()) {
                const std::int64_t n = stack.back();
                stack.pop_back();
                ++size;
                const Index3 v = m.geometry().unravel(n);
                for (const auto& o : offsets) {
                    const Index3 u{v[0] + o[0], v[1] + o[1], v[2] + o[2]};
                    if (u[0] < 0 || u[1] < 0 || u[2] < 0 || u[0] >= d[0] || u[1] >= d[1] || u[2] >= d[2]) {
                        continue;
                    }
                    const std::int64_t nb = m.geometry().linear(u[0], u[1], u[2]);
                    if (m.get(nb) && c.labels[static_cast<std::size_t>(nb)] == 0) {
                        c.labels[static_cast<std::size_t>(nb)] = label;
                        stack.push_back(nb);
                    }
                }
            }
            c.sizes.push_back(size);
        }
    }
    return c;
}

VoxelGrid largest_component(const VoxelGrid& m, Connectivity connectivity) {
    if (m.empty()) {
        return m;
    }
    const Components c = label_components(m, connectivity);
    std::uint32_t best = 1;
    for (std::uint32_t l = 2; l < c.sizes.size(); ++l) {
        if (c.sizes[l] > c.sizes[best]) {
            best = l;
        }
    }
    VoxelGrid out(m.geometry());
    for (std::int64_t n = 0; n < m.size(); ++n) {
        if (c.labels[static_cast<std::size_t>(n)] == best) {
            out.set(n);
        }
    }
    return out;
}

std::int64_t component_count(const VoxelGrid& m, Connectivity connectivity) {
    return static_cast<std::int64_t>(label_components(m, connectivity).sizes.size()) - 1;
}

VoxelGrid set_ops(const VoxelGrid& a, const VoxelGrid& b, SetOp op) {
    if (!same_geometry(a.geometry(), b.geometry())) {
        fail(ErrorCode::GeometryMismatch, "set_ops: operands have different grid geometry");
    }
    VoxelGrid out(a.geometry());
    const auto wa = a.words();
    const auto wb = b.words();
    auto wo = out.words();
    for (std::size_t i = 0; i < wo.size(); ++i) {
        switch (op) {
        case SetOp::Union: wo[i] = wa[i] | wb[i]; break;
        case SetOp::Intersect: wo[i] = wa[i] & wb[i]; break;
        case SetOp::Subtract: wo[i] = wa[i] & ~wb[i]; break;
        case SetOp::Xor: wo[i] = wa[i] ^ wb[i]; break;
        }
    }
    return out;
}

bool is_subset(const VoxelGrid& a, const VoxelGrid& b) {
    return set_ops(a, b, SetOp::Subtract).empty();
}

VoxelGrid mirror_x(const VoxelGrid& m) {
    const Dims& d = m.dims();
    VoxelGrid out(m.geometry());
    for (std::int64_t k = 0; k < d[2]; ++k) {
        for (std::int64_t j = 0; j < d[1]; ++j) {
            for (std::int64_t i = 0; i < d[0]; ++i) {
                if (m.get(i, j, k)) {
                    out.set(d[0] - 1 - i, j, k);
                }
            }
        }
    }
    return out;
}

Vec3 centroid(const VoxelGrid& m) {
    double sx = 0.0, sy = 0.0, sz = 0.0;
    std::int64_t count = 0;
    const auto words = m.words();
    for (std::size_t w = 0; w < words.size(); ++w) {
        std::uint64_t bits = words[w];
        while (bits != 0) {
            const int t = std::countr_zero(bits);
            bits &= bits - 1;
            const Index3 v = m.geometry().unravel(static_cast<std::int64_t>(w) * 64 + t);
            sx += static_cast<double>(v[0]);
            sy += static_cast<double>(v[1]);
            sz += static_cast<double>(v[2]);
            ++count;
        }
    }
    if (count == 0) {
        fail(ErrorCode::EmptyMask, "centroid of an empty mask");
    }
    const double inv = 1.0 / static_cast<double>(count);
    const auto& g = m.geometry();
    return {g.origin.x + sx * inv * g.spacing.x, g.origin.y + sy * inv * g.spacing.y,
            g.origin.z + sz * inv * g.spacing.z};
}

} // namespace craniotk
