#include "craniotk/registration.hpp"

#include "craniotk/nelder_mead.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <bit>
#include <cmath>
#include <numbers>

namespace craniotk {

namespace {

struct Moments {
    Vec3 centroid;
    Mat3 covariance{};
};

Moments moments(const VoxelGrid& m) {
    const GridGeometry& g = m.geometry();
    double s[3] = {0, 0, 0};
    double ss[3][3] = {};
    std::int64_t count = 0;
    const auto words = m.words();
    for (std::size_t w = 0; w < words.size(); ++w) {
        std::uint64_t bits = words[w];
        while (bits != 0) {
            const int t = std::countr_zero(bits);
            bits &= bits - 1;
            const Vec3 p = g.world(g.unravel(static_cast<std::int64_t>(w) * 64 + t));
            for (int a = 0; a < 3; ++a) {
                s[a] += p[a];
                for (int b = 0; b < 3; ++b) {
                    ss[a][b] += p[a] * p[b];
                }
            }
            ++count;
        }
    }
    if (count == 0) {
        fail(ErrorCode::EmptyInput, "registration input mask is empty");
    }
    Moments mo;
    const double inv = 1.0 / static_cast<double>(count);
    mo.centroid = {s[0] * inv, s[1] * inv, s[2] * inv};
    for (int a = 0; a < 3; ++a) {
        for (int b = 0; b < 3; ++b) {
            mo.covariance[a][b] = ss[a][b] * inv - mo.centroid[a] * mo.centroid[b];
        }
    }
    return mo;
}

Mat3 principal_axes(const Mat3& cov) {
    Eigen::Matrix3d c;
    for (int a = 0; a < 3; ++a) {
        for (int b = 0; b < 3; ++b) {
            c(a, b) = cov[a][b];
        }
    }
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> solver(c);
    const Eigen::Matrix3d v = solver.eigenvectors();
    Mat3 out{};
    for (int a = 0; a < 3; ++a) {
        for (int b = 0; b < 3; ++b) {
            out[a][b] = v(a, b);
        }
    }
    return out;
}

} // namespace

RigidTransform principal_frame(const VoxelGrid& m) {
    const Moments mo = moments(m);
    const Mat3 axes = principal_axes(mo.covariance);
    // Row r of the rotation is the eigenvector assigned to world axis r:
    // the permutation and signs that keep the rotation closest to identity.
    std::array<int, 3> perm{0, 1, 2};
    std::array<int, 3> best_perm = perm;
    double best = -1.0;
    do {
        double score = 0.0;
        for (int r = 0; r < 3; ++r) {
            score += std::abs(axes[r][perm[static_cast<std::size_t>(r)]]);
        }
        if (score > best) {
            best = score;
            best_perm = perm;
        }
    } while (std::next_permutation(perm.begin(), perm.end()));
    Mat3 rot{};
    for (int r = 0; r < 3; ++r) {
        const int col = best_perm[static_cast<std::size_t>(r)];
        const double sign = axes[r][col] < 0.0 ? -1.0 : 1.0;
        for (int a = 0; a < 3; ++a) {
            rot[r][a] = sign * axes[a][col];
        }
    }
    if (determinant(rot) < 0.0) {
        int weakest = 0;
        for (int r = 1; r < 3; ++r) {
            if (std::abs(rot[r][r]) < std::abs(rot[weakest][weakest])) {
                weakest = r;
            }
        }
        for (int a = 0; a < 3; ++a) {
            rot[weakest][a] = -rot[weakest][a];
        }
    }
    return RigidTransform(rot, -1.0 * mat_vec(rot, mo.centroid));
}

namespace {

// Clamped signed distance at full resolution. Only the bounding box of the
// mask grown by the band is computed exactly; everything else is +band.
std::vector<float> banded_sdt(const VoxelGrid& m, double band) {
    const GridGeometry& g = m.geometry();
    std::vector<float> out(static_cast<std::size_t>(m.size()), static_cast<float>(band));
    const auto bb = bounding_box(m);
    if (!bb) {
        return out;
    }
    Index3 margin{};
    for (int a = 0; a < 3; ++a) {
        margin[a] = static_cast<std::int64_t>(std::ceil(band / g.spacing[a])) + 1;
    }
    const Box box = bb->expanded(margin, g.dims);
    const Dims ext = box.extent();
    std::vector<std::uint8_t> seeds(static_cast<std::size_t>(ext[0] * ext[1] * ext[2]), 0);
    for (std::int64_t n : surface_indices(m)) {
        const Index3 v = g.unravel(n);
        seeds[static_cast<std::size_t>((v[0] - box.lo[0]) + ext[0] * ((v[1] - box.lo[1]) + ext[1] * (v[2] - box.lo[2])))] = 1;
    }
    const auto d2 = squared_edt(seeds, ext, g.spacing);
    std::size_t n = 0;
    for (std::int64_t k = box.lo[2]; k < box.hi[2]; ++k) {
        for (std::int64_t j = box.lo[1]; j < box.hi[1]; ++j) {
            for (std::int64_t i = box.lo[0]; i < box.hi[0]; ++i, ++n) {
                const double d = std::min(std::sqrt(d2[n]), band);
                const std::int64_t lin = g.linear(i, j, k);
                out[static_cast<std::size_t>(lin)] = static_cast<float>(m.get(lin) ? -d : d);
            }
        }
    }
    return out;
}

struct Level {
    int factor = 1;
    GridGeometry geometry;
    std::vector<float> values;
};

Level downsample(const GridGeometry& g, const std::vector<float>& full, int f) {
    Level lv;
    lv.factor = f;
    lv.geometry.spacing = {g.spacing.x * f, g.spacing.y * f, g.spacing.z * f};
    for (int a = 0; a < 3; ++a) {
        lv.geometry.dims[a] = (g.dims[a] + f - 1) / f;
        lv.geometry.origin[a] = g.origin[a] + 0.5 * (f - 1) * g.spacing[a];
    }
    if (f == 1) {
        lv.values = full;
        return lv;
    }
    const Dims& ld = lv.geometry.dims;
    std::vector<double> sum(static_cast<std::size_t>(ld[0] * ld[1] * ld[2]), 0.0);
    std::vector<int> cnt(sum.size(), 0);
    for (std::int64_t k = 0; k < g.dims[2]; ++k) {
        for (std::int64_t j = 0; j < g.dims[1]; ++j) {
            const std::int64_t row = g.linear(0, j, k);
            const std::int64_t lrow = ld[0] * (j / f + ld[1] * (k / f));
            for (std::int64_t i = 0; i < g.dims[0]; ++i) {
                const auto li = static_cast<std::size_t>(lrow + i / f);
                sum[li] += full[static_cast<std::size_t>(row + i)];
                ++cnt[li];
            }
        }
    }
    lv.values.resize(sum.size());
    for (std::size_t n = 0; n < sum.size(); ++n) {
        lv.values[n] = static_cast<float>(sum[n] / cnt[n]);
    }
    return lv;
}

std::vector<Level> build_pyramid(const VoxelGrid& m, const RegistrationOptions& opt) {
    const auto sdt = banded_sdt(m, opt.band_mm);
    std::vector<Level> levels;
    for (int f : opt.pyramid) {
        levels.push_back(downsample(m.geometry(), sdt, f));
    }
    return levels;
}

double sample_trilinear(const Level& lv, Vec3 p, double outside) {
    const GridGeometry& g = lv.geometry;
    const double cx = (p.x - g.origin.x) / g.spacing.x;
    const double cy = (p.y - g.origin.y) / g.spacing.y;
    const double cz = (p.z - g.origin.z) / g.spacing.z;
    if (!(cx >= 0.0 && cy >= 0.0 && cz >= 0.0 && cx <= g.dims[0] - 1 && cy <= g.dims[1] - 1 &&
          cz <= g.dims[2] - 1)) {
        return outside;
    }
    const auto i0 = std::min<std::int64_t>(static_cast<std::int64_t>(cx), g.dims[0] - 2 < 0 ? 0 : g.dims[0] - 2);
    const auto j0 = std::min<std::int64_t>(static_cast<std::int64_t>(cy), g.dims[1] - 2 < 0 ? 0 : g.dims[1] - 2);
    const auto k0 = std::min<std::int64_t>(static_cast<std::int64_t>(cz), g.dims[2] - 2 < 0 ? 0 : g.dims[2] - 2);
    const double fx = cx - i0, fy = cy - j0, fz = cz - k0;
    const std::int64_t sx = g.dims[0] > 1 ? 1 : 0;
    const std::int64_t sy = g.dims[1] > 1 ? g.dims[0] : 0;
    const std::int64_t sz = g.dims[2] > 1 ? g.dims[0] * g.dims[1] : 0;
    const float* v = lv.values.data() + g.linear(i0, j0, k0);
    const double c00 = v[0] + fx * (v[sx] - v[0]);
    const double c10 = v[sy] + fx * (v[sy + sx] - v[sy]);
    const double c01 = v[sz] + fx * (v[sz + sx] - v[sz]);
    const double c11 = v[sz + sy] + fx * (v[sz + sy + sx] - v[sz + sy]);
    const double c0 = c00 + fy * (c10 - c00);
    const double c1 = c01 + fy * (c11 - c01);
    return c0 + fz * (c1 - c0);
}

struct Samples {
    std::vector<Vec3> points;
    std::vector<float> values;
};

Samples collect_samples(const Level& lv, double band, int max_samples) {
    std::vector<std::int64_t> inside;
    for (std::size_t n = 0; n < lv.values.size(); ++n) {
        if (std::abs(lv.values[n]) < band) {
            inside.push_back(static_cast<std::int64_t>(n));
        }
    }
    const std::size_t stride = std::max<std::size_t>(
        1, (inside.size() + static_cast<std::size_t>(max_samples) - 1) / static_cast<std::size_t>(max_samples));
    Samples s;
    for (std::size_t i = 0; i < inside.size(); i += stride) {
        s.points.push_back(lv.geometry.world(lv.geometry.unravel(inside[i])));
        s.values.push_back(lv.values[static_cast<std::size_t>(inside[i])]);
    }
    return s;
}

double objective(const Samples& s, const Level& fixed, const RigidTransform& t, double band) {
    if (s.points.empty()) {
        return -band;
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < s.points.size(); ++i) {
        acc += std::abs(sample_trilinear(fixed, t.apply(s.points[i]), band) - s.values[i]);
    }
    return -acc / static_cast<double>(s.points.size());
}

RigidTransform delta_transform(const std::vector<double>& p, Vec3 center) {
    return RigidTransform::from_euler_zyx({p[0], p[1], p[2]}, {p[3], p[4], p[5]}, center);
}

} // namespace

void RegistrationOptions::validate() const {
    if (!(band_mm > 0.0) || pyramid.empty() || max_iterations < 1 || !(tolerance > 0.0) || max_samples < 1 ||
        !(rotation_step_deg > 0.0) || !(translation_step_mm > 0.0) ||
        std::any_of(pyramid.begin(), pyramid.end(), [](int f) { return f < 1; })) {
        fail(ErrorCode::InvalidArgument, "invalid registration options");
    }
}

struct RegistrationTarget::Impl {
    RegistrationOptions options;
    GridGeometry geometry;
    Moments moments;
    std::vector<Level> levels;
};

RegistrationTarget::RegistrationTarget(const VoxelGrid& fixed, const RegistrationOptions& options)
    : impl_(std::make_unique<Impl>()) {
    options.validate();
    impl_->options = options;
    impl_->geometry = fixed.geometry();
    impl_->moments = moments(fixed);
    impl_->levels = build_pyramid(fixed, options);
}

RegistrationTarget::~RegistrationTarget() = default;
RegistrationTarget::RegistrationTarget(RegistrationTarget&&) noexcept = default;
RegistrationTarget& RegistrationTarget::operator=(RegistrationTarget&&) noexcept = default;

const GridGeometry& RegistrationTarget::geometry() const { return impl_->geometry; }
const RegistrationOptions& RegistrationTarget::options() const { return impl_->options; }

double registration_objective(const VoxelGrid& moving, const RegistrationTarget& target,
                              const RigidTransform& transform, int level) {
    const auto& impl = target.impl();
    const int n = static_cast<int>(impl.levels.size());
    const int li = level < 0 ? n - 1 : std::min(level, n - 1);
    const auto pyramid = build_pyramid(moving, impl.options);
    const auto samples = collect_samples(pyramid[static_cast<std::size_t>(li)], impl.options.band_mm,
                                         impl.options.max_samples);
    return objective(samples, impl.levels[static_cast<std::size_t>(li)], transform, impl.options.band_mm);
}

// Coarse optima within this fraction of the best count as ties.
constexpr double kTieFraction = 0.02;

RegistrationResult register_rigid(const VoxelGrid& moving, const RegistrationTarget& target) {
    const auto& impl = target.impl();
    const RegistrationOptions& opt = impl.options;
    const Moments mm = moments(moving);
    const auto pyramid = build_pyramid(moving, opt);

    std::vector<Samples> samples;
    for (const auto& lv : pyramid) {
        samples.push_back(collect_samples(lv, opt.band_mm, opt.max_samples));
    }

    // Initial guess: centroid alignment, optionally combined with each
    // proper sign assignment of the principal axes.
    std::vector<RigidTransform> candidates;
    const Vec3 cm = mm.centroid;
    const Vec3 cf = impl.moments.centroid;
    if (opt.moment_init) {
        candidates.push_back(RigidTransform::translation(cf - cm));
        const Mat3 em = principal_axes(mm.covariance);
        const Mat3 ef = principal_axes(impl.moments.covariance);
        const double want = determinant(em) * determinant(ef);
        for (int code = 0; code < 8; ++code) {
            const double s0 = (code & 1) ? -1.0 : 1.0;
            const double s1 = (code & 2) ? -1.0 : 1.0;
            const double s2 = (code & 4) ? -1.0 : 1.0;
            if (s0 * s1 * s2 * want < 0.0) {
                continue;
            }
            Mat3 ef_s = ef;
            for (int a = 0; a < 3; ++a) {
                ef_s[a][0] *= s0;
                ef_s[a][1] *= s1;
                ef_s[a][2] *= s2;
            }
            const Mat3 r = mat_mul(ef_s, transpose(em));
            candidates.emplace_back(r, cf - mat_vec(r, cm));
        }
    } else {
        candidates.push_back(RigidTransform::identity());
    }

    constexpr double deg = std::numbers::pi / 180.0;
    // One simplex search on pyramid level `li` starting from `start`.
    auto refine = [&](std::size_t li, const RigidTransform& start, SimplexResult* out) {
        const Level& fixed = impl.levels[li];
        const Samples& s = samples[li];
        const Vec3 center = start.apply(cm);
        const double f = static_cast<double>(pyramid[li].factor);
        const double rs = opt.rotation_step_deg * deg * f;
        const double ts = opt.translation_step_mm * f;
        auto cost = [&](const std::vector<double>& p) {
            return -objective(s, fixed, delta_transform(p, center) * start, opt.band_mm);
        };
        *out = nelder_mead(cost, std::vector<double>(6, 0.0), {rs, rs, rs, ts, ts, ts}, opt.max_iterations,
                           opt.tolerance);
        return delta_transform(out->x, center) * start;
    };

    // Hit the cap while the best value still moved by more than the
    // tolerance over the last tenth of the run (at least 5 iterations).
    auto still_improving = [&](const SimplexResult& sr) {
        if (sr.converged || sr.best_history.size() < 2) {
            return false;
        }
        const auto& h = sr.best_history;
        const std::size_t window = std::min(h.size() - 1, std::max<std::size_t>(5, h.size() / 10));
        return h[h.size() - 1 - window] - h.back() > opt.tolerance;
    };

    // Every candidate gets a coarse search. Symmetric shapes produce ties
    // between sign assignments; among near-equal optima the smallest rotation
    // wins, since inputs are assumed to be roughly upright.
    RigidTransform init = candidates.front();
    RigidTransform current = init;
    SimplexResult chosen;
    int iterations = 0;
    {
        std::vector<RigidTransform> refined;
        std::vector<SimplexResult> runs;
        std::vector<double> values;
        double best = -1e300;
        for (const auto& c : candidates) {
            SimplexResult sr;
            refined.push_back(refine(0, c, &sr));
            runs.push_back(sr);
            iterations += sr.iterations;
            values.push_back(-sr.value);
            best = std::max(best, -sr.value);
        }
        const double tie = kTieFraction * std::abs(best) + 1e-12;
        double best_angle = 1e300;
        for (std::size_t i = 0; i < candidates.size(); ++i) {
            const double angle = rotation_angle(refined[i].rotation());
            if (values[i] >= best - tie && angle < best_angle) {
                best_angle = angle;
                init = candidates[i];
                current = refined[i];
                chosen = runs[i];
            }
        }
    }

    RegistrationResult result;
    result.initial_transform = init;
    bool converged = !(pyramid.size() == 1 && still_improving(chosen));
    for (std::size_t li = 1; li < pyramid.size(); ++li) {
        SimplexResult sr;
        current = refine(li, current, &sr);
        iterations += sr.iterations;
        if (li + 1 == pyramid.size() && still_improving(sr)) {
            converged = false;
        }
    }
    result.iterations = iterations;

    const double final_value = objective(samples.back(), impl.levels.back(), current, opt.band_mm);
    const double init_value = objective(samples.back(), impl.levels.back(), init, opt.band_mm);
    result.initial_objective = init_value;
    if (final_value >= init_value) {
        result.transform = current;
        result.objective = final_value;
    } else {
        result.transform = init;
        result.objective = init_value;
    }
    result.converged = converged;
    return result;
}

RegistrationResult register_rigid(const VoxelGrid& moving, const VoxelGrid& fixed, const RegistrationOptions& options) {
    if (moving.empty()) {
        fail(ErrorCode::EmptyInput, "register_rigid: moving mask is empty");
    }
    if (fixed.empty()) {
        fail(ErrorCode::EmptyInput, "register_rigid: fixed mask is empty");
    }
    const RegistrationTarget target(fixed, options);
    return register_rigid(moving, target);
}

VoxelGrid resample(const VoxelGrid& m, const RigidTransform& transform, const GridGeometry& target,
                   Interpolation interp) {
    VoxelGrid out(target);
    const auto bb = bounding_box(m);
    if (!bb) {
        return out;
    }
    const GridGeometry& src = m.geometry();

    // Target index box covering the transformed source bounding box.
    Index3 lo{target.dims[0], target.dims[1], target.dims[2]};
    Index3 hi{-1, -1, -1};
    for (int c = 0; c < 8; ++c) {
        const Index3 corner{(c & 1) ? bb->hi[0] : bb->lo[0] - 1, (c & 2) ? bb->hi[1] : bb->lo[1] - 1,
                            (c & 4) ? bb->hi[2] : bb->lo[2] - 1};
        const Vec3 ci = target.continuous_index(transform.apply(src.world(corner)));
        for (int a = 0; a < 3; ++a) {
            lo[a] = std::min(lo[a], static_cast<std::int64_t>(std::floor(ci[a])) - 1);
            hi[a] = std::max(hi[a], static_cast<std::int64_t>(std::ceil(ci[a])) + 1);
        }
    }
    for (int a = 0; a < 3; ++a) {
        lo[a] = std::max<std::int64_t>(lo[a], 0);
        hi[a] = std::min<std::int64_t>(hi[a], target.dims[a] - 1);
        if (hi[a] < lo[a]) {
            return out;
        }
    }

    // Source continuous index as an affine function of the target index.
    const RigidTransform inv = transform.inverse();
    const Mat3 r = inv.rotation();
    const Vec3 base = src.continuous_index(inv.apply(target.origin));
    Vec3 step[3];
    for (int a = 0; a < 3; ++a) {
        for (int b = 0; b < 3; ++b) {
            step[a][b] = r[b][a] * target.spacing[a] / src.spacing[b];
        }
    }
    const Dims& sd = src.dims;
    for (std::int64_t k = lo[2]; k <= hi[2]; ++k) {
        for (std::int64_t j = lo[1]; j <= hi[1]; ++j) {
            const double kk = static_cast<double>(k), jj = static_cast<double>(j);
            const Vec3 row{base.x + jj * step[1].x + kk * step[2].x, base.y + jj * step[1].y + kk * step[2].y,
                           base.z + jj * step[1].z + kk * step[2].z};
            for (std::int64_t i = lo[0]; i <= hi[0]; ++i) {
                const double ii = static_cast<double>(i);
                const double cx = row.x + ii * step[0].x;
                const double cy = row.y + ii * step[0].y;
                const double cz = row.z + ii * step[0].z;
                if (interp == Interpolation::Nearest) {
                    const auto x = static_cast<std::int64_t>(std::floor(cx + 0.5));
                    const auto y = static_cast<std::int64_t>(std::floor(cy + 0.5));
                    const auto z = static_cast<std::int64_t>(std::floor(cz + 0.5));
                    if (x >= 0 && y >= 0 && z >= 0 && x < sd[0] && y < sd[1] && z < sd[2] && m.get(x, y, z)) {
                        out.set(i, j, k);
                    }
                    continue;
                }
                const double fx0 = std::floor(cx), fy0 = std::floor(cy), fz0 = std::floor(cz);
                const auto x0 = static_cast<std::int64_t>(fx0);
                const auto y0 = static_cast<std::int64_t>(fy0);
                const auto z0 = static_cast<std::int64_t>(fz0);
                if (x0 < -1 || y0 < -1 || z0 < -1 || x0 >= sd[0] || y0 >= sd[1] || z0 >= sd[2]) {
                    continue;
                }
                const double wx = cx - fx0, wy = cy - fy0, wz = cz - fz0;
                double acc = 0.0;
                for (int c = 0; c < 8; ++c) {
                    const std::int64_t x = x0 + (c & 1), y = y0 + ((c >> 1) & 1), z = z0 + ((c >> 2) & 1);
                    if (x < 0 || y < 0 || z < 0 || x >= sd[0] || y >= sd[1] || z >= sd[2] || !m.get(x, y, z)) {
                        continue;
                    }
                    acc += ((c & 1) ? wx : 1.0 - wx) * (((c >> 1) & 1) ? wy : 1.0 - wy) *
                           (((c >> 2) & 1) ? wz : 1.0 - wz);
                }
                if (acc >= 0.5) {
                    out.set(i, j, k);
                }
            }
        }
    }
    return out;
}

VoxelGrid map_back(const VoxelGrid& prediction, const RigidTransform& transform, const GridGeometry& original_geometry) {
    return resample(prediction, transform.inverse(), original_geometry, Interpolation::Nearest);
}

} // namespace craniotk
