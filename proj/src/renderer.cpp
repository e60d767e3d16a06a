// Copyright 2026 The snerg-cpp Authors
// SPDX-License-Identifier: Apache-2.0

#include <snerg/parallel.hpp>
#include <snerg/renderer.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace snerg {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start)
{
    return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

template <typename T>
constexpr double unit_scale()
{
    return std::is_same_v<T, std::uint8_t> ? 1.0 / 255.0 : 1.0;
}

/// Lower lattice corner of the trilinear stencil at `pos`, clamped so the
/// stencil stays inside [0, N - 1] (+1 border).
struct Lattice
{
    int index[3];
    double frac[3];
};

inline Lattice lattice_at(const Vec3& pos, int n)
{
    Lattice l;
    for (int a = 0; a < 3; ++a) {
        const double u = std::clamp(pos[a] - 0.5, 0.0, static_cast<double>(n - 1));
        const int i = std::min(static_cast<int>(u), n - 1);
        l.index[a] = i;
        l.frac[a] = u - i;
    }
    return l;
}

template <typename Grid>
VoxelSample sample_block(const Grid& grid, AtlasRef ref, const Lattice& l)
{
    using T = typename Grid::value_type;
    const GridLayout& layout = grid.layout();
    const int b = layout.block_size;
    const int lx = l.index[0] % b;
    const int ly = l.index[1] % b;
    const int lz = l.index[2] % b;

    const std::size_t nearest = layout.atlas_voxel(ref, lx + (l.frac[0] >= 0.5), ly + (l.frac[1] >= 0.5),
                                                   lz + (l.frac[2] >= 0.5));
    if (grid.alpha()[nearest] == T(0)) {
        return VoxelSample{};
    }

    const auto dims = layout.atlas_voxels();
    const std::size_t sx = 1;
    const std::size_t sy = static_cast<std::size_t>(dims[0]);
    const std::size_t sz = sy * dims[1];
    const std::size_t base = layout.atlas_voxel(ref, lx, ly, lz);
    const double fx = l.frac[0];
    const double fy = l.frac[1];
    const double fz = l.frac[2];

    const T* alpha = grid.alpha().data();
    const T* rgb = grid.rgb().data();
    const T* feat = grid.features().data();
    double a = 0.0;
    double c[3] = {0.0, 0.0, 0.0};
    double f[4] = {0.0, 0.0, 0.0, 0.0};
    for (int corner = 0; corner < 8; ++corner) {
        const int dx = corner & 1;
        const int dy = (corner >> 1) & 1;
        const int dz = (corner >> 2) & 1;
        const double w = (dx ? fx : 1.0 - fx) * (dy ? fy : 1.0 - fy) * (dz ? fz : 1.0 - fz);
        const std::size_t v = base + dx * sx + dy * sy + dz * sz;
        a += w * alpha[v];
        for (int k = 0; k < 3; ++k) {
            c[k] += w * rgb[3 * v + k];
        }
        for (int k = 0; k < 4; ++k) {
            f[k] += w * feat[4 * v + k];
        }
    }
    constexpr double s = unit_scale<T>();
    return VoxelSample{a * s, Vec3(c[0], c[1], c[2]) * s, Vec4(f[0], f[1], f[2], f[3]) * s};
}

template <typename Grid>
AtlasRef block_of(const Grid& grid, const Lattice& l)
{
    const int b = grid.layout().block_size;
    return grid.block(l.index[0] / b, l.index[1] / b, l.index[2] / b);
}

/// Block used for the stencil at `pos` (voxel units). Normally the block of
/// the lattice corner; when that one is empty but `pos` itself lies in the
/// first half voxel of an occupied block, that block is used with the
/// stencil clamped to its lower faces. Adjusts `l` in that case.
template <typename Grid>
AtlasRef resolve_block(const Grid& grid, const Vec3& pos, Lattice& l)
{
    const AtlasRef ref = block_of(grid, l);
    if (!ref.empty()) {
        return ref;
    }
    const GridLayout& layout = grid.layout();
    const int b = layout.block_size;
    const int n = layout.resolution;
    int pb[3];
    bool moved = false;
    for (int a = 0; a < 3; ++a) {
        const int cell = std::clamp(static_cast<int>(std::floor(pos[a])), 0, n - 1);
        pb[a] = cell / b;
        moved = moved || pb[a] != l.index[a] / b;
    }
    if (!moved) {
        return ref;
    }
    const AtlasRef own = grid.block(pb[0], pb[1], pb[2]);
    if (own.empty()) {
        return own;
    }
    for (int a = 0; a < 3; ++a) {
        if (l.index[a] < pb[a] * b) {
            l.index[a] = pb[a] * b;
            l.frac[a] = 0.0;
        }
    }
    return own;
}

template <typename Grid>
std::optional<VoxelSample> sample_clamped(const Grid& grid, const Vec3& pos)
{
    Lattice l = lattice_at(pos, grid.layout().resolution);
    const AtlasRef ref = resolve_block(grid, pos, l);
    if (ref.empty()) {
        return std::nullopt;
    }
    return sample_block(grid, ref, l);
}

/// Ray parameter at which the ray leaves the empty region around lattice
/// corner `l`: positions in [cS + 1/2, (c + 1)S) per axis, where S spans
/// 2^level macroblocks, have both their stencil corner and their own voxel in
/// the cell. Open-ended at the grid faces to match lattice clamping. +inf if
/// the ray never leaves; -inf if `pos` is not inside the region.
double empty_region_exit(const GridLayout& layout, const Lattice& l, int level, const Vec3& pos,
                         const Vec3& origin_v, const Vec3& inv_dir_v)
{
    const int span = layout.block_size << level;
    const int n = layout.resolution;
    double t_exit = std::numeric_limits<double>::infinity();
    for (int a = 0; a < 3; ++a) {
        const int cell = l.index[a] / span;
        const bool open_lo = cell == 0;
        const bool open_hi = (cell + 1) * span >= n;
        const double lo = cell * span + 0.5;
        const double hi = (cell + 1) * span;
        if ((!open_lo && pos[a] < lo) || (!open_hi && pos[a] >= hi)) {
            return -std::numeric_limits<double>::infinity();
        }
        const double inv = inv_dir_v[a];
        if (inv > 0.0 && !open_hi && std::isfinite(inv)) {
            t_exit = std::min(t_exit, (hi - origin_v[a]) * inv);
        } else if (inv < 0.0 && !open_lo && std::isfinite(inv)) {
            t_exit = std::min(t_exit, (lo - origin_v[a]) * inv);
        }
    }
    return t_exit;
}

/// Coarsest pyramid level whose cell around the empty block is empty too.
template <typename Grid>
int empty_level(const Grid& grid, const Lattice& l)
{
    const int b = grid.layout().block_size;
    const int bx = l.index[0] / b;
    const int by = l.index[1] / b;
    const int bz = l.index[2] / b;
    int level = 0;
    while (level < grid.occupancy_levels() && !grid.region_occupied(level + 1, bx, by, bz)) {
        ++level;
    }
    return level;
}

} // namespace

void RenderConfig::validate() const
{
    if (step_size && !(*step_size > 0.0)) {
        throw std::invalid_argument("step size must be positive");
    }
    if (!(termination_transmittance >= 0.0 && termination_transmittance < 1.0)) {
        throw std::invalid_argument("termination transmittance must be in [0, 1)");
    }
    if (width < 1 || height < 1) {
        throw std::invalid_argument("image size must be at least 1x1");
    }
}

template <typename Grid>
std::optional<VoxelSample> trilinear_sample(const Grid& grid, const Vec3& pos)
{
    const double n = grid.layout().resolution;
    if (!pos.allFinite() || (pos.array() < 0.0).any() || (pos.array() > n).any()) {
        throw std::invalid_argument("trilinear_sample: position outside the grid");
    }
    return sample_clamped(grid, pos);
}

RayAccumulation unpremultiply_saturate(const RayAccumulation& acc)
{
    if (!(acc.alpha > 0.0)) {
        return acc;
    }
    const double target = std::min(1.0, 1.5 * acc.alpha);
    const double scale = target / acc.alpha;
    return {acc.diffuse * scale, acc.feature * scale, target};
}

template <typename Grid>
RayAccumulation accumulate_ray(const Grid& grid, const Ray& ray, const RenderConfig& config)
{
    const GridLayout& layout = grid.layout();
    const auto hit = ray_box_intersect(ray, layout.bounds.min, layout.bounds.max);
    if (!hit) {
        return {};
    }
    const double v = layout.voxel_width();
    const double step = config.step_size.value_or(v);
    const double ratio = step / v;
    const bool unit_ratio = std::abs(ratio - 1.0) < 1e-12;
    const Vec3 origin_v = layout.to_voxel(ray.origin);
    const Vec3 dir_v = ray.direction / v;
    const Vec3 inv_dir_v = dir_v.cwiseInverse();
    const double t0 = hit->t_near;
    const double t1 = hit->t_far;

    FrontToBack comp;
    for (long k = 0;; ++k) {
        const double t = t0 + (k + 0.5) * step;
        if (t >= t1) {
            break;
        }
        const Vec3 pos = origin_v + t * dir_v;
        Lattice l = lattice_at(pos, layout.resolution);
        const AtlasRef ref = resolve_block(grid, pos, l);
        if (ref.empty()) {
            if (config.skip_empty) {
                const double t_exit =
                    empty_region_exit(layout, l, empty_level(grid, l), pos, origin_v, inv_dir_v);
                if (t_exit == std::numeric_limits<double>::infinity()) {
                    break;
                }
                // First sample at or past the exit; the margin re-tests a
                // sample sitting exactly on the boundary instead of dropping it.
                const double next = std::ceil((t_exit - t0) / step - 0.5 - 1e-6);
                if (next > static_cast<double>(k + 1)) {
                    k = static_cast<long>(next) - 1;
                }
            }
            continue;
        }
        const VoxelSample s = sample_block(grid, ref, l);
        if (s.alpha <= 0.0) {
            continue;
        }
        const double a = std::min(s.alpha, 1.0);
        const double opacity = unit_ratio ? a : (a >= 1.0 ? 1.0 : -std::expm1(ratio * std::log1p(-a)));
        comp.add(opacity, s.diffuse, s.feature);
        if (comp.transmittance() < config.termination_transmittance) {
            break;
        }
    }
    const RayAccumulation acc = comp.result();
    return config.unpremultiply ? unpremultiply_saturate(acc) : acc;
}

Vec3 finish_pixel(const DeferredMlp& mlp, const RayAccumulation& acc, const Vec3& direction,
                  const Vec3& background)
{
    const Vec3 c = shade_deferred(mlp, acc, direction) + (1.0 - acc.alpha) * background;
    return c.cwiseMax(0.0).cwiseMin(1.0);
}

template <typename Grid>
RayColor march_ray(const Grid& grid, const DeferredMlp& mlp, const Ray& ray, const RenderConfig& config)
{
    const RayAccumulation acc = accumulate_ray(grid, ray, config);
    return {finish_pixel(mlp, acc, ray.direction, config.background), acc.alpha};
}

namespace {

template <typename AccumulateFn>
Image render_deferred(const DeferredMlp& mlp, const Camera& camera, const RenderConfig& config,
                      StageTimes* times, AccumulateFn&& accumulate)
{
    camera.validate();
    const int w = camera.width;
    const int h = camera.height;
    std::vector<RayAccumulation> gbuffer(static_cast<std::size_t>(w) * h);
    std::vector<Vec3> directions(gbuffer.size());

    auto start = Clock::now();
    parallel_for(0, h, [&](std::size_t row) {
        for (int col = 0; col < w; ++col) {
            const Ray ray = generate_ray(camera, static_cast<int>(row), col);
            const std::size_t i = row * w + col;
            gbuffer[i] = accumulate(ray);
            directions[i] = ray.direction;
        }
    });
    const double march_ms = ms_since(start);

    start = Clock::now();
    Image img(w, h);
    parallel_for(0, h, [&](std::size_t row) {
        for (int col = 0; col < w; ++col) {
            const std::size_t i = row * w + col;
            img.set_pixel(static_cast<int>(row), col,
                          finish_pixel(mlp, gbuffer[i], directions[i], config.background));
        }
    });
    if (times) {
        times->march_ms = march_ms;
        times->shade_ms = ms_since(start);
    }
    return img;
}

} // namespace

template <typename Grid>
Image render_frame(const Grid& grid, const DeferredMlp& mlp, const Camera& camera, const RenderConfig& config,
                   StageTimes* times)
{
    config.validate();
    return render_deferred(mlp, camera, config, times,
                           [&](const Ray& ray) { return accumulate_ray(grid, ray, config); });
}

RayAccumulation accumulate_direct(const SceneFunction& scene, const Ray& ray, const RenderConfig& config,
                                  double step)
{
    if (!(step > 0.0)) {
        throw std::invalid_argument("accumulate_direct: step must be positive");
    }
    const auto hit = ray_box_intersect(ray, scene.bounds().min, scene.bounds().max);
    if (!hit) {
        return {};
    }
    FrontToBack comp;
    for (long k = 0;; ++k) {
        const double t = hit->t_near + (k + 0.5) * step;
        if (t >= hit->t_far) {
            break;
        }
        const SampleValue s = scene.eval(ray.at(t));
        if (s.density <= 0.0) {
            continue;
        }
        comp.add_thickness(s.density * step, s.diffuse, s.feature);
        if (comp.transmittance() < config.termination_transmittance) {
            break;
        }
    }
    const RayAccumulation acc = comp.result();
    return config.unpremultiply ? unpremultiply_saturate(acc) : acc;
}

Image render_direct(const SceneFunction& scene, const DeferredMlp& mlp, const Camera& camera,
                    const RenderConfig& config, double step)
{
    config.validate();
    return render_deferred(mlp, camera, config, nullptr,
                           [&](const Ray& ray) { return accumulate_direct(scene, ray, config, step); });
}

namespace {

void require_same_size(const Image& a, const Image& b)
{
    if (a.width != b.width || a.height != b.height) {
        throw std::invalid_argument("images differ in size");
    }
}

} // namespace

double psnr(const Image& a, const Image& b)
{
    require_same_size(a, b);
    double se = 0.0;
    for (std::size_t i = 0; i < a.rgb.size(); ++i) {
        const double d = static_cast<double>(a.rgb[i]) - b.rgb[i];
        se += d * d;
    }
    if (se == 0.0) {
        return std::numeric_limits<double>::infinity();
    }
    return -10.0 * std::log10(se / static_cast<double>(a.rgb.size()));
}

double max_abs_diff(const Image& a, const Image& b)
{
    require_same_size(a, b);
    double m = 0.0;
    for (std::size_t i = 0; i < a.rgb.size(); ++i) {
        m = std::max(m, std::abs(static_cast<double>(a.rgb[i]) - b.rgb[i]));
    }
    return m;
}

double mean_abs_diff(const Image& a, const Image& b)
{
    require_same_size(a, b);
    double s = 0.0;
    for (std::size_t i = 0; i < a.rgb.size(); ++i) {
        s += std::abs(static_cast<double>(a.rgb[i]) - b.rgb[i]);
    }
    return a.rgb.empty() ? 0.0 : s / static_cast<double>(a.rgb.size());
}

Image8 to_image8(const Image& image)
{
    Image8 out{image.width, image.height, 3, std::vector<std::uint8_t>(image.rgb.size())};
    std::transform(image.rgb.begin(), image.rgb.end(), out.data.begin(),
                   [](float v) { return quantize8(v); });
    return out;
}

Image from_image8(const Image8& image)
{
    if (image.channels != 3 && image.channels != 4) {
        throw std::invalid_argument("expected an RGB or RGBA image");
    }
    Image out(image.width, image.height);
    for (std::size_t p = 0; p < static_cast<std::size_t>(image.width) * image.height; ++p) {
        for (int c = 0; c < 3; ++c) {
            out.rgb[3 * p + c] = static_cast<float>(dequantize8(image.data[p * image.channels + c]));
        }
    }
    return out;
}

void save_png(const std::filesystem::path& path, const Image& image)
{
    write_file(path, encode_png(to_image8(image)));
}

Image load_png(const std::filesystem::path& path) { return from_image8(decode_png(read_file(path))); }

std::vector<Camera> orbit_path(int frames, const OrbitSpec& orbit, int width, int height)
{
    if (frames < 1) {
        throw std::invalid_argument("orbit needs at least one frame");
    }
    const double focal = focal_from_fov(orbit.fov_deg, width);
    std::vector<Camera> cams;
    cams.reserve(frames);
    for (int i = 0; i < frames; ++i) {
        cams.push_back(orbit_camera(orbit.target, orbit.radius, orbit.elevation_deg, 360.0 * i / frames, focal,
                                    width, height));
    }
    return cams;
}

template <typename Grid>
TimingReport benchmark_orbit(const Grid& grid, const DeferredMlp& mlp, int frames, const RenderConfig& config,
                             const OrbitSpec& orbit)
{
    config.validate();
    const auto cams = orbit_path(frames, orbit, config.width, config.height);
    TimingReport r;
    r.frames = frames;
    r.width = config.width;
    r.height = config.height;
    r.frame_ms_min = std::numeric_limits<double>::infinity();
    double total = 0.0;
    double march = 0.0;
    double shade = 0.0;
    for (const Camera& cam : cams) {
        StageTimes st;
        const auto start = Clock::now();
        const Image img = render_frame(grid, mlp, cam, config, &st);
        const double ms = ms_since(start);
        total += ms;
        march += st.march_ms;
        shade += st.shade_ms;
        r.frame_ms_min = std::min(r.frame_ms_min, ms);
        r.frame_ms_max = std::max(r.frame_ms_max, ms);
    }
    r.frame_ms_mean = total / frames;
    r.march_ms_mean = march / frames;
    r.shade_ms_mean = shade / frames;
    if (frames == 1) {
        r.frame_ms_min = r.frame_ms_max = r.frame_ms_mean;
    }
    return r;
}

std::string format_report(const TimingReport& r)
{
    std::ostringstream out;
    out.precision(6);
    out << std::fixed;
    out << "frame_ms_mean=" << r.frame_ms_mean << "\n"
        << "frame_ms_min=" << r.frame_ms_min << "\n"
        << "frame_ms_max=" << r.frame_ms_max << "\n"
        << "frames=" << r.frames << "\n"
        << "width=" << r.width << "\n"
        << "height=" << r.height << "\n"
        << "march_ms_mean=" << r.march_ms_mean << "\n"
        << "shade_ms_mean=" << r.shade_ms_mean << "\n";
    return out.str();
}

void write_report(const std::filesystem::path& path, const TimingReport& report)
{
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw std::runtime_error("cannot write report " + path.string());
    }
    out << format_report(report);
}

template std::optional<VoxelSample> trilinear_sample(const SnergGrid&, const Vec3&);
template std::optional<VoxelSample> trilinear_sample(const QuantizedGrid&, const Vec3&);
template RayAccumulation accumulate_ray(const SnergGrid&, const Ray&, const RenderConfig&);
template RayAccumulation accumulate_ray(const QuantizedGrid&, const Ray&, const RenderConfig&);
template RayColor march_ray(const SnergGrid&, const DeferredMlp&, const Ray&, const RenderConfig&);
template RayColor march_ray(const QuantizedGrid&, const DeferredMlp&, const Ray&, const RenderConfig&);
template Image render_frame(const SnergGrid&, const DeferredMlp&, const Camera&, const RenderConfig&, StageTimes*);
template Image render_frame(const QuantizedGrid&, const DeferredMlp&, const Camera&, const RenderConfig&,
                            StageTimes*);
template TimingReport benchmark_orbit(const SnergGrid&, const DeferredMlp&, int, const RenderConfig&,
                                      const OrbitSpec&);
template TimingReport benchmark_orbit(const QuantizedGrid&, const DeferredMlp&, int, const RenderConfig&,
                                      const OrbitSpec&);

} // namespace snerg
