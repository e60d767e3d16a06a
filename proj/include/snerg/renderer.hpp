// Copyright 2026 The snerg-cpp Authors
// SPDX-License-Identifier: Apache-2.0

///
/// @file renderer.hpp
/// CPU reference ray marcher for block-sparse grids.
///
/// Per ray: clip to the grid box, step at a fixed spacing (samples at
/// t_near + (k + 1/2) * step), jump over empty macroblocks with a ray-box
/// exit test, pre-check opacity with a nearest-neighbor fetch, trilinearly
/// fetch everything else, composite front to back until the transmittance
/// drops below the termination threshold, then run the shading network
/// once per pixel.
///
/// Templates are instantiated for SnergGrid (float) and QuantizedGrid
/// (uint8) in renderer.cpp.
///

#pragma once

#include <snerg/core_math.hpp>
#include <snerg/grid.hpp>
#include <snerg/mlp.hpp>
#include <snerg/png_io.hpp>
#include <snerg/scene.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace snerg {

struct RenderConfig
{
    /// World units; one voxel width when unset.
    std::optional<double> step_size;
    double termination_transmittance = 0.005;
    Vec3 background = Vec3::Ones();
    bool unpremultiply = false;
    /// Off forces dense stepping through empty macroblocks (same output).
    bool skip_empty = true;
    int width = 800;
    int height = 800;

    void validate() const;
};

struct VoxelSample
{
    double alpha = 0.0;
    Vec3 diffuse = Vec3::Zero();
    Vec4 feature = Vec4::Zero();
};

/// Fetch at continuous voxel coordinates (voxel i spans [i, i + 1], its
/// center is i + 1/2). The stencil is read from the block holding its lower
/// corner; if that block is empty and the position lies in the first half
/// voxel of an occupied block, the stencil is clamped to that block's lower
/// faces instead. No block -> nullopt. A zero nearest-neighbor alpha returns
/// zeros without touching color or features. Throws std::invalid_argument
/// outside [0, N]^3.
template <typename Grid>
std::optional<VoxelSample> trilinear_sample(const Grid& grid, const Vec3& voxel_position);

/// Scales diffuse and feature by min(1, 1.5 alpha) / alpha and sets alpha to
/// min(1, 1.5 alpha); identity for alpha = 0.
RayAccumulation unpremultiply_saturate(const RayAccumulation& acc);

/// The marching half of march_ray: accumulated diffuse, feature and alpha
/// (unpremultiplied when the config asks for it).
template <typename Grid>
RayAccumulation accumulate_ray(const Grid& grid, const Ray& ray, const RenderConfig& config);

/// Deferred shading plus background: shade_deferred(acc) + (1 - alpha) * bg,
/// clamped to [0, 1].
Vec3 finish_pixel(const DeferredMlp& mlp, const RayAccumulation& acc, const Vec3& direction,
                  const Vec3& background);

struct RayColor
{
    Vec3 color = Vec3::Zero();
    double alpha = 0.0;
};

template <typename Grid>
RayColor march_ray(const Grid& grid, const DeferredMlp& mlp, const Ray& ray, const RenderConfig& config);

/// Linear RGB in [0, 1], row-major, 3 floats per pixel.
struct Image
{
    int width = 0;
    int height = 0;
    std::vector<float> rgb;

    Image() = default;
    Image(int w, int h)
        : width(w)
        , height(h)
        , rgb(static_cast<std::size_t>(w) * h * 3, 0.0f)
    {
    }

    Vec3 pixel(int row, int col) const
    {
        const float* p = rgb.data() + (static_cast<std::size_t>(row) * width + col) * 3;
        return {p[0], p[1], p[2]};
    }
    void set_pixel(int row, int col, const Vec3& c)
    {
        float* p = rgb.data() + (static_cast<std::size_t>(row) * width + col) * 3;
        p[0] = static_cast<float>(c.x());
        p[1] = static_cast<float>(c.y());
        p[2] = static_cast<float>(c.z());
    }
};

struct StageTimes
{
    double march_ms = 0.0;
    double shade_ms = 0.0;
};

/// Marches every pixel, then shades every pixel. Camera size wins over the
/// config's width/height.
template <typename Grid>
Image render_frame(const Grid& grid, const DeferredMlp& mlp, const Camera& camera,
                   const RenderConfig& config, StageTimes* times = nullptr);

/// Dense quadrature straight through the scene function with the same
/// sample placement, termination and shading as the grid renderer. `step`
/// is in world units.
RayAccumulation accumulate_direct(const SceneFunction& scene, const Ray& ray, const RenderConfig& config,
                                  double step);
Image render_direct(const SceneFunction& scene, const DeferredMlp& mlp, const Camera& camera,
                    const RenderConfig& config, double step);

/// Peak 1.0; +inf for identical images.
double psnr(const Image& a, const Image& b);
double max_abs_diff(const Image& a, const Image& b);
double mean_abs_diff(const Image& a, const Image& b);

Image8 to_image8(const Image& image);
Image from_image8(const Image8& image);
void save_png(const std::filesystem::path& path, const Image& image);
Image load_png(const std::filesystem::path& path);

struct OrbitSpec
{
    Vec3 target = Vec3::Zero();
    double radius = 4.0;
    double elevation_deg = 30.0;
    double fov_deg = 39.0;
};

/// `frames` cameras at equal azimuth steps around the target.
std::vector<Camera> orbit_path(int frames, const OrbitSpec& orbit, int width, int height);

struct TimingReport
{
    int frames = 0;
    int width = 0;
    int height = 0;
    double frame_ms_mean = 0.0;
    double frame_ms_min = 0.0;
    double frame_ms_max = 0.0;
    double march_ms_mean = 0.0;
    double shade_ms_mean = 0.0;
};

template <typename Grid>
TimingReport benchmark_orbit(const Grid& grid, const DeferredMlp& mlp, int frames,
                             const RenderConfig& config, const OrbitSpec& orbit = {});

/// key=value lines: frame_ms_mean, frame_ms_min, frame_ms_max, frames,
/// width, height, march_ms_mean, shade_ms_mean.
std::string format_report(const TimingReport& report);
void write_report(const std::filesystem::path& path, const TimingReport& report);

extern template std::optional<VoxelSample> trilinear_sample(const SnergGrid&, const Vec3&);
extern template std::optional<VoxelSample> trilinear_sample(const QuantizedGrid&, const Vec3&);
extern template RayAccumulation accumulate_ray(const SnergGrid&, const Ray&, const RenderConfig&);
extern template RayAccumulation accumulate_ray(const QuantizedGrid&, const Ray&, const RenderConfig&);
extern template RayColor march_ray(const SnergGrid&, const DeferredMlp&, const Ray&, const RenderConfig&);
extern template RayColor march_ray(const QuantizedGrid&, const DeferredMlp&, const Ray&, const RenderConfig&);
extern template Image render_frame(const SnergGrid&, const DeferredMlp&, const Camera&, const RenderConfig&,
                                   StageTimes*);
extern template Image render_frame(const QuantizedGrid&, const DeferredMlp&, const Camera&,
                                   const RenderConfig&, StageTimes*);
extern template TimingReport benchmark_orbit(const SnergGrid&, const DeferredMlp&, int, const RenderConfig&,
                                             const OrbitSpec&);
extern template TimingReport benchmark_orbit(const QuantizedGrid&, const DeferredMlp&, int,
                                             const RenderConfig&, const OrbitSpec&);

} // namespace snerg
