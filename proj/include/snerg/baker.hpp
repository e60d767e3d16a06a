// Copyright 2026 The snerg-cpp Authors
// SPDX-License-Identifier: Apache-2.0

///
/// @file baker.hpp
/// Scene function -> block-sparse grid. A one-sample-per-voxel coarse pass
/// feeds culling (opacity and visibility towards the training cameras);
/// only surviving macroblocks are supersampled and packed into the atlas.
///

#pragma once

#include <snerg/core_math.hpp>
#include <snerg/grid.hpp>
#include <snerg/scene.hpp>

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace snerg {

struct BakeConfig
{
    int grid_resolution = 256;
    int block_size = 32;
    double alpha_threshold = 0.005;
    /// 0 disables visibility culling.
    double visibility_threshold = 0.01;
    int supersamples = 16;
    /// Defaults to the scene bounds.
    std::optional<Box> bounds;
    std::uint64_t seed = 0;

    void validate() const;
};

/// Counter-based generator (splitmix64 over an incrementing state), so any
/// voxel's samples can be drawn independently of every other voxel.
class CounterRng
{
public:
    explicit CounterRng(std::uint64_t key);

    std::uint64_t next();
    /// Uniform in [0, 1).
    double uniform();
    /// Standard normal via Box-Muller.
    double normal();

private:
    std::uint64_t state_;
    std::optional<double> spare_;
};

std::uint64_t splitmix64(std::uint64_t x);

/// Per-voxel key for supersampling, from the bake seed and a voxel index.
std::uint64_t voxel_seed(std::uint64_t seed, std::uint64_t voxel_index);

struct VoxelValue
{
    double alpha = 0.0;
    Vec3 diffuse = Vec3::Zero();
    Vec4 feature = Vec4::Zero();
};

/// Averages `count` scene evaluations at isotropic Gaussian offsets
/// (std voxel_width / sqrt(12)) around `center`, then converts the mean
/// density to opacity 1 - exp(-mean_sigma * voxel_width).
VoxelValue voxel_supersample(const SceneFunction& scene, const Vec3& center, double voxel_width,
                             int count, std::uint64_t seed);

/// Coarse bake state: per-macroblock dense payloads, B^3 voxels each.
/// A block has a payload iff its occupancy bit is set.
class DenseBlockGrid
{
public:
    struct Payload
    {
        std::vector<float> alpha;
        std::vector<float> diffuse;
        std::vector<float> feature;
    };

    DenseBlockGrid(int resolution, int block_size, Box bounds);

    int resolution() const { return resolution_; }
    int block_size() const { return block_size_; }
    int blocks_per_axis() const { return resolution_ / block_size_; }
    std::size_t block_count() const { return payloads_.size(); }
    const Box& bounds() const { return bounds_; }
    double voxel_width() const { return bounds_.extent().x() / resolution_; }

    bool occupied(std::size_t block) const { return payloads_[block].has_value(); }
    const std::optional<Payload>& payload(std::size_t block) const { return payloads_[block]; }
    void set_payload(std::size_t block, Payload payload) { payloads_[block] = std::move(payload); }
    void release(std::size_t block) { payloads_[block].reset(); }
    std::vector<std::uint8_t> occupancy() const;

    /// Alpha of voxel (x, y, z); 0 in blocks without payload.
    float alpha(int x, int y, int z) const;
    /// Largest voxel alpha in a block; 0 without payload.
    float max_alpha(std::size_t block) const;

    std::size_t block_index(int bx, int by, int bz) const
    {
        const auto n = static_cast<std::size_t>(blocks_per_axis());
        return (static_cast<std::size_t>(bz) * n + by) * n + bx;
    }
    Vec3 voxel_center(int x, int y, int z) const
    {
        return bounds_.min + (Vec3(x, y, z).array() + 0.5).matrix() * voxel_width();
    }

private:
    int resolution_;
    int block_size_;
    Box bounds_;
    std::vector<std::optional<Payload>> payloads_;
};

/// One scene evaluation at every voxel center. Blocks whose voxels all have
/// zero opacity get no payload.
DenseBlockGrid coarse_grid(const SceneFunction& scene, const BakeConfig& config);

/// Maximum over cameras of the transmittance from the voxel center towards
/// the camera, marching the alpha grid at one-voxel steps with
/// nearest-neighbor lookups.
double compute_visibility(const DenseBlockGrid& grid, std::array<int, 3> voxel,
                          std::span<const Camera> cameras);

/// Keeps a block iff the max coarse alpha over the block and the one-voxel
/// shell around it is >= alpha_threshold (supersampling blurs density about
/// one voxel outwards) and some voxel in it has visibility >=
/// visibility_threshold. Visibility is measured on the
/// grid as passed in (pre-culling); payloads of culled blocks are released
/// afterwards. Returns the occupancy mask (1 = kept).
std::vector<std::uint8_t> cull_blocks(DenseBlockGrid& grid, std::span<const Camera> cameras,
                                      const BakeConfig& config);

struct BakeStats
{
    std::size_t total_blocks = 0;
    std::size_t nonempty_blocks = 0;   ///< non-zero coarse alpha in the block or its one-voxel shell
    std::size_t culled_by_alpha = 0;
    std::size_t culled_by_visibility = 0;
    std::size_t occupied_blocks = 0;
};

/// Coarse pass, culling, then supersampling of every voxel (including the
/// +face border) of each surviving block. Throws CapacityError beyond
/// 255^3 occupied blocks.
SnergGrid bake(const SceneFunction& scene, std::span<const Camera> cameras, const BakeConfig& config,
               BakeStats* stats = nullptr);

/// Training rig used by the CLI and tests: `count` cameras on a sphere of
/// `radius` around the center of `bounds`.
std::vector<Camera> default_training_rig(const Box& bounds, int count = 32, double radius = 4.0);

} // namespace snerg
