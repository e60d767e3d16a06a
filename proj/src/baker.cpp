// Copyright 2026 The snerg-cpp Authors
// SPDX-License-Identifier: Apache-2.0

#include <snerg/baker.hpp>
#include <snerg/parallel.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

namespace snerg {

namespace {

enum class CullReason : std::uint8_t { Kept, Empty, LowAlpha, Invisible };

/// Transmittance from `from` towards `to` through the alpha grid. Returns
/// early once it drops below `stop_below`.
double march_transmittance(const DenseBlockGrid& grid, const Vec3& from, const Vec3& to,
                           double stop_below)
{
    Vec3 dir = to - from;
    const double length = dir.norm();
    if (length == 0.0) {
        return 1.0;
    }
    dir /= length;
    const double v = grid.voxel_width();
    const int n = grid.resolution();
    const Vec3& lo = grid.bounds().min;
    double t = 1.0;
    for (int k = 1; k * v < length; ++k) {
        const Vec3 p = (from + (k * v) * dir - lo) / v;
        const Vec3 f = p.array().floor();
        if ((f.array() < 0.0).any() || (f.array() >= n).any()) {
            break;
        }
        t *= 1.0 - grid.alpha(static_cast<int>(f.x()), static_cast<int>(f.y()), static_cast<int>(f.z()));
        if (t < stop_below || t == 0.0) {
            break;
        }
    }
    return t;
}

/// Largest coarse alpha over the block and the one-voxel shell around it.
/// Supersampling spreads density about a voxel outwards, so a block whose
/// own voxel centers all miss a surface can still bake to non-zero alpha.
float reach_alpha(const DenseBlockGrid& grid, int bx, int by, int bz, float enough)
{
    float best = grid.max_alpha(grid.block_index(bx, by, bz));
    if (best >= enough) {
        return best;
    }
    const int b = grid.block_size();
    const int nb = grid.blocks_per_axis();
    const int n = grid.resolution();
    const int lo[3] = {bx * b - 1, by * b - 1, bz * b - 1};
    for (int dz = -1; dz <= 1; ++dz) {
        for (int dy = -1; dy <= 1; ++dy) {
            for (int dx = -1; dx <= 1; ++dx) {
                const int nx = bx + dx;
                const int ny = by + dy;
                const int nz = bz + dz;
                if ((dx == 0 && dy == 0 && dz == 0) || nx < 0 || ny < 0 || nz < 0 || nx >= nb || ny >= nb ||
                    nz >= nb || !grid.occupied(grid.block_index(nx, ny, nz))) {
                    continue;
                }
                // Shell voxels that fall inside neighbor (nx, ny, nz).
                int from[3];
                int to[3];
                const int d[3] = {dx, dy, dz};
                for (int a = 0; a < 3; ++a) {
                    from[a] = d[a] < 0 ? lo[a] : d[a] == 0 ? lo[a] + 1 : lo[a] + b + 1;
                    to[a] = d[a] < 0 ? lo[a] : d[a] == 0 ? lo[a] + b : lo[a] + b + 1;
                    from[a] = std::max(from[a], 0);
                    to[a] = std::min(to[a], n - 1);
                }
                for (int z = from[2]; z <= to[2]; ++z) {
                    for (int y = from[1]; y <= to[1]; ++y) {
                        for (int x = from[0]; x <= to[0]; ++x) {
                            best = std::max(best, grid.alpha(x, y, z));
                        }
                    }
                }
                if (best >= enough) {
                    return best;
                }
            }
        }
    }
    return best;
}

std::vector<CullReason> classify_blocks(const DenseBlockGrid& grid, std::span<const Camera> cameras,
                                        const BakeConfig& config)
{
    const int b = grid.block_size();
    const int nb = grid.blocks_per_axis();
    std::vector<CullReason> reasons(grid.block_count(), CullReason::Empty);
    const auto tau = static_cast<float>(config.alpha_threshold);
    parallel_for(0, grid.block_count(), [&](std::size_t block) {
        const int bx = static_cast<int>(block % nb);
        const int by = static_cast<int>((block / nb) % nb);
        const int bz = static_cast<int>(block / (static_cast<std::size_t>(nb) * nb));
        const float reach = reach_alpha(grid, bx, by, bz, std::max(tau, std::numeric_limits<float>::min()));
        if (reach <= 0.0f) {
            return;
        }
        if (reach < tau) {
            reasons[block] = CullReason::LowAlpha;
            return;
        }
        if (config.visibility_threshold <= 0.0) {
            reasons[block] = CullReason::Kept;
            return;
        }
        reasons[block] = CullReason::Invisible;
        for (int z = 0; z < b; ++z) {
            for (int y = 0; y < b; ++y) {
                for (int x = 0; x < b; ++x) {
                    const Vec3 c = grid.voxel_center(bx * b + x, by * b + y, bz * b + z);
                    for (const Camera& cam : cameras) {
                        if (march_transmittance(grid, c, cam.position, config.visibility_threshold) >=
                            config.visibility_threshold) {
                            reasons[block] = CullReason::Kept;
                            return;
                        }
                    }
                }
            }
        }
    });
    return reasons;
}

} // namespace

void BakeConfig::validate() const
{
    if (block_size < 2) {
        throw std::invalid_argument("block size must be at least 2");
    }
    if (grid_resolution < block_size || grid_resolution % block_size != 0) {
        throw std::invalid_argument("grid resolution " + std::to_string(grid_resolution) +
                                    " must be a positive multiple of block size " +
                                    std::to_string(block_size));
    }
    if (!(alpha_threshold >= 0.0 && alpha_threshold < 1.0)) {
        throw std::invalid_argument("alpha threshold must be in [0, 1)");
    }
    if (!(visibility_threshold >= 0.0 && visibility_threshold < 1.0)) {
        throw std::invalid_argument("visibility threshold must be in [0, 1)");
    }
    if (supersamples < 1) {
        throw std::invalid_argument("supersample count must be at least 1");
    }
}

std::uint64_t splitmix64(std::uint64_t x)
{
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t voxel_seed(std::uint64_t seed, std::uint64_t voxel_index)
{
    return splitmix64(splitmix64(seed + 0x9e3779b97f4a7c15ULL) ^ voxel_index);
}

CounterRng::CounterRng(std::uint64_t key)
    : state_(key)
{
}

std::uint64_t CounterRng::next()
{
    state_ += 0x9e3779b97f4a7c15ULL;
    return splitmix64(state_);
}

double CounterRng::uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

double CounterRng::normal()
{
    if (spare_) {
        const double s = *spare_;
        spare_.reset();
        return s;
    }
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    return r * std::cos(theta);
}

VoxelValue voxel_supersample(const SceneFunction& scene, const Vec3& center, double voxel_width,
                             int count, std::uint64_t seed)
{
    if (!(voxel_width > 0.0) || count < 1) {
        throw std::invalid_argument("voxel_supersample needs voxel_width > 0 and count >= 1");
    }
    CounterRng rng(seed);
    const double sd = voxel_width / std::sqrt(12.0);
    double density = 0.0;
    Vec3 diffuse = Vec3::Zero();
    Vec4 feature = Vec4::Zero();
    for (int s = 0; s < count; ++s) {
        const double ox = rng.normal();
        const double oy = rng.normal();
        const double oz = rng.normal();
        const SampleValue v = scene.eval(center + sd * Vec3(ox, oy, oz));
        density += v.density;
        diffuse += v.diffuse;
        feature += v.feature;
    }
    const double inv = 1.0 / count;
    return {-std::expm1(-density * inv * voxel_width), diffuse * inv, feature * inv};
}

DenseBlockGrid::DenseBlockGrid(int resolution, int block_size, Box bounds)
    : resolution_(resolution)
    , block_size_(block_size)
    , bounds_(std::move(bounds))
{
    GridLayout{resolution, block_size, bounds_, {0, 0, 0}}.validate();
    const auto nb = static_cast<std::size_t>(resolution / block_size);
    payloads_.resize(nb * nb * nb);
}

std::vector<std::uint8_t> DenseBlockGrid::occupancy() const
{
    std::vector<std::uint8_t> mask(payloads_.size());
    for (std::size_t i = 0; i < mask.size(); ++i) {
        mask[i] = payloads_[i] ? 1 : 0;
    }
    return mask;
}

float DenseBlockGrid::alpha(int x, int y, int z) const
{
    const int b = block_size_;
    const auto& p = payloads_[block_index(x / b, y / b, z / b)];
    if (!p) {
        return 0.0f;
    }
    return p->alpha[(static_cast<std::size_t>(z % b) * b + y % b) * b + x % b];
}

float DenseBlockGrid::max_alpha(std::size_t block) const
{
    const auto& p = payloads_[block];
    return p ? *std::max_element(p->alpha.begin(), p->alpha.end()) : 0.0f;
}

DenseBlockGrid coarse_grid(const SceneFunction& scene, const BakeConfig& config)
{
    config.validate();
    DenseBlockGrid grid(config.grid_resolution, config.block_size, config.bounds.value_or(scene.bounds()));
    const int b = config.block_size;
    const int nb = grid.blocks_per_axis();
    const double v = grid.voxel_width();
    const std::size_t voxels = static_cast<std::size_t>(b) * b * b;
    parallel_for(0, grid.block_count(), [&](std::size_t block) {
        const int bx = static_cast<int>(block % nb);
        const int by = static_cast<int>((block / nb) % nb);
        const int bz = static_cast<int>(block / (static_cast<std::size_t>(nb) * nb));
        DenseBlockGrid::Payload p;
        p.alpha.resize(voxels);
        p.diffuse.resize(3 * voxels);
        p.feature.resize(4 * voxels);
        bool any = false;
        std::size_t i = 0;
        for (int z = 0; z < b; ++z) {
            for (int y = 0; y < b; ++y) {
                for (int x = 0; x < b; ++x, ++i) {
                    const SampleValue s = scene.eval(grid.voxel_center(bx * b + x, by * b + y, bz * b + z));
                    const float a = static_cast<float>(-std::expm1(-s.density * v));
                    any = any || a > 0.0f;
                    p.alpha[i] = a;
                    for (int c = 0; c < 3; ++c) {
                        p.diffuse[3 * i + c] = static_cast<float>(s.diffuse[c]);
                    }
                    for (int c = 0; c < 4; ++c) {
                        p.feature[4 * i + c] = static_cast<float>(s.feature[c]);
                    }
                }
            }
        }
        if (any) {
            grid.set_payload(block, std::move(p));
        }
    });
    return grid;
}

double compute_visibility(const DenseBlockGrid& grid, std::array<int, 3> voxel,
                          std::span<const Camera> cameras)
{
    for (int a : voxel) {
        if (a < 0 || a >= grid.resolution()) {
            throw std::invalid_argument("compute_visibility: voxel index out of range");
        }
    }
    const Vec3 c = grid.voxel_center(voxel[0], voxel[1], voxel[2]);
    double best = 0.0;
    for (const Camera& cam : cameras) {
        best = std::max(best, march_transmittance(grid, c, cam.position, 0.0));
        if (best >= 1.0) {
            break;
        }
    }
    return best;
}

std::vector<std::uint8_t> cull_blocks(DenseBlockGrid& grid, std::span<const Camera> cameras,
                                      const BakeConfig& config)
{
    config.validate();
    const auto reasons = classify_blocks(grid, cameras, config);
    std::vector<std::uint8_t> mask(reasons.size(), 0);
    for (std::size_t i = 0; i < reasons.size(); ++i) {
        if (reasons[i] == CullReason::Kept) {
            mask[i] = 1;
        } else {
            grid.release(i);
        }
    }
    return mask;
}

SnergGrid bake(const SceneFunction& scene, std::span<const Camera> cameras, const BakeConfig& config,
               BakeStats* stats)
{
    config.validate();
    DenseBlockGrid coarse = coarse_grid(scene, config);
    const auto reasons = classify_blocks(coarse, cameras, config);

    BakeStats local;
    local.total_blocks = reasons.size();
    std::vector<std::size_t> kept;
    for (std::size_t i = 0; i < reasons.size(); ++i) {
        switch (reasons[i]) {
        case CullReason::Kept: kept.push_back(i); break;
        case CullReason::LowAlpha: ++local.culled_by_alpha; break;
        case CullReason::Invisible: ++local.culled_by_visibility; break;
        case CullReason::Empty: break;
        }
        if (reasons[i] != CullReason::Empty) {
            ++local.nonempty_blocks;
        }
    }
    local.occupied_blocks = kept.size();
    if (stats) {
        *stats = local;
    }
    coarse = DenseBlockGrid(coarse.resolution(), coarse.block_size(), coarse.bounds());

    GridLayout layout{config.grid_resolution, config.block_size, config.bounds.value_or(scene.bounds()),
                      atlas_shape_for(kept.size())};
    layout.validate();
    const std::size_t voxels = layout.atlas_voxel_count();
    std::vector<float> alpha(voxels, 0.0f);
    std::vector<float> rgb(3 * voxels, 0.0f);
    std::vector<float> features(4 * voxels, 0.0f);
    std::vector<AtlasRef> indirection(layout.block_count(), kEmptyBlock);

    const int b = layout.block_size;
    const int nb = layout.blocks_per_axis();
    const int p = layout.physical_block();
    const double v = layout.voxel_width();
    const auto padded = static_cast<std::uint64_t>(layout.resolution + 1);
    for (std::size_t slot = 0; slot < kept.size(); ++slot) {
        indirection[kept[slot]] = layout.atlas_ref(slot);
    }
    parallel_for(0, kept.size(), [&](std::size_t slot) {
        const std::size_t block = kept[slot];
        const AtlasRef ref = layout.atlas_ref(slot);
        const int bx = static_cast<int>(block % nb);
        const int by = static_cast<int>((block / nb) % nb);
        const int bz = static_cast<int>(block / (static_cast<std::size_t>(nb) * nb));
        for (int z = 0; z < p; ++z) {
            for (int y = 0; y < p; ++y) {
                for (int x = 0; x < p; ++x) {
                    // Keyed by global voxel index so shared border voxels
                    // come out identical in both neighbors.
                    const int gx = bx * b + x;
                    const int gy = by * b + y;
                    const int gz = bz * b + z;
                    const std::uint64_t gid = (gz * padded + gy) * padded + gx;
                    const Vec3 center = layout.bounds.min + (Vec3(gx, gy, gz).array() + 0.5).matrix() * v;
                    const VoxelValue val =
                        voxel_supersample(scene, center, v, config.supersamples, voxel_seed(config.seed, gid));
                    const std::size_t dst = layout.atlas_voxel(ref, x, y, z);
                    alpha[dst] = static_cast<float>(val.alpha);
                    for (int c = 0; c < 3; ++c) {
                        rgb[3 * dst + c] = static_cast<float>(std::clamp(val.diffuse[c], 0.0, 1.0));
                    }
                    for (int c = 0; c < 4; ++c) {
                        features[4 * dst + c] = static_cast<float>(std::clamp(val.feature[c], 0.0, 1.0));
                    }
                }
            }
        }
    });
    return SnergGrid(layout, std::move(indirection), std::move(alpha), std::move(rgb), std::move(features));
}

std::vector<Camera> default_training_rig(const Box& bounds, int count, double radius)
{
    return sphere_rig(bounds.center(), radius, count, 1.0, 1, 1);
}

} // namespace snerg
