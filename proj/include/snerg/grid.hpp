// Copyright 2026 The snerg-cpp Authors
// SPDX-License-Identifier: Apache-2.0

///
/// @file grid.hpp
/// Block-sparse voxel grid: a low resolution indirection grid of
/// (N/B)^3 cells, each either empty or pointing at a macroblock in a dense
/// 3D atlas. Atlas blocks are stored with a one-voxel border on the +x, +y
/// and +z faces, (B+1)^3 voxels each, so trilinear lookups never leave the
/// block they start in.
///

#pragma once

#include <snerg/core_math.hpp>

#include <array>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace snerg {

/// Thrown when more blocks survive than the 8-bit indirection encoding can
/// address (255 per atlas axis).
class CapacityError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

/// Atlas block coordinate; (255, 255, 255) marks an empty macroblock.
struct AtlasRef
{
    std::uint8_t x = 255;
    std::uint8_t y = 255;
    std::uint8_t z = 255;

    bool empty() const { return x == 255 && y == 255 && z == 255; }
    friend bool operator==(const AtlasRef&, const AtlasRef&) = default;
};

inline constexpr AtlasRef kEmptyBlock{255, 255, 255};
inline constexpr int kMaxAtlasBlocksPerAxis = 255;

struct GridLayout
{
    int resolution = 0;  ///< N, voxels per axis
    int block_size = 0;  ///< B
    Box bounds;          ///< cube covered by the grid
    std::array<int, 3> atlas_blocks{0, 0, 0};

    /// Checks N % B == 0, B >= 2, a cubic box, and the atlas axis cap.
    void validate() const;

    int blocks_per_axis() const { return resolution / block_size; }
    std::size_t block_count() const
    {
        const auto n = static_cast<std::size_t>(blocks_per_axis());
        return n * n * n;
    }
    int physical_block() const { return block_size + 1; }
    double voxel_width() const { return bounds.extent().x() / resolution; }

    std::array<int, 3> atlas_voxels() const
    {
        const int p = physical_block();
        return {atlas_blocks[0] * p, atlas_blocks[1] * p, atlas_blocks[2] * p};
    }
    std::size_t atlas_voxel_count() const
    {
        const auto d = atlas_voxels();
        return static_cast<std::size_t>(d[0]) * d[1] * d[2];
    }
    std::size_t atlas_capacity() const
    {
        return static_cast<std::size_t>(atlas_blocks[0]) * atlas_blocks[1] * atlas_blocks[2];
    }
    std::size_t block_index(int bx, int by, int bz) const
    {
        const auto n = static_cast<std::size_t>(blocks_per_axis());
        return (static_cast<std::size_t>(bz) * n + by) * n + bx;
    }
    AtlasRef atlas_ref(std::size_t slot) const
    {
        const auto ax = static_cast<std::size_t>(atlas_blocks[0]);
        const auto ay = static_cast<std::size_t>(atlas_blocks[1]);
        return {static_cast<std::uint8_t>(slot % ax), static_cast<std::uint8_t>((slot / ax) % ay),
                static_cast<std::uint8_t>(slot / (ax * ay))};
    }
    /// Linear atlas voxel index of local voxel (lx, ly, lz) in block `ref`.
    std::size_t atlas_voxel(AtlasRef ref, int lx, int ly, int lz) const
    {
        const int p = physical_block();
        const auto d = atlas_voxels();
        const std::size_t x = static_cast<std::size_t>(ref.x) * p + lx;
        const std::size_t y = static_cast<std::size_t>(ref.y) * p + ly;
        const std::size_t z = static_cast<std::size_t>(ref.z) * p + lz;
        return (z * d[1] + y) * d[0] + x;
    }
    /// World position -> continuous voxel coordinates in [0, N].
    Vec3 to_voxel(const Vec3& world) const { return (world - bounds.min) / voxel_width(); }
};

bool operator==(const GridLayout& a, const GridLayout& b);

/// Near-cubic atlas shape holding `occupied` blocks. Throws CapacityError
/// above 255^3.
std::array<int, 3> atlas_shape_for(std::size_t occupied);

inline double to_unit(float v) { return v; }
inline double to_unit(std::uint8_t q) { return q * (1.0 / 255.0); }

/// Sparse grid with channel type T: float for the bake output, uint8 for the
/// quantized form. Immutable after construction.
template <typename T>
class VoxelGrid
{
public:
    using value_type = T;

    VoxelGrid() = default;

    /// Validates sizes, in-range indirection refs and that no atlas slot is
    /// referenced twice.
    VoxelGrid(GridLayout layout, std::vector<AtlasRef> indirection, std::vector<T> alpha,
              std::vector<T> rgb, std::vector<T> features);

    const GridLayout& layout() const { return layout_; }
    const std::vector<AtlasRef>& indirection() const { return indirection_; }
    const std::vector<T>& alpha() const { return alpha_; }
    const std::vector<T>& rgb() const { return rgb_; }
    const std::vector<T>& features() const { return features_; }

    AtlasRef block(int bx, int by, int bz) const { return indirection_[layout_.block_index(bx, by, bz)]; }
    std::size_t occupied_blocks() const;

    /// Occupancy pyramid over the indirection grid. Level k >= 1 has one
    /// cell per 2^k x 2^k x 2^k macroblocks (partial cells at the +faces),
    /// set iff any of them is occupied. Levels run while a cell spans less
    /// than the whole grid.
    int occupancy_levels() const { return static_cast<int>(pyramid_.size()); }
    bool region_occupied(int level, int bx, int by, int bz) const
    {
        const auto& lv = pyramid_[level - 1];
        const std::size_t n = lv.cells;
        return lv.bits[((static_cast<std::size_t>(bz >> level) * n) + (by >> level)) * n + (bx >> level)] != 0;
    }

    double alpha_at(std::size_t voxel) const { return to_unit(alpha_[voxel]); }
    Vec3 rgb_at(std::size_t voxel) const
    {
        const T* p = rgb_.data() + 3 * voxel;
        return {to_unit(p[0]), to_unit(p[1]), to_unit(p[2])};
    }
    Vec4 feature_at(std::size_t voxel) const
    {
        const T* p = features_.data() + 4 * voxel;
        return {to_unit(p[0]), to_unit(p[1]), to_unit(p[2]), to_unit(p[3])};
    }

    friend bool operator==(const VoxelGrid& a, const VoxelGrid& b)
    {
        return a.layout_ == b.layout_ && a.indirection_ == b.indirection_ && a.alpha_ == b.alpha_ &&
               a.rgb_ == b.rgb_ && a.features_ == b.features_;
    }

private:
    struct PyramidLevel
    {
        std::size_t cells = 0;
        std::vector<std::uint8_t> bits;
    };

    GridLayout layout_;
    std::vector<AtlasRef> indirection_;
    std::vector<T> alpha_;
    std::vector<T> rgb_;
    std::vector<T> features_;
    std::vector<PyramidLevel> pyramid_;
};

using SnergGrid = VoxelGrid<float>;
using QuantizedGrid = VoxelGrid<std::uint8_t>;

extern template class VoxelGrid<float>;
extern template class VoxelGrid<std::uint8_t>;

/// round(255 x) with x clamped to [0, 1]; halves round up.
std::uint8_t quantize8(double x);
inline double dequantize8(std::uint8_t q) { return to_unit(q); }

QuantizedGrid quantize(const SnergGrid& grid);
SnergGrid dequantize(const QuantizedGrid& grid);

/// Snaps every 8-bit value onto the nearest of 2^bits evenly spaced levels,
/// keeping the 8-bit container (bits in [1, 8]).
QuantizedGrid requantize(const QuantizedGrid& grid, int bits);

} // namespace snerg
