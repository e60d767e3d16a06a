// Copyright 2026 The snerg-cpp Authors
// SPDX-License-Identifier: Apache-2.0

#include <snerg/grid.hpp>

#include <algorithm>
#include <cmath>
#include <string>

namespace snerg {

void GridLayout::validate() const
{
    if (block_size < 2) {
        throw std::invalid_argument("block size must be at least 2");
    }
    if (resolution < block_size || resolution % block_size != 0) {
        throw std::invalid_argument("grid resolution " + std::to_string(resolution) +
                                    " is not a positive multiple of block size " +
                                    std::to_string(block_size));
    }
    const Vec3 e = bounds.extent();
    if (!(e.minCoeff() > 0.0) || std::abs(e.x() - e.y()) > 1e-9 * e.x() ||
        std::abs(e.x() - e.z()) > 1e-9 * e.x()) {
        throw std::invalid_argument("grid bounds must be a non-empty cube");
    }
    for (int a : atlas_blocks) {
        if (a < 0 || a > kMaxAtlasBlocksPerAxis) {
            throw std::invalid_argument("atlas block count per axis must be in [0, 255]");
        }
    }
}

bool operator==(const GridLayout& a, const GridLayout& b)
{
    return a.resolution == b.resolution && a.block_size == b.block_size &&
           a.bounds.min == b.bounds.min && a.bounds.max == b.bounds.max &&
           a.atlas_blocks == b.atlas_blocks;
}

std::array<int, 3> atlas_shape_for(std::size_t occupied)
{
    constexpr auto kCap = static_cast<std::size_t>(kMaxAtlasBlocksPerAxis);
    if (occupied > kCap * kCap * kCap) {
        throw CapacityError(std::to_string(occupied) + " occupied blocks exceed the atlas cap of " +
                            std::to_string(kCap * kCap * kCap));
    }
    if (occupied == 0) {
        return {0, 0, 0};
    }
    auto side = static_cast<std::size_t>(std::cbrt(static_cast<double>(occupied)));
    while (side * side * side < occupied) {
        ++side;
    }
    while (side > 1 && (side - 1) * (side - 1) * (side - 1) >= occupied) {
        --side;
    }
    side = std::min(side, kCap);
    const std::size_t depth = (occupied + side * side - 1) / (side * side);
    return {static_cast<int>(side), static_cast<int>(side), static_cast<int>(depth)};
}

template <typename T>
VoxelGrid<T>::VoxelGrid(GridLayout layout, std::vector<AtlasRef> indirection, std::vector<T> alpha,
                        std::vector<T> rgb, std::vector<T> features)
    : layout_(std::move(layout))
    , indirection_(std::move(indirection))
    , alpha_(std::move(alpha))
    , rgb_(std::move(rgb))
    , features_(std::move(features))
{
    layout_.validate();
    if (indirection_.size() != layout_.block_count()) {
        throw std::invalid_argument("indirection grid has " + std::to_string(indirection_.size()) +
                                    " cells, expected " + std::to_string(layout_.block_count()));
    }
    const std::size_t voxels = layout_.atlas_voxel_count();
    if (alpha_.size() != voxels || rgb_.size() != 3 * voxels || features_.size() != 4 * voxels) {
        throw std::invalid_argument("atlas channel sizes do not match the atlas shape");
    }
    std::vector<bool> used(layout_.atlas_capacity(), false);
    const auto& ab = layout_.atlas_blocks;
    for (const AtlasRef& ref : indirection_) {
        if (ref.empty()) {
            continue;
        }
        if (ref.x >= ab[0] || ref.y >= ab[1] || ref.z >= ab[2]) {
            throw std::invalid_argument("indirection references a block outside the atlas");
        }
        const std::size_t slot =
            (static_cast<std::size_t>(ref.z) * ab[1] + ref.y) * ab[0] + ref.x;
        if (used[slot]) {
            throw std::invalid_argument("atlas block referenced by more than one indirection cell");
        }
        used[slot] = true;
    }

    const int nb = layout_.blocks_per_axis();
    for (int level = 1; (1 << (level - 1)) < nb; ++level) {
        const std::size_t cells = static_cast<std::size_t>((nb + (1 << level) - 1) >> level);
        PyramidLevel lv{cells, std::vector<std::uint8_t>(cells * cells * cells, 0)};
        for (int bz = 0; bz < nb; ++bz) {
            for (int by = 0; by < nb; ++by) {
                for (int bx = 0; bx < nb; ++bx) {
                    if (!block(bx, by, bz).empty()) {
                        lv.bits[((static_cast<std::size_t>(bz >> level) * cells) + (by >> level)) * cells +
                                (bx >> level)] = 1;
                    }
                }
            }
        }
        pyramid_.push_back(std::move(lv));
    }
}

template <typename T>
std::size_t VoxelGrid<T>::occupied_blocks() const
{
    return static_cast<std::size_t>(
        std::count_if(indirection_.begin(), indirection_.end(), [](AtlasRef r) { return !r.empty(); }));
}

template class VoxelGrid<float>;
template class VoxelGrid<std::uint8_t>;

std::uint8_t quantize8(double x)
{
    if (!(x > 0.0)) {
        return 0;
    }
    if (x >= 1.0) {
        return 255;
    }
    return static_cast<std::uint8_t>(std::floor(255.0 * x + 0.5));
}

namespace {

template <typename To, typename From, typename Fn>
std::vector<To> convert(const std::vector<From>& in, Fn fn)
{
    std::vector<To> out(in.size());
    std::transform(in.begin(), in.end(), out.begin(), fn);
    return out;
}

} // namespace

QuantizedGrid quantize(const SnergGrid& grid)
{
    const auto q = [](float v) { return quantize8(v); };
    return QuantizedGrid(grid.layout(), grid.indirection(), convert<std::uint8_t>(grid.alpha(), q),
                         convert<std::uint8_t>(grid.rgb(), q),
                         convert<std::uint8_t>(grid.features(), q));
}

SnergGrid dequantize(const QuantizedGrid& grid)
{
    const auto d = [](std::uint8_t v) { return static_cast<float>(dequantize8(v)); };
    return SnergGrid(grid.layout(), grid.indirection(), convert<float>(grid.alpha(), d),
                     convert<float>(grid.rgb(), d), convert<float>(grid.features(), d));
}

QuantizedGrid requantize(const QuantizedGrid& grid, int bits)
{
    if (bits < 1 || bits > 8) {
        throw std::invalid_argument("requantize: bits must be in [1, 8]");
    }
    const double levels = (1 << bits) - 1;
    std::array<std::uint8_t, 256> table{};
    for (int q = 0; q < 256; ++q) {
        const double snapped = std::floor(q / 255.0 * levels + 0.5) / levels;
        table[q] = quantize8(snapped);
    }
    const auto r = [&](std::uint8_t v) { return table[v]; };
    return QuantizedGrid(grid.layout(), grid.indirection(), convert<std::uint8_t>(grid.alpha(), r),
                         convert<std::uint8_t>(grid.rgb(), r),
                         convert<std::uint8_t>(grid.features(), r));
}

} // namespace snerg
