// Copyright 2026 The snerg-cpp Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <snerg/grid.hpp>

#include <algorithm>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

namespace snerg::test {

class TempDir
{
public:
    explicit TempDir(const std::string& tag)
    {
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() /
                ("snerg_" + tag + "_" + std::to_string(rd()) + std::to_string(rd()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir()
    {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

/// Random sparse grid: each block occupied with probability `fill`, atlas
/// slots assigned in a shuffled order, channel bytes uniform.
inline QuantizedGrid random_quantized_grid(std::mt19937_64& rng, int n, int b, double fill)
{
    GridLayout layout;
    layout.resolution = n;
    layout.block_size = b;
    const std::size_t blocks = layout.block_count();
    std::bernoulli_distribution keep(fill);
    std::vector<std::size_t> occupied;
    for (std::size_t i = 0; i < blocks; ++i) {
        if (keep(rng)) {
            occupied.push_back(i);
        }
    }
    layout.atlas_blocks = atlas_shape_for(occupied.size());
    std::vector<std::size_t> slots(occupied.size());
    for (std::size_t i = 0; i < slots.size(); ++i) {
        slots[i] = i;
    }
    std::shuffle(slots.begin(), slots.end(), rng);
    std::vector<AtlasRef> indirection(blocks, kEmptyBlock);
    for (std::size_t i = 0; i < occupied.size(); ++i) {
        indirection[occupied[i]] = layout.atlas_ref(slots[i]);
    }
    const std::size_t voxels = layout.atlas_voxel_count();
    std::uniform_int_distribution<int> byte(0, 255);
    auto fill_bytes = [&](std::size_t count) {
        std::vector<std::uint8_t> v(count);
        for (auto& x : v) {
            x = static_cast<std::uint8_t>(byte(rng));
        }
        return v;
    };
    auto alpha = fill_bytes(voxels);
    auto rgb = fill_bytes(3 * voxels);
    auto feat = fill_bytes(4 * voxels);
    return QuantizedGrid(layout, std::move(indirection), std::move(alpha), std::move(rgb), std::move(feat));
}

} // namespace snerg::test
