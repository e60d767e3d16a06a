// Copyright 2026 The snerg-cpp Authors
// SPDX-License-Identifier: Apache-2.0

///
/// @file bundle.hpp
/// On-disk bundle: manifest.json plus four lossless 8-bit PNGs
/// (indirection.png, atlas_alpha.png, atlas_rgb.png, atlas_features.png).
/// 3D volumes are written as their z-slices tiled row-major into a grid of
/// ceil(sqrt(depth)) columns. See docs/bundle_format.md.
///

#pragma once

#include <snerg/grid.hpp>
#include <snerg/mlp.hpp>
#include <snerg/png_io.hpp>

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace snerg {

inline constexpr int kBundleFormatVersion = 1;

class BundleError : public std::runtime_error
{
public:
    enum class Kind { MissingFile, ChecksumMismatch, DimensionMismatch, Malformed, Io };

    BundleError(Kind kind, const std::string& what)
        : std::runtime_error(what)
        , kind_(kind)
    {
    }

    Kind kind() const { return kind_; }

private:
    Kind kind_;
};

struct TileLayout
{
    int columns = 0;
    int rows = 0;

    friend bool operator==(const TileLayout&, const TileLayout&) = default;
};

/// columns = ceil(sqrt(depth)), rows = ceil(depth / columns); {0, 0} for depth 0.
TileLayout tile_layout(int depth);

/// Lays the z-slices of a (width x height x depth x channels) volume out as
/// one 2D image. Unused tiles are zero.
Image8 tile_volume(std::span<const std::uint8_t> voxels, int width, int height, int depth,
                   int channels);
std::vector<std::uint8_t> untile_volume(const Image8& image, int width, int height, int depth);

/// FNV-1a, 64 bit.
std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes);
std::string checksum_hex(std::span<const std::uint8_t> bytes);

nlohmann::json mlp_to_json(const DeferredMlp& mlp);
DeferredMlp mlp_from_json(const nlohmann::json& j);

/// {"focal", "width", "height", "rotation": 9 row-major, "position": 3}
nlohmann::json camera_to_json(const Camera& camera);
Camera camera_from_json(const nlohmann::json& j);

struct ExportOptions
{
    Vec3 background = Vec3::Ones();
    /// Written verbatim into the manifest; the current UTC time when empty.
    std::string timestamp;
};

struct BundleSummary
{
    std::size_t occupied_blocks = 0;
    std::uintmax_t total_bytes = 0;
    std::map<std::string, std::uintmax_t> file_bytes;
};

/// Writes the bundle into `dir` (created if needed). Byte-identical output
/// for identical inputs apart from the manifest timestamp.
BundleSummary export_bundle(const QuantizedGrid& grid, const DeferredMlp& mlp,
                            const std::filesystem::path& dir, const ExportOptions& options = {});

struct Bundle
{
    QuantizedGrid grid;
    DeferredMlp mlp;
    Vec3 background = Vec3::Ones();
};

/// Reads and validates a bundle. Throws BundleError whose kind separates
/// missing files, checksum failures and dimension mismatches.
Bundle import_bundle(const std::filesystem::path& dir);

/// Replaces the manifest's mlp section and timestamp, leaving every other
/// byte of the bundle alone.
void update_bundle_mlp(const std::filesystem::path& dir, const DeferredMlp& mlp,
                       const std::string& timestamp = {});

std::string utc_timestamp();

} // namespace snerg
