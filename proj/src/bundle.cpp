// Copyright 2026 The snerg-cpp Authors
// SPDX-License-Identifier: Apache-2.0

#include <snerg/bundle.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <sstream>

namespace snerg {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kManifest = "manifest.json";
constexpr const char* kIndirection = "indirection.png";
constexpr const char* kAlpha = "atlas_alpha.png";
constexpr const char* kRgb = "atlas_rgb.png";
constexpr const char* kFeatures = "atlas_features.png";

json vec_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

Vec3 vec_from(const json& j)
{
    if (!j.is_array() || j.size() != 3) {
        throw BundleError(BundleError::Kind::Malformed, "expected a 3-element array");
    }
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

Image8 placeholder(int channels) { return {1, 1, channels, std::vector<std::uint8_t>(channels, 0)}; }

Image8 atlas_image(const std::vector<std::uint8_t>& data, const GridLayout& layout, int channels)
{
    if (layout.atlas_capacity() == 0) {
        return placeholder(channels);
    }
    const auto d = layout.atlas_voxels();
    return tile_volume(data, d[0], d[1], d[2], channels);
}

std::string dump_manifest(const json& manifest) { return manifest.dump(2) + "\n"; }

void write_bytes(const fs::path& path, std::span<const std::uint8_t> bytes)
{
    try {
        write_file(path, bytes);
    } catch (const std::exception& e) {
        throw BundleError(BundleError::Kind::Io, e.what());
    }
}

std::vector<std::uint8_t> load(const fs::path& dir, const std::string& name)
{
    const fs::path p = dir / name;
    if (!fs::exists(p)) {
        throw BundleError(BundleError::Kind::MissingFile, "bundle file missing: " + p.string());
    }
    try {
        return read_file(p);
    } catch (const std::exception& e) {
        throw BundleError(BundleError::Kind::Io, e.what());
    }
}

json load_manifest(const fs::path& dir)
{
    const auto bytes = load(dir, kManifest);
    try {
        return json::parse(bytes.begin(), bytes.end());
    } catch (const json::exception& e) {
        throw BundleError(BundleError::Kind::Malformed,
                          std::string("manifest.json is not valid JSON: ") + e.what());
    }
}

void expect_dims(const Image8& img, const std::string& name, int width, int height, int channels)
{
    if (img.width != width || img.height != height || img.channels != channels) {
        std::ostringstream msg;
        msg << name << " is " << img.width << "x" << img.height << "x" << img.channels
            << ", manifest implies " << width << "x" << height << "x" << channels;
        throw BundleError(BundleError::Kind::DimensionMismatch, msg.str());
    }
}

} // namespace

TileLayout tile_layout(int depth)
{
    if (depth <= 0) {
        return {0, 0};
    }
    int columns = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(depth))));
    while (columns * columns < depth) {
        ++columns;
    }
    while (columns > 1 && (columns - 1) * (columns - 1) >= depth) {
        --columns;
    }
    return {columns, (depth + columns - 1) / columns};
}

Image8 tile_volume(std::span<const std::uint8_t> voxels, int width, int height, int depth,
                   int channels)
{
    const std::size_t slice = static_cast<std::size_t>(width) * height * channels;
    if (voxels.size() != slice * depth) {
        throw std::invalid_argument("tile_volume: buffer does not match volume dimensions");
    }
    const TileLayout t = tile_layout(depth);
    Image8 img{t.columns * width, t.rows * height, channels, {}};
    img.data.assign(static_cast<std::size_t>(img.width) * img.height * channels, 0);
    const std::size_t row_bytes = static_cast<std::size_t>(width) * channels;
    for (int z = 0; z < depth; ++z) {
        const int tx = z % t.columns;
        const int ty = z / t.columns;
        for (int y = 0; y < height; ++y) {
            const std::uint8_t* src = voxels.data() + z * slice + y * row_bytes;
            std::uint8_t* dst = img.data.data() +
                                (static_cast<std::size_t>(ty * height + y) * img.width + tx * width) * channels;
            std::copy_n(src, row_bytes, dst);
        }
    }
    return img;
}

std::vector<std::uint8_t> untile_volume(const Image8& img, int width, int height, int depth)
{
    const TileLayout t = tile_layout(depth);
    if (img.width != t.columns * width || img.height != t.rows * height) {
        throw std::invalid_argument("untile_volume: image size does not match the tiling");
    }
    const int channels = img.channels;
    const std::size_t row_bytes = static_cast<std::size_t>(width) * channels;
    const std::size_t slice = row_bytes * height;
    std::vector<std::uint8_t> out(slice * depth);
    for (int z = 0; z < depth; ++z) {
        const int tx = z % t.columns;
        const int ty = z / t.columns;
        for (int y = 0; y < height; ++y) {
            const std::uint8_t* src =
                img.data.data() + (static_cast<std::size_t>(ty * height + y) * img.width + tx * width) * channels;
            std::copy_n(src, row_bytes, out.data() + z * slice + y * row_bytes);
        }
    }
    return out;
}

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const std::uint8_t b : bytes) {
        h ^= b;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string checksum_hex(std::span<const std::uint8_t> bytes)
{
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(fnv1a64(bytes)));
    return buf;
}

json mlp_to_json(const DeferredMlp& mlp)
{
    json layers = json::array();
    for (const auto& l : mlp.layers()) {
        layers.push_back({{"rows", l.rows}, {"cols", l.cols}, {"weights", l.weights}, {"bias", l.bias}});
    }
    return {{"dir_encoding_bands", mlp.direction_bands()},
            {"layers", layers},
            {"hidden_activation", "relu"},
            {"output_activation", "sigmoid"}};
}

DeferredMlp mlp_from_json(const json& j)
{
    try {
        if (j.at("hidden_activation") != "relu" || j.at("output_activation") != "sigmoid") {
            throw BundleError(BundleError::Kind::Malformed,
                              "mlp activations must be relu (hidden) and sigmoid (output)");
        }
        std::vector<DenseLayer> layers;
        for (const auto& l : j.at("layers")) {
            layers.push_back({l.at("rows").get<int>(), l.at("cols").get<int>(),
                              l.at("weights").get<std::vector<double>>(),
                              l.at("bias").get<std::vector<double>>()});
        }
        return DeferredMlp(j.at("dir_encoding_bands").get<int>(), std::move(layers));
    } catch (const json::exception& e) {
        throw BundleError(BundleError::Kind::Malformed, std::string("mlp section: ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw BundleError(BundleError::Kind::Malformed, std::string("mlp section: ") + e.what());
    }
}

json camera_to_json(const Camera& c)
{
    json rot = json::array();
    for (int r = 0; r < 3; ++r) {
        for (int k = 0; k < 3; ++k) {
            rot.push_back(c.rotation(r, k));
        }
    }
    return {{"focal", c.focal}, {"width", c.width}, {"height", c.height}, {"rotation", rot},
            {"position", vec_json(c.position)}};
}

Camera camera_from_json(const json& j)
{
    Camera c;
    const auto rot = j.at("rotation").get<std::vector<double>>();
    if (rot.size() != 9) {
        throw std::invalid_argument("camera rotation needs 9 values");
    }
    for (int r = 0; r < 3; ++r) {
        for (int k = 0; k < 3; ++k) {
            c.rotation(r, k) = rot[3 * r + k];
        }
    }
    c.position = vec_from(j.at("position"));
    c.focal = j.at("focal").get<double>();
    c.width = j.at("width").get<int>();
    c.height = j.at("height").get<int>();
    c.validate();
    return c;
}

std::string utc_timestamp()
{
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

BundleSummary export_bundle(const QuantizedGrid& grid, const DeferredMlp& mlp, const fs::path& dir,
                            const ExportOptions& options)
{
    const GridLayout& layout = grid.layout();
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) {
        throw BundleError(BundleError::Kind::Io, "cannot create " + dir.string() + ": " + ec.message());
    }

    const int nb = layout.blocks_per_axis();
    std::vector<std::uint8_t> indirection;
    indirection.reserve(3 * grid.indirection().size());
    for (const AtlasRef& r : grid.indirection()) {
        indirection.insert(indirection.end(), {r.x, r.y, r.z});
    }

    const std::vector<std::pair<std::string, Image8>> images = {
        {kIndirection, tile_volume(indirection, nb, nb, nb, 3)},
        {kAlpha, atlas_image(grid.alpha(), layout, 1)},
        {kRgb, atlas_image(grid.rgb(), layout, 3)},
        {kFeatures, atlas_image(grid.features(), layout, 4)},
    };

    BundleSummary summary;
    summary.occupied_blocks = grid.occupied_blocks();
    json checksums = json::object();
    for (const auto& [name, img] : images) {
        const auto bytes = encode_png(img);
        write_bytes(dir / name, bytes);
        checksums[name] = checksum_hex(bytes);
        summary.file_bytes[name] = bytes.size();
    }

    const TileLayout atlas_tiles = tile_layout(layout.atlas_voxels()[2]);
    json manifest = {
        {"format_version", kBundleFormatVersion},
        {"grid_resolution", layout.resolution},
        {"block_size", layout.block_size},
        {"bounds", {{"min", vec_json(layout.bounds.min)}, {"max", vec_json(layout.bounds.max)}}},
        {"atlas_blocks", layout.atlas_blocks},
        {"physical_block_size", layout.physical_block()},
        {"slice_tiling", {{"columns", atlas_tiles.columns}, {"rows", atlas_tiles.rows}}},
        {"background_color", vec_json(options.background)},
        {"codec", "png8"},
        {"mlp", mlp_to_json(mlp)},
        {"checksums", checksums},
        {"timestamp", options.timestamp.empty() ? utc_timestamp() : options.timestamp},
    };
    const std::string text = dump_manifest(manifest);
    write_bytes(dir / kManifest, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
    summary.file_bytes[kManifest] = text.size();
    for (const auto& [_, n] : summary.file_bytes) {
        summary.total_bytes += n;
    }
    return summary;
}

Bundle import_bundle(const fs::path& dir)
{
    const json manifest = load_manifest(dir);
    GridLayout layout;
    TileLayout atlas_tiles;
    Vec3 background;
    std::map<std::string, std::string> checksums;
    try {
        if (manifest.at("format_version").get<int>() != kBundleFormatVersion) {
            throw BundleError(BundleError::Kind::Malformed, "unsupported bundle format_version");
        }
        if (manifest.at("codec").get<std::string>() != "png8") {
            throw BundleError(BundleError::Kind::Malformed, "unsupported codec");
        }
        layout.resolution = manifest.at("grid_resolution").get<int>();
        layout.block_size = manifest.at("block_size").get<int>();
        layout.bounds.min = vec_from(manifest.at("bounds").at("min"));
        layout.bounds.max = vec_from(manifest.at("bounds").at("max"));
        layout.atlas_blocks = manifest.at("atlas_blocks").get<std::array<int, 3>>();
        atlas_tiles.columns = manifest.at("slice_tiling").at("columns").get<int>();
        atlas_tiles.rows = manifest.at("slice_tiling").at("rows").get<int>();
        background = vec_from(manifest.at("background_color"));
        checksums = manifest.at("checksums").get<std::map<std::string, std::string>>();
        if (manifest.at("physical_block_size").get<int>() != layout.block_size + 1) {
            throw BundleError(BundleError::Kind::DimensionMismatch,
                              "physical_block_size must equal block_size + 1");
        }
    } catch (const json::exception& e) {
        throw BundleError(BundleError::Kind::Malformed, std::string("manifest.json: ") + e.what());
    }
    try {
        layout.validate();
    } catch (const std::invalid_argument& e) {
        throw BundleError(BundleError::Kind::DimensionMismatch, std::string("manifest: ") + e.what());
    }
    DeferredMlp mlp = mlp_from_json(manifest.at("mlp"));

    auto load_image = [&](const std::string& name) {
        const auto bytes = load(dir, name);
        const auto it = checksums.find(name);
        if (it == checksums.end()) {
            throw BundleError(BundleError::Kind::Malformed, "manifest has no checksum for " + name);
        }
        const std::string actual = checksum_hex(bytes);
        if (actual != it->second) {
            throw BundleError(BundleError::Kind::ChecksumMismatch,
                              name + ": checksum " + actual + " does not match manifest " + it->second);
        }
        try {
            return decode_png(bytes);
        } catch (const PngError& e) {
            throw BundleError(BundleError::Kind::Malformed, name + ": " + e.what());
        }
    };

    const int nb = layout.blocks_per_axis();
    const TileLayout ind_tiles = tile_layout(nb);
    const Image8 ind_img = load_image(kIndirection);
    expect_dims(ind_img, kIndirection, ind_tiles.columns * nb, ind_tiles.rows * nb, 3);
    const auto ind_bytes = untile_volume(ind_img, nb, nb, nb);
    std::vector<AtlasRef> indirection(layout.block_count());
    for (std::size_t i = 0; i < indirection.size(); ++i) {
        indirection[i] = {ind_bytes[3 * i], ind_bytes[3 * i + 1], ind_bytes[3 * i + 2]};
    }

    const auto dims = layout.atlas_voxels();
    const bool empty_atlas = layout.atlas_capacity() == 0;
    if (atlas_tiles != tile_layout(dims[2])) {
        throw BundleError(BundleError::Kind::DimensionMismatch,
                          "slice_tiling does not match the atlas depth");
    }
    auto atlas_channel = [&](const std::string& name, int channels) {
        const Image8 img = load_image(name);
        if (empty_atlas) {
            expect_dims(img, name, 1, 1, channels);
            return std::vector<std::uint8_t>{};
        }
        expect_dims(img, name, atlas_tiles.columns * dims[0], atlas_tiles.rows * dims[1], channels);
        return untile_volume(img, dims[0], dims[1], dims[2]);
    };
    auto alpha = atlas_channel(kAlpha, 1);
    auto rgb = atlas_channel(kRgb, 3);
    auto features = atlas_channel(kFeatures, 4);

    try {
        return {QuantizedGrid(layout, std::move(indirection), std::move(alpha), std::move(rgb),
                              std::move(features)),
                std::move(mlp), background};
    } catch (const std::invalid_argument& e) {
        throw BundleError(BundleError::Kind::DimensionMismatch, e.what());
    }
}

void update_bundle_mlp(const fs::path& dir, const DeferredMlp& mlp, const std::string& timestamp)
{
    json manifest = load_manifest(dir);
    manifest["mlp"] = mlp_to_json(mlp);
    manifest["timestamp"] = timestamp.empty() ? utc_timestamp() : timestamp;
    const std::string text = dump_manifest(manifest);
    write_bytes(dir / kManifest, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

} // namespace snerg
