// Copyright 2026 The snerg-cpp Authors
// SPDX-License-Identifier: Apache-2.0

#include <snerg/png_io.hpp>

#include <png.h>

#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

namespace snerg {

namespace {

png_uint_32 format_for(int channels)
{
    switch (channels) {
    case 1: return PNG_FORMAT_GRAY;
    case 3: return PNG_FORMAT_RGB;
    case 4: return PNG_FORMAT_RGBA;
    default: throw PngError("unsupported channel count " + std::to_string(channels));
    }
}

// Releases libpng's read state on every exit path.
struct ImageGuard
{
    png_image* image;
    ~ImageGuard() { png_image_free(image); }
};

} // namespace

std::vector<std::uint8_t> encode_png(const Image8& image)
{
    if (image.width < 1 || image.height < 1) {
        throw PngError("cannot encode an empty image");
    }
    if (image.data.size() != static_cast<std::size_t>(image.width) * image.height * image.channels) {
        throw PngError("image buffer size does not match its dimensions");
    }
    png_image png;
    std::memset(&png, 0, sizeof(png));
    png.version = PNG_IMAGE_VERSION;
    png.width = static_cast<png_uint_32>(image.width);
    png.height = static_cast<png_uint_32>(image.height);
    png.format = format_for(image.channels);

    png_alloc_size_t size = 0;
    if (!png_image_write_to_memory(&png, nullptr, &size, 0, image.data.data(), 0, nullptr)) {
        throw PngError(std::string("png size query failed: ") + png.message);
    }
    std::vector<std::uint8_t> out(size);
    if (!png_image_write_to_memory(&png, out.data(), &size, 0, image.data.data(), 0, nullptr)) {
        throw PngError(std::string("png encode failed: ") + png.message);
    }
    out.resize(size);
    return out;
}

Image8 decode_png(std::span<const std::uint8_t> bytes)
{
    png_image png;
    std::memset(&png, 0, sizeof(png));
    png.version = PNG_IMAGE_VERSION;
    ImageGuard guard{&png};
    if (!png_image_begin_read_from_memory(&png, bytes.data(), bytes.size())) {
        throw PngError(std::string("png header: ") + png.message);
    }
    Image8 out;
    const bool has_alpha = (png.format & PNG_FORMAT_FLAG_ALPHA) != 0;
    const bool has_color = (png.format & PNG_FORMAT_FLAG_COLOR) != 0;
    out.channels = has_color ? (has_alpha ? 4 : 3) : (has_alpha ? 4 : 1);
    png.format = format_for(out.channels);
    out.width = static_cast<int>(png.width);
    out.height = static_cast<int>(png.height);
    out.data.resize(PNG_IMAGE_SIZE(png));
    if (!png_image_finish_read(&png, nullptr, out.data.data(), 0, nullptr)) {
        throw PngError(std::string("png decode: ") + png.message);
    }
    return out;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot open " + path.string());
    }
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw std::runtime_error("cannot write " + path.string());
    }
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw std::runtime_error("write failed for " + path.string());
    }
}

} // namespace snerg
