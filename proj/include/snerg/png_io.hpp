// Copyright 2026 The snerg-cpp Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <vector>

namespace snerg {

/// Interleaved 8-bit raster with 1 (gray), 3 (RGB) or 4 (RGBA) channels.
struct Image8
{
    int width = 0;
    int height = 0;
    int channels = 0;
    std::vector<std::uint8_t> data;

    friend bool operator==(const Image8&, const Image8&) = default;
};

class PngError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

std::vector<std::uint8_t> encode_png(const Image8& image);

/// Decodes into the channel layout stored in the file. Throws PngError on
/// malformed or truncated input.
Image8 decode_png(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

} // namespace snerg
