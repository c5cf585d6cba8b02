// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "volnet/volume.hpp"

namespace volnet {

/// One binary PGM (P5) raster. maxval <= 255 means one byte per pixel,
/// otherwise two bytes, most significant first as the format prescribes.
struct GrayImage {
    std::size_t height = 0;
    std::size_t width = 0;
    std::uint32_t maxval = 255;
    std::vector<std::uint16_t> pixels;  // row-major
};

GrayImage read_pgm(const std::filesystem::path& path);
void write_pgm(const std::filesystem::path& path, const GrayImage& image);

/// Filename order where digit runs compare by value: s2 < s10.
bool natural_less(const std::string& a, const std::string& b);

/// Stacks every *.pgm in `directory` along D in natural filename order.
/// Pixels are divided by the largest value of their bit depth (255 or 65535).
/// Throws DataError for fewer than two slices or unequal H x W.
Volume stack_slices(const std::filesystem::path& directory);

/// Raw volume: ASCII header line "VOL1 D H W\n" followed by D*H*W
/// little-endian 32-bit floats.
Volume read_vol1(const std::filesystem::path& path);
void write_vol1(const std::filesystem::path& path, const Volume& vol);

/// A directory is read as a PGM slice stack, a file as VOL1.
Volume load_volume(const std::filesystem::path& path);

}  // namespace volnet
