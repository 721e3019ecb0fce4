#pragma once

#include <filesystem>
#include <string>

#include "bahop/imaging.hpp"

namespace bahop::pnm {

// Binary portable anymap, maxval 255 only. P6 for 3-channel rasters, P5 for
// 1-channel rasters. Header is written as "P6\n<w> <h>\n255\n".
std::string encode(const RasterImage& img);
RasterImage decode(const std::string& bytes);

void write(const std::filesystem::path& path, const RasterImage& img);
RasterImage read(const std::filesystem::path& path);

// Masks round-trip through P5 with samples 0 / 255.
void write_mask(const std::filesystem::path& path, const BitMask& mask);
BitMask read_mask(const std::filesystem::path& path);

}  // namespace bahop::pnm
