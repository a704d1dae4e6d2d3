#pragma once

#include <filesystem>
#include <vector>

#include "cgkqi/trace.hpp"

namespace cgkqi {

// Binary PPM (P6, maxval 255) and 8-bit PNG. PNG input is normalised to
// gray or RGB: palettes expand to RGB, alpha is stripped, 16-bit is reduced.
PixelFrame read_ppm(const std::filesystem::path& path);
void write_ppm(const PixelFrame& frame, const std::filesystem::path& path);

PixelFrame read_png(const std::filesystem::path& path);
void write_png(const PixelFrame& frame, const std::filesystem::path& path);

/// Dispatches on file signature, not extension.
PixelFrame read_image(const std::filesystem::path& path);

/// Regular files with .ppm or .png extension, sorted by filename.
std::vector<std::filesystem::path> list_images(const std::filesystem::path& dir);

}  // namespace cgkqi
