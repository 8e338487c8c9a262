#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace interpconv {

/// 8-bit grayscale raster, row-major.
struct GrayImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels;

    friend bool operator==(const GrayImage&, const GrayImage&) = default;
};

/// Binary P5 with maxval 255.
void write_pgm(const std::filesystem::path& path, const GrayImage& image);
/// Throws DataError on a missing, malformed or truncated file.
GrayImage read_pgm(const std::filesystem::path& path);

/// [0,1] values to bytes with round-to-nearest; values outside are clamped.
GrayImage to_gray(const std::vector<double>& values, int width, int height);
std::vector<double> from_gray(const GrayImage& image);

}  // namespace interpconv
