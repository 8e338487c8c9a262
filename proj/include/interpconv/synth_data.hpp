#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace interpconv::data {

enum class Glyph { disc, square, triangle, cross, ring, diamond, hbar, vbar, x, twobar };

std::string to_string(Glyph g);
Glyph parse_glyph(std::string_view name);
/// size x size binary raster of the glyph, row-major.
std::vector<std::uint8_t> rasterize_glyph(Glyph g, int size);

struct PartSpec {
    std::string name;
    Glyph glyph = Glyph::square;
    /// Offset of the part centre from the object anchor, pixels.
    int offset_row = 0;
    int offset_col = 0;
    int size = 8;

    friend bool operator==(const PartSpec&, const PartSpec&) = default;
};

struct CategorySpec {
    int id = 0;
    std::string name;
    std::vector<PartSpec> parts;
    /// Uniform object displacement in [-jitter, jitter] per axis.
    int jitter = 0;
    /// Extra independent displacement of each part.
    int part_jitter = 0;
    /// Expected number of clutter shapes per 1000 pixels.
    double clutter_density = 0.0;

    friend bool operator==(const CategorySpec&, const CategorySpec&) = default;
};

/// 4 categories with head / torso / leg parts: unique head glyphs, a shared
/// torso glyph, two alternating leg glyphs. Geometry scales with image_size.
std::vector<CategorySpec> default_benchmark(int image_size = 64);

struct Point {
    double x = 0.0;  // column, pixel centres at +0.5
    double y = 0.0;  // row

    friend bool operator==(const Point&, const Point&) = default;
};

struct Box {
    int x0 = 0, y0 = 0, x1 = 0, y1 = 0;  // inclusive-exclusive pixel bounds

    friend bool operator==(const Box&, const Box&) = default;
};

struct SampleRecord {
    std::vector<double> image;                     // H*W in [0,1], multiples of 1/255
    int label = 0;
    std::vector<std::vector<std::uint8_t>> part_masks;  // per part, H*W of {0,1}
    std::vector<Point> landmarks;                  // per part, mask centroid
    Box bbox;

    friend bool operator==(const SampleRecord&, const SampleRecord&) = default;
};

struct Dataset {
    std::vector<CategorySpec> categories;
    int image_size = 0;
    std::uint64_t seed = 0;
    std::uint64_t stream = 0;
    std::vector<SampleRecord> samples;

    int category_count() const { return static_cast<int>(categories.size()); }
    /// Throws DataError for an unknown id.
    const CategorySpec& category(int id) const;

    friend bool operator==(const Dataset&, const Dataset&) = default;
};

/// Samples are ordered category-major. Each image draws from its own RNG
/// stream derived from (seed, stream, category, index).
Dataset generate_dataset(const std::vector<CategorySpec>& specs, int count_per_category, int image_size,
                         std::uint64_t seed, std::uint64_t stream = 0);

/// Throws ParameterError if a spec cannot be rendered inside the canvas.
void validate_specs(const std::vector<CategorySpec>& specs, int image_size);

/// Writes dir/dataset.json plus images/ and masks/ PGM files.
void save_dataset(const Dataset& dataset, const std::filesystem::path& dir);
/// Throws DataError on a missing manifest or a corrupt file.
Dataset load_dataset(const std::filesystem::path& dir);

}  // namespace interpconv::data
