#include <gtest/gtest.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <filesystem>
#include <fstream>
#include <set>

#include "interpconv/errors.hpp"
#include "interpconv/pgm.hpp"
#include "interpconv/synth_data.hpp"

using namespace interpconv;
using namespace interpconv::data;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("interpconv_synth_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

}  // namespace

TEST(Glyphs, EveryGlyphHasAreaAtEverySize) {
    for (int g = 0; g <= static_cast<int>(Glyph::twobar); ++g) {
        const auto glyph = static_cast<Glyph>(g);
        EXPECT_EQ(parse_glyph(to_string(glyph)), glyph);
        for (int size = 3; size <= 16; ++size) {
            const auto m = rasterize_glyph(glyph, size);
            EXPECT_GT(std::count(m.begin(), m.end(), 1), 0) << to_string(glyph) << " " << size;
        }
    }
    EXPECT_THROW(parse_glyph("blob"), ParameterError);
    EXPECT_THROW(rasterize_glyph(Glyph::disc, 2), ParameterError);
}

TEST(Generate, SameSeedIsIdenticalOtherSeedDiffers) {
    const auto specs = default_benchmark(64);
    const auto a = generate_dataset(specs, 5, 64, 11);
    const auto b = generate_dataset(specs, 5, 64, 11);
    const auto c = generate_dataset(specs, 5, 64, 12);
    const auto d = generate_dataset(specs, 5, 64, 11, 1);
    EXPECT_EQ(a, b);
    EXPECT_NE(a.samples, c.samples);
    EXPECT_NE(a.samples, d.samples);
}

TEST(Generate, ClassBalanceIsExact) {
    const auto ds = generate_dataset(default_benchmark(64), 7, 64, 3);
    std::map<int, int> counts;
    for (const auto& s : ds.samples) ++counts[s.label];
    ASSERT_EQ(counts.size(), 4u);
    for (auto [label, n] : counts) EXPECT_EQ(n, 7) << label;
}

TEST(Generate, MasksAreNonEmptyAndLandmarksAreCentroids) {
    const int size = 64;
    const auto ds = generate_dataset(default_benchmark(size), 10, size, 4);
    for (const auto& s : ds.samples) {
        ASSERT_EQ(s.part_masks.size(), 3u);
        ASSERT_EQ(s.landmarks.size(), 3u);
        EXPECT_EQ(s.image.size(), static_cast<std::size_t>(size * size));
        for (std::size_t p = 0; p < 3; ++p) {
            const auto& m = s.part_masks[p];
            ASSERT_EQ(m.size(), static_cast<std::size_t>(size * size));
            double sx = 0, sy = 0, n = 0;
            for (int r = 0; r < size; ++r)
                for (int c = 0; c < size; ++c)
                    if (m[static_cast<std::size_t>(r * size + c)]) {
                        sx += c + 0.5;
                        sy += r + 0.5;
                        n += 1;
                        EXPECT_GE(c, s.bbox.x0);
                        EXPECT_LT(c, s.bbox.x1);
                        EXPECT_GE(r, s.bbox.y0);
                        EXPECT_LT(r, s.bbox.y1);
                    }
            ASSERT_GT(n, 0);
            EXPECT_NEAR(s.landmarks[p].x, sx / n, 1e-12);
            EXPECT_NEAR(s.landmarks[p].y, sy / n, 1e-12);
        }
    }
}

TEST(Generate, PixelsAreQuantisedAndClutterAvoidsParts) {
    const int size = 64;
    const auto ds = generate_dataset(default_benchmark(size), 10, size, 5);
    for (const auto& s : ds.samples) {
        std::vector<std::uint8_t> any(s.image.size(), 0);
        for (const auto& m : s.part_masks)
            for (std::size_t k = 0; k < m.size(); ++k) any[k] |= m[k];
        for (int r = 0; r < size; ++r)
            for (int c = 0; c < size; ++c) {
                const auto k = static_cast<std::size_t>(r * size + c);
                const double v = s.image[k];
                EXPECT_GE(v, 0.0);
                EXPECT_LE(v, 1.0);
                EXPECT_DOUBLE_EQ(v * 255.0, std::round(v * 255.0));
                if (any[k]) {
                    EXPECT_GE(v, 0.75 - 1e-12);
                } else if (v > 0.2) {
                    // clutter: nothing of a part within two pixels
                    for (int dr = -2; dr <= 2; ++dr)
                        for (int dc = -2; dc <= 2; ++dc) {
                            const int rr = r + dr, cc = c + dc;
                            if (rr < 0 || rr >= size || cc < 0 || cc >= size) continue;
                            EXPECT_EQ(any[static_cast<std::size_t>(rr * size + cc)], 0);
                        }
                }
            }
    }
}

TEST(Generate, CategoriesDifferInSomeGlyph) {
    const auto specs = default_benchmark(64);
    std::set<Glyph> heads;
    for (const auto& cs : specs) heads.insert(cs.parts[0].glyph);
    EXPECT_EQ(heads.size(), specs.size());
    for (const auto& cs : specs) EXPECT_EQ(cs.parts[1].glyph, Glyph::square);
}

TEST(Generate, FourHundredImagesUnderTenSeconds) {
    const auto start = std::chrono::steady_clock::now();
    const auto ds = generate_dataset(default_benchmark(64), 100, 64, 6);
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    EXPECT_EQ(ds.samples.size(), 400u);
    EXPECT_LT(seconds, 10.0);
}

TEST(Generate, RejectsInvalidSpecs) {
    auto specs = default_benchmark(64);
    EXPECT_THROW(generate_dataset({specs[0]}, 2, 64, 1), ParameterError);
    EXPECT_THROW(generate_dataset(specs, 2, 16, 1), ParameterError);

    auto same = specs;
    same[1].parts = same[0].parts;
    EXPECT_THROW(generate_dataset(same, 2, 64, 1), ParameterError);

    auto outside = specs;
    outside[0].jitter = 30;
    EXPECT_THROW(generate_dataset(outside, 2, 64, 1), ParameterError);

    auto tiny = specs;
    tiny[2].parts[0].size = 1;
    EXPECT_THROW(generate_dataset(tiny, 2, 64, 1), ParameterError);
}

TEST(Generate, ScaledBenchmarkFitsOtherSizes) {
    for (int size : {32, 40, 48, 56, 72, 96, 128}) {
        const auto ds = generate_dataset(default_benchmark(size), 2, size, 1);
        EXPECT_EQ(ds.samples.size(), 8u);
    }
}

TEST(SaveLoad, RoundTripIsLossless) {
    const auto dir = scratch_dir("roundtrip");
    const auto ds = generate_dataset(default_benchmark(64), 3, 64, 8);
    save_dataset(ds, dir);
    EXPECT_TRUE(fs::exists(dir / "dataset.json"));
    EXPECT_EQ(load_dataset(dir), ds);
    fs::remove_all(dir);
}

TEST(SaveLoad, MissingManifestIsDataError) {
    const auto dir = scratch_dir("missing");
    EXPECT_THROW(load_dataset(dir), DataError);
    fs::remove_all(dir);
}

TEST(SaveLoad, TruncatedImageIsDataError) {
    const auto dir = scratch_dir("truncated");
    save_dataset(generate_dataset(default_benchmark(64), 1, 64, 9), dir);
    const auto image = dir / "images" / "000002.pgm";
    const auto full = fs::file_size(image);
    fs::resize_file(image, full - 100);
    try {
        load_dataset(dir);
        FAIL() << "expected DataError";
    } catch (const DataError& e) {
        EXPECT_NE(std::string(e.what()).find("truncated"), std::string::npos);
    }
    fs::remove_all(dir);
}

TEST(SaveLoad, CorruptManifestIsDataError) {
    const auto dir = scratch_dir("corrupt");
    save_dataset(generate_dataset(default_benchmark(64), 1, 64, 9), dir);
    std::ofstream(dir / "dataset.json") << "{\"format\": \"interpconv-dataset\", \"image_size\": ";
    EXPECT_THROW(load_dataset(dir), DataError);
    fs::remove_all(dir);
}

TEST(Pgm, RoundTripAndHeaderChecks) {
    const auto dir = scratch_dir("pgm");
    GrayImage img{3, 2, {0, 10, 20, 30, 40, 255}};
    write_pgm(dir / "a.pgm", img);
    EXPECT_EQ(read_pgm(dir / "a.pgm"), img);
    std::ofstream(dir / "b.pgm") << "P2\n3 2\n255\n";
    EXPECT_THROW(read_pgm(dir / "b.pgm"), DataError);
    EXPECT_THROW(read_pgm(dir / "nope.pgm"), DataError);
    fs::remove_all(dir);
}
