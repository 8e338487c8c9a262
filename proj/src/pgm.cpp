#include "interpconv/pgm.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

#include "interpconv/errors.hpp"

namespace interpconv {

void write_pgm(const std::filesystem::path& path, const GrayImage& image) {
    if (image.pixels.size() != static_cast<std::size_t>(image.width) * static_cast<std::size_t>(image.height)) {
        throw ShapeError("pgm pixel count does not match " + std::to_string(image.width) + "x" +
                         std::to_string(image.height));
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    out << "P5\n" << image.width << ' ' << image.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(image.pixels.data()), static_cast<std::streamsize>(image.pixels.size()));
    if (!out) throw DataError("write failed for " + path.string());
}

namespace {

int read_header_int(std::istream& in, const std::filesystem::path& path) {
    int c = in.peek();
    while (c != EOF) {
        if (c == '#') {
            std::string skip;
            std::getline(in, skip);
        } else if (std::isspace(c)) {
            in.get();
        } else {
            break;
        }
        c = in.peek();
    }
    int v = -1;
    if (!(in >> v) || v < 0) throw DataError("malformed pgm header in " + path.string());
    return v;
}

}  // namespace

GrayImage read_pgm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    char magic[2] = {0, 0};
    in.read(magic, 2);
    if (!in || magic[0] != 'P' || magic[1] != '5') throw DataError("not a binary pgm: " + path.string());
    GrayImage img;
    img.width = read_header_int(in, path);
    img.height = read_header_int(in, path);
    const int maxval = read_header_int(in, path);
    if (maxval != 255) throw DataError("unsupported pgm maxval in " + path.string());
    if (!std::isspace(in.get())) throw DataError("malformed pgm header in " + path.string());
    img.pixels.resize(static_cast<std::size_t>(img.width) * static_cast<std::size_t>(img.height));
    in.read(reinterpret_cast<char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
    if (in.gcount() != static_cast<std::streamsize>(img.pixels.size())) {
        throw DataError("truncated pgm " + path.string() + ": expected " + std::to_string(img.pixels.size()) +
                        " bytes, got " + std::to_string(in.gcount()));
    }
    return img;
}

GrayImage to_gray(const std::vector<double>& values, int width, int height) {
    GrayImage img{width, height, {}};
    if (values.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
        throw ShapeError("value count does not match image size");
    }
    img.pixels.resize(values.size());
    for (std::size_t k = 0; k < values.size(); ++k) {
        const double v = std::clamp(values[k], 0.0, 1.0);
        img.pixels[k] = static_cast<std::uint8_t>(std::lround(v * 255.0));
    }
    return img;
}

std::vector<double> from_gray(const GrayImage& image) {
    std::vector<double> out(image.pixels.size());
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = image.pixels[k] / 255.0;
    return out;
}

}  // namespace interpconv
