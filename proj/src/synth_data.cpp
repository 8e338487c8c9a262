#include "interpconv/synth_data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>

#include "interpconv/errors.hpp"
#include "interpconv/pgm.hpp"

namespace interpconv::data {

namespace {

constexpr const char* kGlyphNames[] = {"disc", "square", "triangle", "cross", "ring",
                                       "diamond", "hbar", "vbar", "x", "twobar"};

double quantize(double v) { return std::lround(std::clamp(v, 0.0, 1.0) * 255.0) / 255.0; }

struct Placement {
    int top = 0;
    int left = 0;
};

}  // namespace

std::string to_string(Glyph g) { return kGlyphNames[static_cast<int>(g)]; }

Glyph parse_glyph(std::string_view name) {
    for (int k = 0; k < static_cast<int>(std::size(kGlyphNames)); ++k) {
        if (name == kGlyphNames[k]) return static_cast<Glyph>(k);
    }
    throw ParameterError("unknown glyph '" + std::string(name) + "'");
}

std::vector<std::uint8_t> rasterize_glyph(Glyph g, int size) {
    if (size < 3) throw ParameterError("glyph size must be >= 3");
    std::vector<std::uint8_t> out(static_cast<std::size_t>(size * size), 0);
    for (int r = 0; r < size; ++r) {
        for (int c = 0; c < size; ++c) {
            // pixel centre mapped to [-1, 1]
            const double u = (c + 0.5) / size * 2.0 - 1.0;
            const double v = (r + 0.5) / size * 2.0 - 1.0;
            const double rad = std::sqrt(u * u + v * v);
            bool on = false;
            switch (g) {
                case Glyph::disc: on = rad <= 1.0; break;
                case Glyph::square: on = true; break;
                case Glyph::triangle: on = std::abs(u) <= (v + 1.0) / 2.0; break;
                case Glyph::cross: on = std::abs(u) <= 0.3 || std::abs(v) <= 0.3; break;
                case Glyph::ring: on = rad <= 1.0 && rad >= 0.5; break;
                case Glyph::diamond: on = std::abs(u) + std::abs(v) <= 1.0; break;
                case Glyph::hbar: on = std::abs(v) <= 0.35; break;
                case Glyph::vbar: on = std::abs(u) <= 0.35; break;
                case Glyph::x: on = std::abs(std::abs(u) - std::abs(v)) <= 0.35; break;
                case Glyph::twobar: on = std::abs(u) >= 0.4 && std::abs(u) <= 0.9; break;
            }
            out[static_cast<std::size_t>(r * size + c)] = on ? 1 : 0;
        }
    }
    return out;
}

std::vector<CategorySpec> default_benchmark(int image_size) {
    const double s = image_size / 64.0;
    auto px = [s](int v) { return static_cast<int>(std::lround(v * s)); };
    const Glyph heads[] = {Glyph::disc, Glyph::triangle, Glyph::cross, Glyph::diamond};
    const Glyph legs[] = {Glyph::vbar, Glyph::twobar, Glyph::vbar, Glyph::twobar};
    const char* names[] = {"disc_head", "triangle_head", "cross_head", "diamond_head"};
    std::vector<CategorySpec> specs;
    for (int c = 0; c < 4; ++c) {
        CategorySpec cs;
        cs.id = c;
        cs.name = names[c];
        cs.parts = {
            {"head", heads[c], px(-14), 0, px(12)},
            {"torso", Glyph::square, 0, 0, px(16)},
            {"leg", legs[c], px(13), 0, px(10)},
        };
        // rounded down so the scaled layout keeps its margin
        cs.jitter = static_cast<int>(10 * s);
        cs.part_jitter = static_cast<int>(2 * s);
        cs.clutter_density = 1.0;
        specs.push_back(cs);
    }
    return specs;
}

const CategorySpec& Dataset::category(int id) const {
    for (const auto& c : categories) {
        if (c.id == id) return c;
    }
    throw DataError("unknown category id " + std::to_string(id));
}

void validate_specs(const std::vector<CategorySpec>& specs, int image_size) {
    if (specs.size() < 2) throw ParameterError("need at least 2 categories");
    if (image_size < 32) throw ParameterError("image size must be >= 32");
    std::set<int> ids;
    for (std::size_t k = 0; k < specs.size(); ++k) {
        const auto& cs = specs[k];
        if (cs.id != static_cast<int>(k)) throw ParameterError("category ids must be 0..C-1 in order");
        ids.insert(cs.id);
        if (cs.parts.empty()) throw ParameterError("category " + cs.name + " has no parts");
        if (cs.jitter < 0 || cs.part_jitter < 0 || cs.clutter_density < 0.0) {
            throw ParameterError("negative jitter or clutter in category " + cs.name);
        }
        const int center = image_size / 2;
        const int slack = cs.jitter + cs.part_jitter;
        for (const auto& p : cs.parts) {
            if (p.size < 3) throw ParameterError("part " + p.name + " is degenerate");
            const int top = center + p.offset_row - p.size / 2;
            const int left = center + p.offset_col - p.size / 2;
            if (top - slack < 0 || left - slack < 0 || top + p.size + slack > image_size ||
                left + p.size + slack > image_size) {
                throw ParameterError("part " + p.name + " of category " + cs.name +
                                     " can leave the canvas under jitter");
            }
            const auto mask = rasterize_glyph(p.glyph, p.size);
            if (std::count(mask.begin(), mask.end(), 1) == 0) throw ParameterError("part " + p.name + " has no area");
        }
    }
    for (std::size_t a = 0; a < specs.size(); ++a) {
        for (std::size_t b = a + 1; b < specs.size(); ++b) {
            const auto& pa = specs[a].parts;
            const auto& pb = specs[b].parts;
            bool differs = pa.size() != pb.size();
            for (std::size_t k = 0; !differs && k < pa.size(); ++k) differs = pa[k].glyph != pb[k].glyph;
            if (!differs) {
                throw ParameterError("categories " + specs[a].name + " and " + specs[b].name +
                                     " share every part glyph");
            }
        }
    }
}

namespace {

SampleRecord render_sample(const CategorySpec& cs, int size, std::mt19937_64& rng) {
    const std::size_t area = static_cast<std::size_t>(size) * static_cast<std::size_t>(size);
    std::uniform_int_distribution<int> jit(-cs.jitter, cs.jitter);
    std::uniform_int_distribution<int> pjit(-cs.part_jitter, cs.part_jitter);
    std::uniform_real_distribution<double> part_level(0.75, 1.0);
    std::uniform_real_distribution<double> clutter_level(0.3, 0.8);
    std::uniform_real_distribution<double> noise(0.0, 0.08);

    SampleRecord rec;
    rec.label = cs.id;
    rec.image.assign(area, 0.0);
    const int anchor_r = size / 2 + jit(rng);
    const int anchor_c = size / 2 + jit(rng);

    std::vector<std::uint8_t> occupied(area, 0);
    Box bbox{size, size, 0, 0};
    for (const auto& p : cs.parts) {
        const int top = anchor_r + p.offset_row - p.size / 2 + pjit(rng);
        const int left = anchor_c + p.offset_col - p.size / 2 + pjit(rng);
        const auto glyph = rasterize_glyph(p.glyph, p.size);
        const double level = part_level(rng);
        std::vector<std::uint8_t> mask(area, 0);
        double sx = 0.0, sy = 0.0;
        std::size_t count = 0;
        for (int r = 0; r < p.size; ++r) {
            for (int c = 0; c < p.size; ++c) {
                if (!glyph[static_cast<std::size_t>(r * p.size + c)]) continue;
                const int rr = top + r;
                const int cc = left + c;
                const auto idx = static_cast<std::size_t>(rr * size + cc);
                mask[idx] = 1;
                rec.image[idx] = std::max(rec.image[idx], level);
                sx += cc + 0.5;
                sy += rr + 0.5;
                ++count;
                bbox.x0 = std::min(bbox.x0, cc);
                bbox.y0 = std::min(bbox.y0, rr);
                bbox.x1 = std::max(bbox.x1, cc + 1);
                bbox.y1 = std::max(bbox.y1, rr + 1);
            }
        }
        rec.landmarks.push_back({sx / static_cast<double>(count), sy / static_cast<double>(count)});
        rec.part_masks.push_back(std::move(mask));
    }
    rec.bbox = bbox;

    // keep clutter two pixels away from every part
    for (const auto& m : rec.part_masks) {
        for (int r = 0; r < size; ++r) {
            for (int c = 0; c < size; ++c) {
                if (!m[static_cast<std::size_t>(r * size + c)]) continue;
                for (int dr = -2; dr <= 2; ++dr) {
                    for (int dc = -2; dc <= 2; ++dc) {
                        const int rr = r + dr, cc = c + dc;
                        if (rr >= 0 && rr < size && cc >= 0 && cc < size) occupied[static_cast<std::size_t>(rr * size + cc)] = 1;
                    }
                }
            }
        }
    }

    std::poisson_distribution<int> clutter_count(cs.clutter_density * static_cast<double>(area) / 1000.0);
    const int shapes = cs.clutter_density > 0.0 ? clutter_count(rng) : 0;
    std::uniform_int_distribution<int> clutter_size(3, 5);
    std::uniform_int_distribution<int> clutter_glyph(0, static_cast<int>(std::size(kGlyphNames)) - 1);
    for (int s = 0; s < shapes; ++s) {
        const int gs = clutter_size(rng);
        const auto glyph = rasterize_glyph(static_cast<Glyph>(clutter_glyph(rng)), gs);
        const double level = clutter_level(rng);
        std::uniform_int_distribution<int> pos(0, size - gs);
        for (int attempt = 0; attempt < 20; ++attempt) {
            const int top = pos(rng);
            const int left = pos(rng);
            bool free = true;
            for (int r = 0; r < gs && free; ++r) {
                for (int c = 0; c < gs && free; ++c) {
                    free = !occupied[static_cast<std::size_t>((top + r) * size + left + c)];
                }
            }
            if (!free) continue;
            for (int r = 0; r < gs; ++r) {
                for (int c = 0; c < gs; ++c) {
                    const auto idx = static_cast<std::size_t>((top + r) * size + left + c);
                    occupied[idx] = 1;
                    if (glyph[static_cast<std::size_t>(r * gs + c)]) rec.image[idx] = level;
                }
            }
            break;
        }
    }

    for (auto& v : rec.image) v = quantize(v + noise(rng));
    return rec;
}

}  // namespace

Dataset generate_dataset(const std::vector<CategorySpec>& specs, int count_per_category, int image_size,
                         std::uint64_t seed, std::uint64_t stream) {
    validate_specs(specs, image_size);
    if (count_per_category < 0) throw ParameterError("count per category must be >= 0");
    Dataset ds;
    ds.categories = specs;
    ds.image_size = image_size;
    ds.seed = seed;
    ds.stream = stream;
    ds.samples.reserve(specs.size() * static_cast<std::size_t>(count_per_category));
    for (const auto& cs : specs) {
        for (int k = 0; k < count_per_category; ++k) {
            std::seed_seq seq{seed, stream, static_cast<std::uint64_t>(cs.id), static_cast<std::uint64_t>(k)};
            std::mt19937_64 rng(seq);
            ds.samples.push_back(render_sample(cs, image_size, rng));
        }
    }
    return ds;
}

namespace {

using nlohmann::json;

std::string numbered(const char* prefix, std::size_t k, const char* suffix) {
    std::ostringstream os;
    os << prefix << std::setw(6) << std::setfill('0') << k << suffix;
    return os.str();
}

json spec_to_json(const CategorySpec& cs) {
    json parts = json::array();
    for (const auto& p : cs.parts) {
        parts.push_back({{"name", p.name},
                         {"glyph", to_string(p.glyph)},
                         {"offset", {p.offset_row, p.offset_col}},
                         {"size", p.size}});
    }
    return {{"id", cs.id},
            {"name", cs.name},
            {"parts", parts},
            {"jitter", cs.jitter},
            {"part_jitter", cs.part_jitter},
            {"clutter_density", cs.clutter_density}};
}

CategorySpec spec_from_json(const json& j) {
    CategorySpec cs;
    cs.id = j.at("id").get<int>();
    cs.name = j.at("name").get<std::string>();
    cs.jitter = j.at("jitter").get<int>();
    cs.part_jitter = j.at("part_jitter").get<int>();
    cs.clutter_density = j.at("clutter_density").get<double>();
    for (const auto& p : j.at("parts")) {
        PartSpec ps;
        ps.name = p.at("name").get<std::string>();
        ps.glyph = parse_glyph(p.at("glyph").get<std::string>());
        ps.offset_row = p.at("offset").at(0).get<int>();
        ps.offset_col = p.at("offset").at(1).get<int>();
        ps.size = p.at("size").get<int>();
        cs.parts.push_back(ps);
    }
    return cs;
}

}  // namespace

void save_dataset(const Dataset& ds, const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir / "images");
    fs::create_directories(dir / "masks");
    json manifest;
    manifest["format"] = "interpconv-dataset";
    manifest["version"] = 1;
    manifest["image_size"] = ds.image_size;
    manifest["seed"] = ds.seed;
    manifest["stream"] = ds.stream;
    manifest["categories"] = json::array();
    for (const auto& cs : ds.categories) manifest["categories"].push_back(spec_to_json(cs));
    manifest["samples"] = json::array();
    const int n = ds.image_size;
    for (std::size_t k = 0; k < ds.samples.size(); ++k) {
        const auto& s = ds.samples[k];
        const auto image_rel = numbered("images/", k, ".pgm");
        write_pgm(dir / image_rel, to_gray(s.image, n, n));
        json masks = json::array();
        json landmarks = json::array();
        for (std::size_t p = 0; p < s.part_masks.size(); ++p) {
            const auto mask_rel = numbered("masks/", k, ("_" + std::to_string(p) + ".pgm").c_str());
            GrayImage m{n, n, {}};
            m.pixels.resize(s.part_masks[p].size());
            for (std::size_t i = 0; i < m.pixels.size(); ++i) m.pixels[i] = s.part_masks[p][i] ? 255 : 0;
            write_pgm(dir / mask_rel, m);
            masks.push_back(mask_rel);
            landmarks.push_back({s.landmarks[p].x, s.landmarks[p].y});
        }
        manifest["samples"].push_back({{"image", image_rel},
                                       {"label", s.label},
                                       {"masks", masks},
                                       {"landmarks", landmarks},
                                       {"bbox", {s.bbox.x0, s.bbox.y0, s.bbox.x1, s.bbox.y1}}});
    }
    std::ofstream out(dir / "dataset.json");
    if (!out) throw DataError("cannot write " + (dir / "dataset.json").string());
    out << manifest.dump(1) << '\n';
}

Dataset load_dataset(const std::filesystem::path& dir) {
    const auto manifest_path = dir / "dataset.json";
    std::ifstream in(manifest_path);
    if (!in) throw DataError("missing dataset manifest " + manifest_path.string());
    Dataset ds;
    try {
        const json manifest = json::parse(in);
        if (manifest.value("format", "") != "interpconv-dataset") throw DataError("not a dataset manifest");
        ds.image_size = manifest.at("image_size").get<int>();
        ds.seed = manifest.at("seed").get<std::uint64_t>();
        ds.stream = manifest.at("stream").get<std::uint64_t>();
        for (const auto& c : manifest.at("categories")) ds.categories.push_back(spec_from_json(c));
        const int n = ds.image_size;
        for (const auto& j : manifest.at("samples")) {
            SampleRecord s;
            const auto img = read_pgm(dir / j.at("image").get<std::string>());
            if (img.width != n || img.height != n) throw DataError("image size mismatch in " + j.at("image").dump());
            s.image = from_gray(img);
            s.label = j.at("label").get<int>();
            if (s.label < 0 || s.label >= ds.category_count()) throw DataError("label out of range");
            for (const auto& m : j.at("masks")) {
                const auto mask = read_pgm(dir / m.get<std::string>());
                if (mask.width != n || mask.height != n) throw DataError("mask size mismatch in " + m.dump());
                std::vector<std::uint8_t> bits(mask.pixels.size());
                for (std::size_t i = 0; i < bits.size(); ++i) bits[i] = mask.pixels[i] ? 1 : 0;
                s.part_masks.push_back(std::move(bits));
            }
            for (const auto& l : j.at("landmarks")) s.landmarks.push_back({l.at(0).get<double>(), l.at(1).get<double>()});
            if (s.landmarks.size() != s.part_masks.size()) throw DataError("landmark and mask counts differ");
            const auto& b = j.at("bbox");
            s.bbox = {b.at(0).get<int>(), b.at(1).get<int>(), b.at(2).get<int>(), b.at(3).get<int>()};
            ds.samples.push_back(std::move(s));
        }
    } catch (const json::exception& e) {
        throw DataError("malformed dataset manifest " + manifest_path.string() + ": " + e.what());
    }
    return ds;
}

}  // namespace interpconv::data
