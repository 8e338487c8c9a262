#include "interpconv/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "interpconv/errors.hpp"
#include "interpconv/interp_layer.hpp"

namespace interpconv::metrics {

namespace {

void check_map(std::span<const double> map, int n, int image_size) {
    if (n < 1 || map.size() != static_cast<std::size_t>(n) * static_cast<std::size_t>(n)) {
        throw ShapeError("map does not hold n x n values");
    }
    if (image_size < n) throw ShapeError("image smaller than the feature map");
}

// Map cell covering pixel p along an axis of `image_size` pixels and n cells.
int cell_of(int p, int n, int image_size) {
    return static_cast<int>(static_cast<long long>(p) * n / image_size);
}

}  // namespace

double activation_threshold(std::span<const double> values) {
    if (values.empty()) throw InputError("activation threshold needs at least one value");
    std::vector<double> sorted(values.begin(), values.end());
    const auto rank = static_cast<std::size_t>(std::ceil(0.995 * static_cast<double>(sorted.size()) - 1e-9));
    const std::size_t pos = std::clamp<std::size_t>(rank, 1, sorted.size()) - 1;
    std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(pos), sorted.end());
    return sorted[pos];
}

std::vector<double> upsample_blocks(std::span<const double> map, int n, int image_size) {
    check_map(map, n, image_size);
    std::vector<double> out(static_cast<std::size_t>(image_size) * static_cast<std::size_t>(image_size));
    for (int r = 0; r < image_size; ++r) {
        const int i = cell_of(r, n, image_size);
        for (int c = 0; c < image_size; ++c) {
            out[static_cast<std::size_t>(r * image_size + c)] =
                map[static_cast<std::size_t>(i * n + cell_of(c, n, image_size))];
        }
    }
    return out;
}

Mask dilate_disc(const Mask& mask, int size, int radius) {
    if (mask.size() != static_cast<std::size_t>(size) * static_cast<std::size_t>(size)) {
        throw ShapeError("mask does not hold size x size values");
    }
    if (radius < 0) throw ParameterError("dilation radius must be >= 0");
    if (radius == 0) return mask;
    std::vector<std::pair<int, int>> disc;
    for (int dr = -radius; dr <= radius; ++dr) {
        for (int dc = -radius; dc <= radius; ++dc) {
            if (dr * dr + dc * dc <= radius * radius) disc.emplace_back(dr, dc);
        }
    }
    Mask out(mask.size(), 0);
    for (int r = 0; r < size; ++r) {
        for (int c = 0; c < size; ++c) {
            if (!mask[static_cast<std::size_t>(r * size + c)]) continue;
            for (auto [dr, dc] : disc) {
                const int rr = r + dr, cc = c + dc;
                if (rr >= 0 && rr < size && cc >= 0 && cc < size) out[static_cast<std::size_t>(rr * size + cc)] = 1;
            }
        }
    }
    return out;
}

Mask valid_region_rf(std::span<const double> map, int n, double threshold, int image_size, int radius) {
    check_map(map, n, image_size);
    Mask out(static_cast<std::size_t>(image_size) * static_cast<std::size_t>(image_size), 0);
    for (int r = 0; r < image_size; ++r) {
        const int i = cell_of(r, n, image_size);
        for (int c = 0; c < image_size; ++c) {
            if (map[static_cast<std::size_t>(i * n + cell_of(c, n, image_size))] > threshold) {
                out[static_cast<std::size_t>(r * image_size + c)] = 1;
            }
        }
    }
    return dilate_disc(out, image_size, radius);
}

double iou(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b) {
    if (a.size() != b.size()) throw ShapeError("iou of masks with different sizes");
    std::size_t inter = 0, uni = 0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        const bool x = a[k] != 0, y = b[k] != 0;
        inter += x && y;
        uni += x || y;
    }
    return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

InterpretabilityResult part_interpretability(const std::vector<std::vector<double>>& ious, double iou_threshold) {
    InterpretabilityResult res;
    res.per_part.assign(ious.size(), std::numeric_limits<double>::quiet_NaN());
    for (std::size_t k = 0; k < ious.size(); ++k) {
        if (ious[k].empty()) continue;
        const auto hits = std::count_if(ious[k].begin(), ious[k].end(), [&](double v) { return v > iou_threshold; });
        res.per_part[k] = static_cast<double>(hits) / static_cast<double>(ious[k].size());
        if (res.best_part < 0 || res.per_part[k] > res.p_f) {
            res.p_f = res.per_part[k];
            res.best_part = static_cast<int>(k);
        }
    }
    return res;
}

data::Point infer_part_location(GridIndex mu, int n, int image_size) {
    const double cell = static_cast<double>(image_size) / n;
    return {(mu.col - 0.5) * cell, (mu.row - 0.5) * cell};
}

data::Point infer_part_location(std::span<const double> map, int n, int image_size) {
    check_map(map, n, image_size);
    return infer_part_location(select_template(map, n), n, image_size);
}

double normalized_distance(data::Point a, data::Point b, int width, int height) {
    const double diag = std::sqrt(static_cast<double>(width) * width + static_cast<double>(height) * height);
    return std::hypot(a.x - b.x, a.y - b.y) / diag;
}

std::optional<double> location_deviation(std::span<const double> distances) {
    if (distances.size() < 2) return std::nullopt;
    const double n = static_cast<double>(distances.size());
    // shifted by the first value so constant input gives exactly zero
    const double shift = distances[0];
    double mean = 0.0;
    for (double d : distances) mean += d - shift;
    mean /= n;
    double ss = 0.0;
    for (double d : distances) ss += (d - shift - mean) * (d - shift - mean);
    return std::sqrt(ss / n);
}

std::vector<std::size_t> select_top(std::span<const double> scores, std::size_t count) {
    std::vector<std::size_t> idx(scores.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    idx.resize(std::min(count, idx.size()));
    return idx;
}

namespace {

std::optional<double> mean_available(const std::vector<std::optional<double>>& row) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& v : row) {
        if (v) {
            sum += *v;
            ++n;
        }
    }
    if (n == 0) return std::nullopt;
    return sum / static_cast<double>(n);
}

}  // namespace

std::optional<double> location_instability(const std::vector<std::vector<std::optional<double>>>& table) {
    std::vector<std::optional<double>> per_filter;
    for (const auto& row : table) per_filter.push_back(mean_available(row));
    return mean_available(per_filter);
}

std::optional<double> multi_category_instability(
    const std::vector<std::vector<std::vector<std::optional<double>>>>& table) {
    std::vector<std::optional<double>> per_filter;
    for (const auto& filter : table) {
        std::optional<double> best;
        for (const auto& category : filter) {
            const auto m = mean_available(category);
            if (m && (!best || *m < *best)) best = m;
        }
        per_filter.push_back(best);
    }
    return mean_available(per_filter);
}

std::vector<double> part_distribution_heatmap(const std::vector<std::vector<std::vector<double>>>& maps, int n,
                                              int image_size) {
    std::vector<double> heat(static_cast<std::size_t>(image_size) * static_cast<std::size_t>(image_size), 0.0);
    if (maps.empty()) return heat;
    std::vector<double> cells(static_cast<std::size_t>(n) * static_cast<std::size_t>(n));
    for (const auto& image : maps) {
        std::fill(cells.begin(), cells.end(), 0.0);
        for (const auto& m : image) {
            check_map(m, n, image_size);
            for (std::size_t k = 0; k < cells.size(); ++k) cells[k] += m[k];
        }
        const auto up = upsample_blocks(cells, n, image_size);
        for (std::size_t k = 0; k < heat.size(); ++k) heat[k] += up[k];
    }
    for (auto& v : heat) v /= static_cast<double>(maps.size());
    const double peak = *std::max_element(heat.begin(), heat.end());
    if (peak > 0.0) {
        for (auto& v : heat) v /= peak;
    }
    return heat;
}

}  // namespace interpconv::metrics
