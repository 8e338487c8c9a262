#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "interpconv/synth_data.hpp"
#include "interpconv/template_bank.hpp"

namespace interpconv::metrics {

/// Binary image-resolution mask, row-major, values in {0, 1}.
using Mask = std::vector<std::uint8_t>;

/// Value at 1-based position ceil(0.995 N) of the ascending sort of all values.
/// Throws InputError when empty.
double activation_threshold(std::span<const double> values);

/// Cells of the n x n map strictly above `threshold`, block-upsampled to
/// image_size x image_size and optionally dilated by a disc of `radius` pixels.
Mask valid_region_rf(std::span<const double> map, int n, double threshold, int image_size, int radius = 0);

/// Pixels within Euclidean distance `radius` (between pixel centres) of a set pixel.
Mask dilate_disc(const Mask& mask, int size, int radius);

/// |a & b| / |a | b|, 0 when the union is empty. Throws ShapeError on a size mismatch.
double iou(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b);

struct InterpretabilityResult {
    double p_f = 0.0;
    std::vector<double> per_part;  // P_{f,k}; NaN for parts with no images
    int best_part = -1;
};

/// ious[k] holds the IoU of the filter region with part k on every image that
/// contains part k. P_{f,k} is the fraction strictly above `iou_threshold`;
/// P_f (the maximum over parts) is 0 when no part has images.
InterpretabilityResult part_interpretability(const std::vector<std::vector<double>>& ious,
                                             double iou_threshold = 0.2);

/// Centre of the upsampled block of mu: ((col - 0.5) W / n, (row - 0.5) H / n).
data::Point infer_part_location(GridIndex mu, int n, int image_size);
/// Same, for the argmax of the map (ties to the smallest row-major index).
data::Point infer_part_location(std::span<const double> map, int n, int image_size);

/// |a - b| / sqrt(w^2 + h^2)
double normalized_distance(data::Point a, data::Point b, int width, int height);

/// Population standard deviation of the distances; nullopt with fewer than two.
std::optional<double> location_deviation(std::span<const double> distances);

/// Indices of the `count` largest scores (descending, ties to the earlier index).
std::vector<std::size_t> select_top(std::span<const double> scores, std::size_t count);

/// mean_f mean_k D_{f,k} over the available entries of table[f][k]. Filters
/// with no available entry are skipped; nullopt when nothing is available.
std::optional<double> location_instability(const std::vector<std::vector<std::optional<double>>>& table);

/// mean_f min_c mean_{k in Part_c} D_{f,c,k} for table[f][c][k].
std::optional<double> multi_category_instability(
    const std::vector<std::vector<std::vector<std::optional<double>>>>& table);

/// maps[image][filter] holds n x n maps. Sum over filters of the upsampled
/// maps, averaged over images, scaled so the maximum is 1 (all zero stays zero).
std::vector<double> part_distribution_heatmap(const std::vector<std::vector<std::vector<double>>>& maps, int n,
                                              int image_size);

/// Nearest-neighbour block upsampling of an n x n map to image_size x image_size.
std::vector<double> upsample_blocks(std::span<const double> map, int n, int image_size);

}  // namespace interpconv::metrics
