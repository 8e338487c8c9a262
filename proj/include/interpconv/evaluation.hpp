#pragma once

#include <optional>
#include <vector>

#include <json.hpp>

#include "interpconv/metrics.hpp"
#include "interpconv/nn/network.hpp"
#include "interpconv/nn/trainer.hpp"
#include "interpconv/synth_data.hpp"

namespace interpconv {

/// Images as {1, H, W} tensors with their labels.
nn::LabeledSet to_labeled_set(const data::Dataset& dataset);

struct EvalConfig {
    double iou_threshold = 0.2;
    std::size_t top_n = 100;
    int dilation_radius = 0;
    /// Interp layer to evaluate, counted from 0; -1 selects the topmost.
    int layer = -1;
};

/// Output maps (after ReLU and mask) of one interp layer on every image.
struct LayerMaps {
    std::size_t layer_index = 0;  // position in the network
    int n = 0;
    int filters = 0;
    std::vector<std::vector<double>> maps;  // [image] -> filters * n * n
    std::vector<int> predictions;

    std::span<const double> map(std::size_t image, int filter) const {
        const std::size_t cells = static_cast<std::size_t>(n) * static_cast<std::size_t>(n);
        return std::span<const double>(maps[image]).subspan(static_cast<std::size_t>(filter) * cells, cells);
    }
};

LayerMaps collect_maps(nn::Network& network, const data::Dataset& dataset, int layer = -1);

struct FilterReport {
    int filter = 0;
    double threshold = 0.0;
    int assigned_category = 0;
    bool silent = false;  // never activates on any image
    metrics::InterpretabilityResult interpretability;
    /// D_{f,k} for the landmarks of the assigned category.
    std::vector<std::optional<double>> deviation;
    /// D_{f,c,k} for every category c and its landmarks k.
    std::vector<std::vector<std::optional<double>>> deviation_by_category;
};

struct MetricReport {
    EvalConfig config;
    std::size_t layer_index = 0;
    int map_size = 0;
    std::size_t images = 0;
    double accuracy = 0.0;
    std::vector<FilterReport> filters;
    double mean_interpretability = 0.0;
    std::optional<double> location_instability;
    std::optional<double> multi_category_instability;
};

/// P_f is measured on the assigned category's images, D on the top-N images of
/// each category ranked by the filter's peak activation. The assigned category
/// of a filter is the one with the highest mean total activation.
MetricReport evaluate_maps(const LayerMaps& maps, const data::Dataset& dataset, const EvalConfig& config);
MetricReport evaluate(nn::Network& network, const data::Dataset& dataset, const EvalConfig& config);

nlohmann::json to_json(const MetricReport& report);

/// Heat map over all filters of the layer on the given images (all when empty).
std::vector<double> layer_heatmap(const LayerMaps& maps, const std::vector<std::size_t>& images, int image_size);

}  // namespace interpconv
