#include "interpconv/evaluation.hpp"

#include <algorithm>
#include <cmath>

#include "interpconv/errors.hpp"

namespace interpconv {

nn::LabeledSet to_labeled_set(const data::Dataset& dataset) {
    nn::LabeledSet set;
    set.categories = dataset.category_count();
    const auto n = static_cast<std::size_t>(dataset.image_size);
    for (const auto& s : dataset.samples) {
        set.inputs.emplace_back(std::vector<std::size_t>{1, n, n}, s.image);
        set.labels.push_back(s.label);
    }
    return set;
}

LayerMaps collect_maps(nn::Network& network, const data::Dataset& dataset, int layer) {
    const auto indices = network.interp_layer_indices();
    if (indices.empty()) throw ConfigError("network has no interp layer to evaluate");
    if (layer >= static_cast<int>(indices.size()) || layer < -1) {
        throw ConfigError("interp layer " + std::to_string(layer) + " does not exist");
    }
    const std::size_t pick = layer < 0 ? indices.size() - 1 : static_cast<std::size_t>(layer);
    auto* target = network.interp_layers()[pick];
    if (dataset.image_size != network.config().input.height || network.config().input.channels != 1) {
        throw DataError("dataset images do not match the network input");
    }

    LayerMaps out;
    out.layer_index = indices[pick];
    out.n = target->map_size();
    out.filters = target->filters();
    const auto set = to_labeled_set(dataset);
    for (std::size_t k = 0; k < set.size(); ++k) {
        const nn::PassContext ctx{set.labels[k], false};
        const auto& scores = network.forward(set.inputs[k], ctx);
        out.predictions.push_back(network.predict(scores));
        const auto v = target->masked().values();
        out.maps.emplace_back(v.begin(), v.end());
    }
    return out;
}

MetricReport evaluate_maps(const LayerMaps& maps, const data::Dataset& dataset, const EvalConfig& config) {
    if (maps.maps.size() != dataset.samples.size()) throw ShapeError("map count differs from sample count");
    if (dataset.samples.empty()) throw InputError("cannot evaluate an empty dataset");
    MetricReport report;
    report.config = config;
    report.layer_index = maps.layer_index;
    report.map_size = maps.n;
    report.images = dataset.samples.size();

    const int size = dataset.image_size;
    const int categories = dataset.category_count();
    std::size_t correct = 0;
    std::vector<std::vector<std::size_t>> by_category(static_cast<std::size_t>(categories));
    for (std::size_t k = 0; k < dataset.samples.size(); ++k) {
        const int label = dataset.samples[k].label;
        by_category.at(static_cast<std::size_t>(label)).push_back(k);
        if (maps.predictions.size() == dataset.samples.size() && maps.predictions[k] == label) ++correct;
    }
    report.accuracy = static_cast<double>(correct) / static_cast<double>(dataset.samples.size());

    std::vector<std::vector<std::optional<double>>> agg_single;
    std::vector<std::vector<std::vector<std::optional<double>>>> agg_multi;
    double p_sum = 0.0;
    for (int f = 0; f < maps.filters; ++f) {
        FilterReport fr;
        fr.filter = f;

        std::vector<double> all;
        std::vector<double> peak(dataset.samples.size(), 0.0);
        std::vector<double> category_total(static_cast<std::size_t>(categories), 0.0);
        all.reserve(dataset.samples.size() * static_cast<std::size_t>(maps.n * maps.n));
        for (std::size_t k = 0; k < dataset.samples.size(); ++k) {
            const auto m = maps.map(k, f);
            all.insert(all.end(), m.begin(), m.end());
            double total = 0.0;
            for (double v : m) {
                total += v;
                peak[k] = std::max(peak[k], v);
            }
            category_total[static_cast<std::size_t>(dataset.samples[k].label)] += total;
        }
        fr.threshold = metrics::activation_threshold(all);
        fr.silent = std::all_of(peak.begin(), peak.end(), [](double v) { return v == 0.0; });

        double best = -1.0;
        for (int c = 0; c < categories; ++c) {
            const auto& imgs = by_category[static_cast<std::size_t>(c)];
            if (imgs.empty()) continue;
            const double mean = category_total[static_cast<std::size_t>(c)] / static_cast<double>(imgs.size());
            if (mean > best) {
                best = mean;
                fr.assigned_category = c;
            }
        }

        // part interpretability on the assigned category's images
        const auto& mine = by_category[static_cast<std::size_t>(fr.assigned_category)];
        const std::size_t parts = dataset.categories[static_cast<std::size_t>(fr.assigned_category)].parts.size();
        std::vector<std::vector<double>> ious(parts);
        for (std::size_t k : mine) {
            const auto region = metrics::valid_region_rf(maps.map(k, f), maps.n, fr.threshold, size,
                                                         config.dilation_radius);
            const auto& s = dataset.samples[k];
            for (std::size_t p = 0; p < parts && p < s.part_masks.size(); ++p) {
                ious[p].push_back(metrics::iou(region, s.part_masks[p]));
            }
        }
        fr.interpretability = metrics::part_interpretability(ious, config.iou_threshold);
        p_sum += fr.interpretability.p_f;

        // location deviation per category and landmark
        for (int c = 0; c < categories; ++c) {
            const auto& imgs = by_category[static_cast<std::size_t>(c)];
            const std::size_t landmarks = dataset.categories[static_cast<std::size_t>(c)].parts.size();
            std::vector<std::optional<double>> row(landmarks);
            std::vector<double> scores;
            for (std::size_t k : imgs) scores.push_back(peak[k]);
            const auto top = metrics::select_top(scores, config.top_n);
            for (std::size_t p = 0; p < landmarks; ++p) {
                std::vector<double> d;
                for (std::size_t t : top) {
                    const std::size_t k = imgs[t];
                    const auto loc = metrics::infer_part_location(maps.map(k, f), maps.n, size);
                    d.push_back(metrics::normalized_distance(dataset.samples[k].landmarks.at(p), loc, size, size));
                }
                row[p] = metrics::location_deviation(d);
            }
            fr.deviation_by_category.push_back(std::move(row));
        }
        fr.deviation = fr.deviation_by_category[static_cast<std::size_t>(fr.assigned_category)];
        agg_single.push_back(fr.deviation);
        agg_multi.push_back(fr.deviation_by_category);
        report.filters.push_back(std::move(fr));
    }
    report.mean_interpretability = maps.filters > 0 ? p_sum / maps.filters : 0.0;
    report.location_instability = metrics::location_instability(agg_single);
    report.multi_category_instability = metrics::multi_category_instability(agg_multi);
    return report;
}

MetricReport evaluate(nn::Network& network, const data::Dataset& dataset, const EvalConfig& config) {
    return evaluate_maps(collect_maps(network, dataset, config.layer), dataset, config);
}

namespace {

nlohmann::json optional_json(const std::optional<double>& v) {
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

nlohmann::json number_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

}  // namespace

nlohmann::json to_json(const MetricReport& r) {
    using nlohmann::json;
    json filters = json::array();
    for (const auto& f : r.filters) {
        json per_part = json::array();
        for (double v : f.interpretability.per_part) per_part.push_back(number_or_null(v));
        json dev = json::array();
        for (const auto& v : f.deviation) dev.push_back(optional_json(v));
        json dev_all = json::array();
        for (const auto& row : f.deviation_by_category) {
            json j = json::array();
            for (const auto& v : row) j.push_back(optional_json(v));
            dev_all.push_back(j);
        }
        filters.push_back({{"filter", f.filter},
                           {"threshold", f.threshold},
                           {"assigned_category", f.assigned_category},
                           {"silent", f.silent},
                           {"part_interpretability", f.interpretability.p_f},
                           {"best_part", f.interpretability.best_part},
                           {"part_rates", per_part},
                           {"location_deviation", dev},
                           {"location_deviation_by_category", dev_all}});
    }
    return {{"config",
             {{"iou_threshold", r.config.iou_threshold},
              {"top_n", r.config.top_n},
              {"dilation_radius", r.config.dilation_radius},
              {"layer", r.config.layer}}},
            {"layer_index", r.layer_index},
            {"map_size", r.map_size},
            {"images", r.images},
            {"test_accuracy", r.accuracy},
            {"mean_part_interpretability", r.mean_interpretability},
            {"location_instability", optional_json(r.location_instability)},
            {"multi_category_instability", optional_json(r.multi_category_instability)},
            {"filters", filters}};
}

std::vector<double> layer_heatmap(const LayerMaps& maps, const std::vector<std::size_t>& images, int image_size) {
    std::vector<std::vector<std::vector<double>>> selected;
    auto add = [&](std::size_t k) {
        std::vector<std::vector<double>> per_filter;
        for (int f = 0; f < maps.filters; ++f) {
            const auto m = maps.map(k, f);
            per_filter.emplace_back(m.begin(), m.end());
        }
        selected.push_back(std::move(per_filter));
    };
    if (images.empty()) {
        for (std::size_t k = 0; k < maps.maps.size(); ++k) add(k);
    } else {
        for (std::size_t k : images) add(k);
    }
    return metrics::part_distribution_heatmap(selected, maps.n, image_size);
}

}  // namespace interpconv
