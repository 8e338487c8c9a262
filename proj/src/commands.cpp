#include "interpconv/commands.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>

#include "interpconv/checkpoint.hpp"
#include "interpconv/errors.hpp"
#include "interpconv/pgm.hpp"

namespace interpconv::cli {

namespace fs = std::filesystem;
using nlohmann::json;

int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const ParameterError*>(&e)) return config_error;
    if (dynamic_cast<const DataError*>(&e)) return data_error;
    if (dynamic_cast<const NumericalError*>(&e)) return numerical_error;
    return failure;
}

namespace {

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    out << text;
    if (!out) throw DataError("write failed for " + path.string());
}

data::Dataset load_split(const fs::path& dir, const RunConfig& config) {
    auto ds = data::load_dataset(dir);
    if (ds.image_size != config.data.image_size) {
        throw DataError("dataset " + dir.string() + " has image size " + std::to_string(ds.image_size) +
                        ", config expects " + std::to_string(config.data.image_size));
    }
    if (ds.category_count() != config.data.categories) {
        throw DataError("dataset " + dir.string() + " has " + std::to_string(ds.category_count()) +
                        " categories, config expects " + std::to_string(config.data.categories));
    }
    return ds;
}

void print_epoch(const nn::EpochStats& s, int total) {
    std::cout << "epoch " << s.epoch << "/" << total << "  loss " << fmt(s.task_loss) << "  train_acc "
              << fmt(s.train_accuracy);
    for (const auto& l : s.layers) std::cout << "  lambda[" << l.layer_index << "] " << fmt(l.lambda);
    std::cout << std::endl;
}

}  // namespace

TrainOutcome train_model(const RunConfig& config, const nn::LabeledSet& train, const EpochCallback& on_epoch) {
    TrainOutcome out{nn::Network(config.network, config.seed), {}};
    nn::Trainer trainer(out.network, config.train);
    for (int e = 0; e < config.train.epochs; ++e) {
        out.epochs.push_back(trainer.train_epoch(train));
        if (on_epoch) on_epoch(out.epochs.back());
    }
    return out;
}

RunConfig baseline_config(const RunConfig& config) {
    RunConfig b = config;
    b.train.filter.lambda_coefficient = 0.0;
    b.mask = MaskMode::off;
    b.network.interpretable = false;
    return b;
}

ArmResult run_arm(const RunConfig& config, const data::Dataset& train, const data::Dataset& test) {
    auto outcome = train_model(config, to_labeled_set(train));
    ArmResult r;
    r.epochs = std::move(outcome.epochs);
    r.report = evaluate(outcome.network, test, config.eval);
    return r;
}

namespace {

json summary(const ArmResult& a) {
    auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
    return {{"test_accuracy", a.report.accuracy},
            {"mean_part_interpretability", a.report.mean_interpretability},
            {"location_instability", opt(a.report.location_instability)},
            {"multi_category_instability", opt(a.report.multi_category_instability)},
            {"final_task_loss", a.epochs.empty() ? json(nullptr) : json(a.epochs.back().task_loss)}};
}

}  // namespace

json compare_json(const ArmResult& interp, const ArmResult& base) {
    json j = {{"interpretable", summary(interp)}, {"baseline", summary(base)}};
    const auto& ri = interp.report;
    const auto& rb = base.report;
    json delta = {{"test_accuracy", ri.accuracy - rb.accuracy},
                  {"mean_part_interpretability", ri.mean_interpretability - rb.mean_interpretability}};
    if (ri.location_instability && rb.location_instability) {
        delta["location_instability"] = *ri.location_instability - *rb.location_instability;
    } else {
        delta["location_instability"] = nullptr;
    }
    j["difference"] = delta;
    j["interpretable_more_stable"] =
        ri.location_instability && rb.location_instability && *ri.location_instability < *rb.location_instability;
    j["interpretable_more_interpretable"] = ri.mean_interpretability > rb.mean_interpretability;
    return j;
}

std::string train_log_csv(const std::vector<nn::EpochStats>& epochs) {
    std::string out = "epoch,lr,task_loss,train_accuracy,filter_loss_active";
    if (!epochs.empty()) {
        for (const auto& l : epochs.front().layers) {
            out += ",lambda_" + std::to_string(l.layer_index) + ",mean_filter_loss_" + std::to_string(l.layer_index);
        }
    }
    out += "\n";
    for (const auto& s : epochs) {
        out += std::to_string(s.epoch) + "," + fmt(s.learning_rate) + "," + fmt(s.task_loss) + "," +
               fmt(s.train_accuracy) + "," + (s.filter_loss_active ? "1" : "0");
        for (const auto& l : s.layers) {
            double sum = 0.0;
            std::size_t n = 0;
            for (double v : l.filter_loss) {
                if (std::isfinite(v)) {
                    sum += v;
                    ++n;
                }
            }
            out += "," + fmt(l.lambda) + "," + (n ? fmt(sum / static_cast<double>(n)) : std::string("nan"));
        }
        out += "\n";
    }
    return out;
}

std::string filter_log_csv(const std::vector<nn::EpochStats>& epochs) {
    std::string out = "epoch,layer,filter,filter_loss,assigned_category\n";
    for (const auto& s : epochs) {
        for (const auto& l : s.layers) {
            for (std::size_t f = 0; f < l.filter_loss.size(); ++f) {
                out += std::to_string(s.epoch) + "," + std::to_string(l.layer_index) + "," + std::to_string(f) + "," +
                       (std::isfinite(l.filter_loss[f]) ? fmt(l.filter_loss[f]) : std::string("nan")) + "," +
                       std::to_string(f < l.assigned.size() ? l.assigned[f] : -1) + "\n";
            }
        }
    }
    return out;
}

void write_manifest(const RunConfig& config, const std::string& command, const std::vector<std::string>& outputs) {
    json j = {{"command", command}, {"config", to_json(config)}, {"outputs", outputs}};
    write_text(config.output / "manifest.json", j.dump(2) + "\n");
}

void cmd_gen_data(const RunConfig& config) {
    auto specs = data::default_benchmark(config.data.image_size);
    specs.resize(static_cast<std::size_t>(config.data.categories));
    const auto train = data::generate_dataset(specs, config.data.train_per_category, config.data.image_size,
                                              config.data.seed, 0);
    const auto test = data::generate_dataset(specs, config.data.test_per_category, config.data.image_size,
                                             config.data.seed, 1);
    data::save_dataset(train, config.train_dir());
    data::save_dataset(test, config.test_dir());
    std::cout << "wrote " << train.samples.size() << " training and " << test.samples.size() << " test samples to "
              << config.data.path.string() << std::endl;
    write_manifest(config, "gen-data",
                   {(config.train_dir() / "dataset.json").generic_string(),
                    (config.test_dir() / "dataset.json").generic_string()});
}

void cmd_train(const RunConfig& config) {
    const auto train = load_split(config.train_dir(), config);
    auto outcome = train_model(config, to_labeled_set(train),
                               [&](const nn::EpochStats& s) { print_epoch(s, config.train.epochs); });
    fs::create_directories(config.output);
    save_checkpoint(config.checkpoint_path(), outcome.network, to_json(config));
    write_text(config.output / "train_log.csv", train_log_csv(outcome.epochs));
    write_text(config.output / "filter_log.csv", filter_log_csv(outcome.epochs));
    write_manifest(config, "train",
                   {config.checkpoint_path().generic_string(), (config.output / "train_log.csv").generic_string(),
                    (config.output / "filter_log.csv").generic_string()});
}

void cmd_eval(const RunConfig& config) {
    auto loaded = load_checkpoint(config.checkpoint_path());
    const auto test = load_split(config.test_dir(), config);
    const auto report = evaluate(loaded.network, test, config.eval);
    write_text(config.output / "report.json", to_json(report).dump(2) + "\n");
    std::cout << "test accuracy " << fmt(report.accuracy) << "  mean P_f " << fmt(report.mean_interpretability)
              << "  location instability "
              << (report.location_instability ? fmt(*report.location_instability) : std::string("n/a")) << std::endl;
    write_manifest(config, "eval", {(config.output / "report.json").generic_string()});
}

void cmd_viz(const RunConfig& config) {
    auto loaded = load_checkpoint(config.checkpoint_path());
    const auto test = load_split(config.test_dir(), config);
    const auto maps = collect_maps(loaded.network, test, config.eval.layer);
    const auto report = evaluate_maps(maps, test, config.eval);
    const int size = test.image_size;
    const fs::path dir = config.output / "viz";
    fs::create_directories(dir);
    std::vector<std::string> outputs;

    for (int c = 0; c < test.category_count(); ++c) {
        std::vector<std::size_t> images;
        for (std::size_t k = 0; k < test.samples.size(); ++k) {
            if (test.samples[k].label == c) images.push_back(k);
        }
        const auto heat = layer_heatmap(maps, images, size);
        const auto path = dir / ("heatmap_category" + std::to_string(c) + ".pgm");
        write_pgm(path, to_gray(heat, size, size));
        outputs.push_back(path.generic_string());
    }

    for (const auto& fr : report.filters) {
        std::size_t best = 0;
        double best_peak = -1.0;
        for (std::size_t k = 0; k < test.samples.size(); ++k) {
            if (test.samples[k].label != fr.assigned_category) continue;
            const auto m = maps.map(k, fr.filter);
            const double peak = *std::max_element(m.begin(), m.end());
            if (peak > best_peak) {
                best_peak = peak;
                best = k;
            }
        }
        const auto region = metrics::valid_region_rf(maps.map(best, fr.filter), maps.n, fr.threshold, size,
                                                     config.eval.dilation_radius);
        const auto& image = test.samples[best].image;
        std::vector<double> overlay(image.size());
        for (std::size_t p = 0; p < image.size(); ++p) overlay[p] = region[p] ? 0.5 + 0.5 * image[p] : 0.35 * image[p];
        const auto path = dir / ("filter" + std::to_string(fr.filter) + "_rf.pgm");
        write_pgm(path, to_gray(overlay, size, size));
        outputs.push_back(path.generic_string());

        auto up = metrics::upsample_blocks(maps.map(best, fr.filter), maps.n, size);
        const double peak = *std::max_element(up.begin(), up.end());
        if (peak > 0.0) {
            for (auto& v : up) v /= peak;
        }
        const auto map_path = dir / ("filter" + std::to_string(fr.filter) + "_map.pgm");
        write_pgm(map_path, to_gray(up, size, size));
        outputs.push_back(map_path.generic_string());
    }
    std::cout << "wrote " << outputs.size() << " images to " << dir.string() << std::endl;
    write_manifest(config, "viz", outputs);
}

void cmd_compare(const RunConfig& config) {
    const auto train = load_split(config.train_dir(), config);
    const auto test = load_split(config.test_dir(), config);
    std::vector<std::string> outputs;
    auto run = [&](const RunConfig& arm, const std::string& name) {
        RunConfig c = arm;
        c.output = config.output / name;
        c.checkpoint.clear();
        std::cout << "== " << name << std::endl;
        auto outcome = train_model(c, to_labeled_set(train),
                                   [&](const nn::EpochStats& s) { print_epoch(s, c.train.epochs); });
        ArmResult r;
        r.epochs = std::move(outcome.epochs);
        r.report = evaluate(outcome.network, test, c.eval);
        fs::create_directories(c.output);
        save_checkpoint(c.checkpoint_path(), outcome.network, to_json(c));
        write_text(c.output / "train_log.csv", train_log_csv(r.epochs));
        write_text(c.output / "filter_log.csv", filter_log_csv(r.epochs));
        write_text(c.output / "report.json", to_json(r.report).dump(2) + "\n");
        for (const char* f : {"model.icnn", "train_log.csv", "filter_log.csv", "report.json"}) {
            outputs.push_back((c.output / f).generic_string());
        }
        return r;
    };
    const auto interp = run(config, "interpretable");
    const auto base = run(baseline_config(config), "baseline");
    const auto cmp = compare_json(interp, base);
    write_text(config.output / "compare.json", cmp.dump(2) + "\n");
    outputs.push_back((config.output / "compare.json").generic_string());
    std::cout << cmp.dump(2) << std::endl;
    write_manifest(config, "compare", outputs);
}

}  // namespace interpconv::cli
