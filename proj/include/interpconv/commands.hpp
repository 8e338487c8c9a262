#pragma once

#include <exception>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "interpconv/config.hpp"
#include "interpconv/evaluation.hpp"
#include "interpconv/nn/trainer.hpp"
#include "interpconv/synth_data.hpp"

namespace interpconv::cli {

enum ExitCode : int { ok = 0, failure = 1, config_error = 2, data_error = 3, numerical_error = 4 };

/// ConfigError/ParameterError -> 2, DataError -> 3, NumericalError -> 4, anything else -> 1.
int exit_code_for(const std::exception& e);

using EpochCallback = std::function<void(const nn::EpochStats&)>;

struct TrainOutcome {
    nn::Network network;
    std::vector<nn::EpochStats> epochs;
};

TrainOutcome train_model(const RunConfig& config, const nn::LabeledSet& train, const EpochCallback& on_epoch = {});

/// The paired ordinary network: lambda coefficient 0 and no mask, all else equal.
RunConfig baseline_config(const RunConfig& config);

struct ArmResult {
    std::vector<nn::EpochStats> epochs;
    MetricReport report;
};

ArmResult run_arm(const RunConfig& config, const data::Dataset& train, const data::Dataset& test);
nlohmann::json compare_json(const ArmResult& interpretable, const ArmResult& baseline);

std::string train_log_csv(const std::vector<nn::EpochStats>& epochs);
std::string filter_log_csv(const std::vector<nn::EpochStats>& epochs);

void write_manifest(const RunConfig& config, const std::string& command,
                    const std::vector<std::string>& outputs);

void cmd_gen_data(const RunConfig& config);
void cmd_train(const RunConfig& config);
void cmd_eval(const RunConfig& config);
void cmd_viz(const RunConfig& config);
void cmd_compare(const RunConfig& config);

}  // namespace interpconv::cli
