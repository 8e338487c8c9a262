#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "interpconv/nn/network.hpp"
#include "interpconv/nn/sgd.hpp"

namespace interpconv::nn {

struct LabeledSet {
    std::vector<Tensor> inputs;
    std::vector<int> labels;
    int categories = 0;

    std::size_t size() const { return inputs.size(); }
};

struct TrainConfig {
    int epochs = 20;
    double learning_rate = 0.01;
    double momentum = 0.9;
    int batch_size = 16;
    std::uint64_t seed = 0;
    /// Epochs of plain task training before the filter loss starts.
    int warmup_epochs = 1;
    /// Multiply the learning rate by lr_decay every lr_decay_epochs (0 = constant).
    int lr_decay_epochs = 0;
    double lr_decay = 0.1;
    FilterLossSettings filter;

    double learning_rate_at(int epoch) const;
};

struct LayerEpochStats {
    std::size_t layer_index = 0;
    double lambda = 0.0;
    std::vector<double> filter_loss;  // per filter, NaN until initialised
    std::vector<int> assigned;        // per filter, -1 when unassigned
};

struct EpochStats {
    int epoch = 0;
    double learning_rate = 0.0;
    double task_loss = 0.0;
    double train_accuracy = 0.0;
    bool filter_loss_active = false;
    std::vector<LayerEpochStats> layers;
};

/// Mini-batch momentum SGD. The task gradient is averaged over the batch; the
/// filter-loss gradient is injected by the interp layers during backward.
class Trainer {
public:
    Trainer(Network& network, TrainConfig config);

    EpochStats train_epoch(const LabeledSet& data);
    int epochs_done() const { return epoch_; }
    const TrainConfig& config() const { return config_; }

private:
    Network& network_;
    TrainConfig config_;
    Sgd sgd_;
    std::mt19937_64 shuffle_rng_;
    int epoch_ = 0;
};

/// Fraction of samples whose predicted category equals the label.
double evaluate_accuracy(Network& network, const LabeledSet& data);

}  // namespace interpconv::nn
