#include "interpconv/nn/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "interpconv/errors.hpp"

namespace interpconv::nn {

double TrainConfig::learning_rate_at(int epoch) const {
    if (lr_decay_epochs <= 0) return learning_rate;
    return learning_rate * std::pow(lr_decay, epoch / lr_decay_epochs);
}

namespace {

void validate(const TrainConfig& c) {
    if (c.epochs < 0) throw ConfigError("epochs must be >= 0");
    if (c.batch_size < 1) throw ConfigError("batch size must be >= 1");
    if (!(c.learning_rate > 0.0)) throw ConfigError("learning rate must be > 0");
    if (c.momentum < 0.0 || c.momentum >= 1.0) throw ConfigError("momentum must be in [0, 1)");
    if (c.warmup_epochs < 0) throw ConfigError("warmup epochs must be >= 0");
    if (!(c.filter.ema_rate > 0.0 && c.filter.ema_rate <= 1.0)) throw ConfigError("ema rate must be in (0, 1]");
    if (c.filter.lambda_coefficient < 0.0) throw ConfigError("lambda coefficient must be >= 0");
}

}  // namespace

Trainer::Trainer(Network& network, TrainConfig config)
    : network_(network),
      config_(config),
      sgd_(network.params(), config.momentum),
      shuffle_rng_([&] {
          std::seed_seq seq{config.seed, std::uint64_t{0x5eed}};
          return std::mt19937_64(seq);
      }()) {
    validate(config_);
    for (auto* layer : network_.interp_layers()) layer->configure(config_.filter);
}

EpochStats Trainer::train_epoch(const LabeledSet& data) {
    if (data.size() == 0) throw DataError("training set is empty");
    if (data.labels.size() != data.size()) throw DataError("labels and inputs differ in count");

    const auto interp = network_.interp_layers();
    const double n_ref = static_cast<double>(data.size());
    const bool active = epoch_ >= config_.warmup_epochs;
    for (auto* layer : interp) {
        layer->begin_epoch(data.categories);
        layer->set_filter_loss_active(active);
    }

    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), shuffle_rng_);

    EpochStats stats;
    stats.epoch = epoch_ + 1;
    stats.learning_rate = config_.learning_rate_at(epoch_);
    stats.filter_loss_active = active;

    double loss_sum = 0.0;
    std::size_t correct = 0;
    const std::size_t batch = static_cast<std::size_t>(config_.batch_size);
    Tensor grad_scores;
    for (std::size_t start = 0; start < order.size(); start += batch) {
        const std::size_t stop = std::min(order.size(), start + batch);
        const double scale = 1.0 / static_cast<double>(stop - start);
        sgd_.zero_grad();
        for (std::size_t k = start; k < stop; ++k) {
            const std::size_t idx = order[k];
            const PassContext ctx{data.labels[idx], true};
            const Tensor& scores = network_.forward(data.inputs[idx], ctx);
            auto result = network_.loss(scores, ctx.label);
            if (!std::isfinite(result.loss)) {
                std::ostringstream os;
                os << "non-finite task loss at epoch " << stats.epoch << ", batch " << start / batch + 1
                   << ", sample " << idx << " (loss " << result.loss << ", lr " << stats.learning_rate << ")";
                throw NumericalError(os.str());
            }
            loss_sum += result.loss;
            if (network_.predict(scores) == ctx.label) ++correct;
            for (auto& g : result.grad) g *= scale;
            grad_scores.resize(scores.shape());
            std::copy(result.grad.begin(), result.grad.end(), grad_scores.data());
            network_.backward(grad_scores, ctx);
        }
        for (auto* p : network_.params()) {
            for (double g : p->grad.values()) {
                if (!std::isfinite(g)) {
                    throw NumericalError("non-finite gradient in " + p->name + " at epoch " +
                                         std::to_string(stats.epoch) + ", batch " +
                                         std::to_string(start / batch + 1));
                }
            }
        }
        sgd_.step(stats.learning_rate);
        for (auto* layer : interp) layer->commit_batch(n_ref);
    }

    const auto indices = network_.interp_layer_indices();
    for (std::size_t k = 0; k < interp.size(); ++k) {
        auto* layer = interp[k];
        LayerEpochStats ls;
        ls.layer_index = indices[k];
        ls.filter_loss = layer->epoch_filter_loss();
        layer->end_epoch(n_ref);
        ls.lambda = layer->layer_lambda().lambda();
        for (const auto& s : layer->states()) ls.assigned.push_back(s.assigned_category.value_or(-1));
        stats.layers.push_back(std::move(ls));
    }

    stats.task_loss = loss_sum / n_ref;
    stats.train_accuracy = static_cast<double>(correct) / n_ref;
    ++epoch_;
    return stats;
}

double evaluate_accuracy(Network& network, const LabeledSet& data) {
    if (data.size() == 0) return 0.0;
    std::size_t correct = 0;
    for (std::size_t k = 0; k < data.size(); ++k) {
        const PassContext ctx{data.labels[k], false};
        if (network.predict(network.forward(data.inputs[k], ctx)) == data.labels[k]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(data.size());
}

}  // namespace interpconv::nn
