#include "interpconv/nn/interp_conv.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "interpconv/errors.hpp"

namespace interpconv::nn {

InterpConvLayer::InterpConvLayer(Shape3 input, int filters, std::optional<BankParams> bank_params,
                                 bool interpretable, std::mt19937_64& rng, double output_gain)
    : conv_(input, filters, ConvGeometry{3, 1, 1}, rng), interpretable_(interpretable), output_gain_(output_gain) {
    if (!(output_gain > 0.0)) throw ParameterError("output gain must be > 0");
    const Shape3 out = conv_.output_shape();
    if (out.height != out.width) throw ShapeError("interp-conv needs square feature maps");
    BankParams p = bank_params.value_or(BankParams::defaults(out.height));
    p.n = out.height;
    bank_ = TemplateBank::cached(p);
    states_.resize(static_cast<std::size_t>(filters));
    configure(settings_);
}

void InterpConvLayer::configure(const FilterLossSettings& settings) {
    settings_ = settings;
    layer_lambda_ = LambdaSchedule(settings.lambda_coefficient, settings.ema_rate);
    filter_lambdas_.assign(states_.size(), LambdaSchedule(settings.lambda_coefficient, settings.ema_rate));
    for (auto& s : states_) s.ema_rate = settings.ema_rate;
}

const Tensor& InterpConvLayer::forward(const Tensor& input, const PassContext& ctx) {
    const Tensor& pre = conv_.forward(input, ctx);
    relu_out_.resize(pre.shape());
    for (std::size_t k = 0; k < pre.size(); ++k) relu_out_[k] = pre[k] > 0.0 ? pre[k] : 0.0;
    if (!interpretable_) return relu_out_;

    const std::size_t cells = bank_->positive_count();
    masked_.resize(pre.shape());
    peaks_.resize(states_.size());
    for (std::size_t f = 0; f < states_.size(); ++f) {
        const std::span<const double> x(relu_out_.data() + f * cells, cells);
        peaks_[f] = mask_forward(x, *bank_, std::span<double>(masked_.data() + f * cells, cells));
    }
    if (output_gain_ != 1.0) {
        for (auto& v : masked_.values()) v *= output_gain_;
    }
    if (ctx.training) collect_statistics(ctx.label);
    return masked_;
}

void InterpConvLayer::collect_statistics(int label) {
    const std::size_t filters = states_.size();
    const std::size_t cells = bank_->positive_count();
    const std::size_t templates = bank_->size();
    traces_.resize(filters * templates);
    exps_.resize(filters * templates);
    bank_->traces_many(relu_out_.values(), filters, traces_);
    for (std::size_t k = 0; k < traces_.size(); ++k) exps_[k] = std::exp(traces_[k]);

    if (batch_exp_sum_.size() != filters * templates) {
        batch_exp_sum_.assign(filters * templates, 0.0);
        batch_max_.assign(filters, {});
    }
    if (epoch_exp_sum_.size() != filters * templates) epoch_exp_sum_.assign(filters * templates, 0.0);
    for (std::size_t k = 0; k < exps_.size(); ++k) {
        batch_exp_sum_[k] += exps_[k];
        epoch_exp_sum_[k] += exps_[k];
    }
    ++batch_count_;
    ++epoch_count_;

    const bool labelled = label >= 0 && label < category_count_;
    if (labelled) ++category_samples_[static_cast<std::size_t>(label)];
    for (std::size_t f = 0; f < filters; ++f) {
        const auto x = relu_out_.values().subspan(f * cells, cells);
        double total = 0.0;
        double peak = 0.0;
        for (double v : x) {
            total += v;
            peak = std::max(peak, v);
        }
        batch_max_[f].push_back(peak);
        if (labelled) {
            category_sum_[f * static_cast<std::size_t>(category_count_) + static_cast<std::size_t>(label)] += total;
        }

        const auto& st = states_[f];
        if (!st.initialized) continue;
        const double* e = exps_.data() + f * templates;
        const double* tr = traces_.data() + f * templates;
        double px = 0.0;
        for (std::size_t t = 0; t < templates; ++t) px += bank_->prior(t) * e[t] / st.z_estimates[t];
        const double log_px = std::log(settings_.likelihood == LikelihoodMode::dataset_mean ? st.mean_px : px);
        double loss = 0.0;
        for (std::size_t t = 0; t < templates; ++t) {
            const double log_z = std::log(st.z_estimates[t]);
            loss -= bank_->prior(t) * e[t] / st.z_estimates[t] * (tr[t] - log_z - log_px);
        }
        loss_sum_[f] += loss;
    }
    if (!states_.empty() && states_.front().initialized) ++loss_count_;
}

void InterpConvLayer::inject_filter_gradient(int label) {
    const std::size_t cells = bank_->positive_count();
    const std::size_t templates = bank_->size();
    scratch_.resize(cells);
    for (std::size_t f = 0; f < states_.size(); ++f) {
        const auto& st = states_[f];
        if (!st.initialized || !st.assigned_category || st.lambda == 0.0) continue;
        const auto x = relu_out_.values().subspan(f * cells, cells);
        const std::size_t target = label == *st.assigned_category ? bank_->index_of(peaks_[f])
                                                                   : bank_->negative_index();
        double px = st.mean_px;
        if (settings_.likelihood == LikelihoodMode::per_sample) {
            px = 0.0;
            const double* e = exps_.data() + f * templates;
            for (std::size_t t = 0; t < templates; ++t) px += bank_->prior(t) * e[t] / st.z_estimates[t];
        }
        filter_loss_grad_approx(x, bank_->at(target), bank_->prior(target), st.z_estimates[target], px,
                                scratch_);
        combine_gradient_into(grad_x_.values().subspan(f * cells, cells), scratch_, st.lambda);
    }
}

const Tensor& InterpConvLayer::backward(const Tensor& grad_output, const PassContext& ctx) {
    const std::size_t cells = static_cast<std::size_t>(map_size()) * static_cast<std::size_t>(map_size());
    grad_x_.resize(relu_out_.shape());
    if (interpretable_) {
        for (std::size_t f = 0; f < states_.size(); ++f) {
            const auto off = f * cells;
            mask_backward(grad_output.values().subspan(off, cells), relu_out_.values().subspan(off, cells),
                          bank_->positive(peaks_[f]), grad_x_.values().subspan(off, cells));
        }
        if (output_gain_ != 1.0) {
            for (auto& v : grad_x_.values()) v *= output_gain_;
        }
        if (filter_loss_active_ && ctx.training) inject_filter_gradient(ctx.label);
    } else {
        std::copy(grad_output.values().begin(), grad_output.values().end(), grad_x_.values().begin());
    }
    for (std::size_t k = 0; k < grad_x_.size(); ++k) {
        if (!(relu_out_[k] > 0.0)) grad_x_[k] = 0.0;
    }
    conv_.set_needs_input_grad(needs_input_grad());
    return conv_.backward(grad_x_, ctx);
}

void InterpConvLayer::begin_epoch(int category_count) {
    if (category_count < 1) throw ParameterError("category count must be >= 1");
    category_count_ = category_count;
    const std::size_t filters = states_.size();
    epoch_exp_sum_.assign(filters * bank_->size(), 0.0);
    epoch_count_ = 0;
    category_sum_.assign(filters * static_cast<std::size_t>(category_count), 0.0);
    category_samples_.assign(static_cast<std::size_t>(category_count), 0);
    loss_sum_.assign(filters, 0.0);
    loss_count_ = 0;
    batch_exp_sum_.assign(filters * bank_->size(), 0.0);
    batch_max_.assign(filters, {});
    batch_count_ = 0;
}

void InterpConvLayer::commit_batch(double reference_count) {
    if (!interpretable_ || batch_count_ == 0) return;
    const std::size_t templates = bank_->size();
    std::vector<double> means(templates);
    std::vector<double> all_max;
    for (std::size_t f = 0; f < states_.size(); ++f) {
        auto& st = states_[f];
        if (st.initialized) {
            for (std::size_t t = 0; t < templates; ++t) {
                means[t] = batch_exp_sum_[f * templates + t] / static_cast<double>(batch_count_);
            }
            update_running_stats(st, *bank_, means, reference_count);
        }
        if (settings_.lambda_scope == LambdaScope::filter) {
            update_lambda(st, filter_lambdas_[f], batch_max_[f]);
        } else {
            all_max.insert(all_max.end(), batch_max_[f].begin(), batch_max_[f].end());
        }
    }
    if (settings_.lambda_scope == LambdaScope::layer) {
        layer_lambda_.update(all_max);
        for (auto& st : states_) st.lambda = layer_lambda_.lambda();
    }
    std::fill(batch_exp_sum_.begin(), batch_exp_sum_.end(), 0.0);
    for (auto& m : batch_max_) m.clear();
    batch_count_ = 0;
}

void InterpConvLayer::end_epoch(double reference_count) {
    if (!interpretable_) return;
    commit_batch(reference_count);
    const auto means = epoch_category_means();
    for (std::size_t f = 0; f < states_.size(); ++f) {
        std::map<int, double> by_category;
        for (int c = 0; c < category_count_; ++c) {
            if (category_samples_[static_cast<std::size_t>(c)] > 0) by_category[c] = means[f][static_cast<std::size_t>(c)];
        }
        if (!by_category.empty()) states_[f].assigned_category = assign_target_category(by_category);
    }
    if (epoch_count_ == 0) return;
    const std::size_t templates = bank_->size();
    std::vector<double> exp_means(templates);
    for (std::size_t f = 0; f < states_.size(); ++f) {
        auto& st = states_[f];
        if (st.initialized) continue;
        for (std::size_t t = 0; t < templates; ++t) {
            exp_means[t] = epoch_exp_sum_[f * templates + t] / static_cast<double>(epoch_count_);
        }
        initialize_running_stats(st, *bank_, exp_means, reference_count);
    }
}

std::vector<double> InterpConvLayer::epoch_filter_loss() const {
    std::vector<double> out(states_.size(), std::numeric_limits<double>::quiet_NaN());
    if (loss_count_ == 0) return out;
    for (std::size_t f = 0; f < out.size(); ++f) out[f] = loss_sum_[f] / static_cast<double>(loss_count_);
    return out;
}

std::vector<std::vector<double>> InterpConvLayer::epoch_category_means() const {
    std::vector<std::vector<double>> out(states_.size(), std::vector<double>(static_cast<std::size_t>(category_count_), 0.0));
    for (std::size_t f = 0; f < states_.size(); ++f) {
        for (int c = 0; c < category_count_; ++c) {
            const auto n = category_samples_[static_cast<std::size_t>(c)];
            if (n > 0) {
                out[f][static_cast<std::size_t>(c)] =
                    category_sum_[f * static_cast<std::size_t>(category_count_) + static_cast<std::size_t>(c)] /
                    static_cast<double>(n);
            }
        }
    }
    return out;
}

}  // namespace interpconv::nn
