#pragma once

#include <memory>
#include <optional>
#include <vector>

#include "interpconv/interp_layer.hpp"
#include "interpconv/nn/layers.hpp"
#include "interpconv/template_bank.hpp"

namespace interpconv::nn {

enum class LambdaScope { layer, filter };

struct FilterLossSettings {
    double lambda_coefficient = LambdaSchedule::kDefaultCoefficient;
    double ema_rate = 0.1;
    LikelihoodMode likelihood = LikelihoodMode::dataset_mean;
    LambdaScope lambda_scope = LambdaScope::layer;
};

/// 3x3 zero-padded convolution followed by ReLU and, when interpretable, the
/// template mask. The filter loss attaches to the post-ReLU map x; the masked
/// map is what the next layer sees.
///
/// With `interpretable == false` the layer is an ordinary conv + ReLU and keeps
/// no statistics. `output_gain` multiplies the masked map (and its gradient).
class InterpConvLayer : public Layer {
public:
    InterpConvLayer(Shape3 input, int filters, std::optional<BankParams> bank_params,
                    bool interpretable, std::mt19937_64& rng, double output_gain = 1.0);

    std::string kind() const override { return "interp"; }
    Shape3 input_shape() const override { return conv_.input_shape(); }
    Shape3 output_shape() const override { return conv_.output_shape(); }
    const Tensor& forward(const Tensor& input, const PassContext& ctx) override;
    const Tensor& backward(const Tensor& grad_output, const PassContext& ctx) override;
    std::vector<Param*> params() override { return conv_.params(); }

    bool interpretable() const { return interpretable_; }
    int filters() const { return conv_.output_shape().channels; }
    int map_size() const { return conv_.output_shape().height; }
    const TemplateBank& bank() const { return *bank_; }
    double output_gain() const { return output_gain_; }

    /// Post-ReLU maps x of the last forward pass, {filters, n, n}.
    const Tensor& activations() const { return relu_out_; }
    /// Masked maps of the last forward pass (equal to activations() when not interpretable).
    const Tensor& masked() const { return interpretable_ ? masked_ : relu_out_; }
    const std::vector<GridIndex>& peaks() const { return peaks_; }

    // ---- training control; all mutation happens outside forward/backward ----
    void configure(const FilterLossSettings& settings);
    const FilterLossSettings& settings() const { return settings_; }
    /// While inactive (warm-up) statistics are still collected but no filter
    /// loss gradient is injected.
    void set_filter_loss_active(bool active) { filter_loss_active_ = active; }
    bool filter_loss_active() const { return filter_loss_active_; }

    void begin_epoch(int category_count);
    void commit_batch(double reference_count);
    void end_epoch(double reference_count);

    std::vector<InterpFilterState>& states() { return states_; }
    const std::vector<InterpFilterState>& states() const { return states_; }
    LambdaSchedule& layer_lambda() { return layer_lambda_; }
    const LambdaSchedule& layer_lambda() const { return layer_lambda_; }
    std::vector<LambdaSchedule>& filter_lambdas() { return filter_lambdas_; }
    const std::vector<LambdaSchedule>& filter_lambdas() const { return filter_lambdas_; }

    /// Per-filter mean of the estimated per-sample filter loss over the current epoch
    /// (NaN before the statistics are initialised).
    std::vector<double> epoch_filter_loss() const;
    /// Mean total activation per filter and category over the current epoch, [filter][category].
    std::vector<std::vector<double>> epoch_category_means() const;

private:
    void collect_statistics(int label);
    void inject_filter_gradient(int label);

    Conv2dLayer conv_;
    bool interpretable_;
    double output_gain_;
    std::shared_ptr<const TemplateBank> bank_;
    FilterLossSettings settings_;
    bool filter_loss_active_ = false;

    std::vector<InterpFilterState> states_;
    LambdaSchedule layer_lambda_;
    std::vector<LambdaSchedule> filter_lambdas_;

    // last sample
    Tensor relu_out_;
    Tensor masked_;
    std::vector<GridIndex> peaks_;
    AlignedBuffer traces_;  // [filter][template]
    AlignedBuffer exps_;    // exp(traces_)
    Tensor grad_x_;
    AlignedBuffer scratch_;

    // current batch
    std::vector<double> batch_exp_sum_;
    std::vector<std::vector<double>> batch_max_;  // [filter][map]
    std::size_t batch_count_ = 0;

    // current epoch
    int category_count_ = 0;
    std::vector<double> epoch_exp_sum_;
    std::size_t epoch_count_ = 0;
    std::vector<double> category_sum_;  // [filter][category]
    std::vector<std::size_t> category_samples_;
    std::vector<double> loss_sum_;
    std::size_t loss_count_ = 0;
};

}  // namespace interpconv::nn
