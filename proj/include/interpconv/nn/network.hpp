#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "interpconv/nn/interp_conv.hpp"
#include "interpconv/nn/layers.hpp"
#include "interpconv/nn/losses.hpp"

namespace interpconv::nn {

enum class LayerType { conv, relu, pool, fc, interp };

struct LayerSpec {
    LayerType type = LayerType::relu;
    int channels = 0;  // conv out-channels, interp filters, fc outputs (0 = loss outputs)
    int kernel = 3;
    int stride = 1;
    int padding = 0;
    int pool = 2;

    friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

/// "conv:16:5:1:2, relu, pool:2, interp:32, relu, fc"
///   conv:<out>:<kernel>[:<stride>[:<padding>]]   pool:<size>   interp:<filters>   fc[:<outputs>]
/// An interp layer must be followed by relu; the pair becomes one interpretable layer.
std::vector<LayerSpec> parse_layers(std::string_view text);
std::string format_layers(const std::vector<LayerSpec>& layers);

enum class LossKind { logistic, softmax, multi_logistic };

LossKind parse_loss_kind(std::string_view text);
std::string to_string(LossKind kind);

struct NetworkConfig {
    std::vector<LayerSpec> layers;
    LossKind loss = LossKind::softmax;
    Shape3 input{1, 64, 64};
    int categories = 4;
    /// Category scored +1 by the single-output logistic loss.
    int positive_category = 0;
    /// Layer-wide overrides of the n-dependent template defaults.
    std::optional<double> tau;
    std::optional<double> beta;
    std::optional<double> alpha;
    /// false: interp layers run as ordinary conv + ReLU.
    bool interpretable = true;
    /// Scale masked maps by 1/tau so a template peak passes activations unchanged.
    bool unit_mask_gain = true;

    /// conv(16,5x5,p2)-relu-pool2 -> conv(32,3x3,p1)-relu-pool2 -> interp(32)-relu-pool2
    /// -> interp(32)-relu -> fc
    static std::vector<LayerSpec> reference_layers();
    int outputs() const { return loss == LossKind::logistic ? 1 : categories; }
};

/// A feed-forward stack evaluated one sample at a time.
class Network {
public:
    Network(const NetworkConfig& config, std::uint64_t seed);

    const NetworkConfig& config() const { return config_; }

    const Tensor& forward(const Tensor& input, const PassContext& ctx);
    void backward(const Tensor& grad_scores, const PassContext& ctx);

    LossResult loss(const Tensor& scores, int label) const;
    int predict(const Tensor& scores) const;

    std::size_t layer_count() const { return layers_.size(); }
    Layer& layer(std::size_t k) { return *layers_[k]; }
    const Layer& layer(std::size_t k) const { return *layers_[k]; }

    /// Parameters with stable names "<layer index>.<kind>.<param>".
    std::vector<std::pair<std::string, Param*>> named_params();
    std::vector<Param*> params();

    std::vector<InterpConvLayer*> interp_layers();
    std::vector<const InterpConvLayer*> interp_layers() const;
    /// Index (into layer()) of each interp layer.
    std::vector<std::size_t> interp_layer_indices() const;

private:
    NetworkConfig config_;
    std::vector<std::unique_ptr<Layer>> layers_;
};

Network build_network(const NetworkConfig& config, std::uint64_t seed);

}  // namespace interpconv::nn
