#include "interpconv/nn/network.hpp"

#include <algorithm>
#include <charconv>
#include <random>
#include <sstream>

#include "interpconv/errors.hpp"

namespace interpconv::nn {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = s.find(sep, start);
        out.push_back(trim(s.substr(start, pos == std::string_view::npos ? pos : pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

int to_int(std::string_view s, std::string_view item) {
    int v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size() || v < 0) {
        throw ConfigError("bad number '" + std::string(s) + "' in layer '" + std::string(item) + "'");
    }
    return v;
}

}  // namespace

std::vector<LayerSpec> parse_layers(std::string_view text) {
    std::vector<LayerSpec> layers;
    for (auto item : split(text, ',')) {
        if (item.empty()) throw ConfigError("empty layer entry in '" + std::string(text) + "'");
        const auto parts = split(item, ':');
        const auto name = parts[0];
        LayerSpec spec;
        auto arg = [&](std::size_t k) { return to_int(parts[k], item); };
        if (name == "conv") {
            if (parts.size() < 3 || parts.size() > 5) throw ConfigError("conv needs conv:<out>:<kernel>[:<stride>[:<pad>]]");
            spec.type = LayerType::conv;
            spec.channels = arg(1);
            spec.kernel = arg(2);
            spec.stride = parts.size() > 3 ? arg(3) : 1;
            spec.padding = parts.size() > 4 ? arg(4) : 0;
        } else if (name == "relu") {
            if (parts.size() != 1) throw ConfigError("relu takes no arguments");
            spec.type = LayerType::relu;
        } else if (name == "pool") {
            if (parts.size() != 2) throw ConfigError("pool needs pool:<size>");
            spec.type = LayerType::pool;
            spec.pool = arg(1);
        } else if (name == "interp") {
            if (parts.size() != 2) throw ConfigError("interp needs interp:<filters>");
            spec.type = LayerType::interp;
            spec.channels = arg(1);
            spec.kernel = 3;
            spec.padding = 1;
        } else if (name == "fc") {
            if (parts.size() > 2) throw ConfigError("fc takes at most one argument");
            spec.type = LayerType::fc;
            spec.channels = parts.size() == 2 ? arg(1) : 0;
        } else {
            throw ConfigError("unknown layer kind '" + std::string(name) + "'");
        }
        layers.push_back(spec);
    }
    for (std::size_t k = 0; k < layers.size(); ++k) {
        if (layers[k].type == LayerType::interp &&
            (k + 1 >= layers.size() || layers[k + 1].type != LayerType::relu)) {
            throw ConfigError("an interp layer must be followed by relu");
        }
    }
    return layers;
}

std::string format_layers(const std::vector<LayerSpec>& layers) {
    std::ostringstream os;
    for (std::size_t k = 0; k < layers.size(); ++k) {
        if (k) os << ", ";
        const auto& l = layers[k];
        switch (l.type) {
            case LayerType::conv:
                os << "conv:" << l.channels << ':' << l.kernel << ':' << l.stride << ':' << l.padding;
                break;
            case LayerType::relu: os << "relu"; break;
            case LayerType::pool: os << "pool:" << l.pool; break;
            case LayerType::interp: os << "interp:" << l.channels; break;
            case LayerType::fc:
                os << "fc";
                if (l.channels > 0) os << ':' << l.channels;
                break;
        }
    }
    return os.str();
}

LossKind parse_loss_kind(std::string_view text) {
    if (text == "logistic") return LossKind::logistic;
    if (text == "softmax") return LossKind::softmax;
    if (text == "multi_logistic") return LossKind::multi_logistic;
    throw ConfigError("unknown loss '" + std::string(text) + "' (logistic | softmax | multi_logistic)");
}

std::string to_string(LossKind kind) {
    switch (kind) {
        case LossKind::logistic: return "logistic";
        case LossKind::softmax: return "softmax";
        case LossKind::multi_logistic: return "multi_logistic";
    }
    return "?";
}

std::vector<LayerSpec> NetworkConfig::reference_layers() {
    return parse_layers("conv:16:5:1:2, relu, pool:2, conv:32:3:1:1, relu, pool:2, interp:32, relu, pool:2, "
                        "interp:32, relu, fc");
}

Network::Network(const NetworkConfig& config, std::uint64_t seed) : config_(config) {
    if (config.layers.empty()) throw ConfigError("network has no layers");
    if (config.categories < 1) throw ConfigError("network needs at least one category");
    std::seed_seq seq{seed, std::uint64_t{0x1417}};
    std::mt19937_64 rng(seq);

    Shape3 shape = config.input;
    for (std::size_t k = 0; k < config.layers.size(); ++k) {
        const auto& spec = config.layers[k];
        std::unique_ptr<Layer> layer;
        switch (spec.type) {
            case LayerType::conv:
                layer = std::make_unique<Conv2dLayer>(shape, spec.channels,
                                                      ConvGeometry{spec.kernel, spec.stride, spec.padding}, rng);
                break;
            case LayerType::relu: layer = std::make_unique<ReluLayer>(shape); break;
            case LayerType::pool: layer = std::make_unique<MaxPoolLayer>(shape, spec.pool); break;
            case LayerType::fc:
                layer = std::make_unique<FcLayer>(shape, spec.channels > 0 ? spec.channels : config.outputs(), rng);
                break;
            case LayerType::interp: {
                BankParams bp = BankParams::defaults(shape.height);
                if (config.tau) bp.tau = *config.tau;
                if (config.beta) bp.beta = *config.beta;
                if (config.alpha) bp.alpha = *config.alpha;
                const double gain = config.unit_mask_gain ? 1.0 / bp.tau : 1.0;
                layer = std::make_unique<InterpConvLayer>(shape, spec.channels, bp, config.interpretable, rng, gain);
                if (layer->output_shape().height != shape.height) {
                    throw ShapeError("interp-conv must preserve the spatial size");
                }
                ++k;  // the following relu is part of the layer
                break;
            }
        }
        shape = layer->output_shape();
        layers_.push_back(std::move(layer));
    }
    if (shape.count() != static_cast<std::size_t>(config.outputs())) {
        throw ConfigError("network produces " + std::to_string(shape.count()) + " scores, loss expects " +
                          std::to_string(config.outputs()));
    }
    layers_.front()->set_needs_input_grad(false);
}

const Tensor& Network::forward(const Tensor& input, const PassContext& ctx) {
    const Tensor* x = &input;
    for (auto& l : layers_) x = &l->forward(*x, ctx);
    return *x;
}

void Network::backward(const Tensor& grad_scores, const PassContext& ctx) {
    const Tensor* g = &grad_scores;
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = &(*it)->backward(*g, ctx);
}

LossResult Network::loss(const Tensor& scores, int label) const {
    switch (config_.loss) {
        case LossKind::logistic:
            return logistic_log_loss(scores[0], label == config_.positive_category ? 1 : -1);
        case LossKind::softmax: return softmax_log_loss(scores.values(), label);
        case LossKind::multi_logistic: return multi_logistic_log_loss(scores.values(), label);
    }
    throw ConfigError("unknown loss kind");
}

int Network::predict(const Tensor& scores) const {
    if (config_.loss == LossKind::logistic) {
        if (scores[0] > 0.0) return config_.positive_category;
        return config_.positive_category == 0 ? 1 : 0;
    }
    const auto v = scores.values();
    return static_cast<int>(std::max_element(v.begin(), v.end()) - v.begin());
}

std::vector<std::pair<std::string, Param*>> Network::named_params() {
    std::vector<std::pair<std::string, Param*>> out;
    for (std::size_t k = 0; k < layers_.size(); ++k) {
        for (auto* p : layers_[k]->params()) {
            out.emplace_back(std::to_string(k) + "." + layers_[k]->kind() + "." + p->name, p);
        }
    }
    return out;
}

std::vector<Param*> Network::params() {
    std::vector<Param*> out;
    for (auto& l : layers_) {
        for (auto* p : l->params()) out.push_back(p);
    }
    return out;
}

std::vector<InterpConvLayer*> Network::interp_layers() {
    std::vector<InterpConvLayer*> out;
    for (auto& l : layers_) {
        if (auto* p = dynamic_cast<InterpConvLayer*>(l.get())) out.push_back(p);
    }
    return out;
}

std::vector<const InterpConvLayer*> Network::interp_layers() const {
    std::vector<const InterpConvLayer*> out;
    for (const auto& l : layers_) {
        if (const auto* p = dynamic_cast<const InterpConvLayer*>(l.get())) out.push_back(p);
    }
    return out;
}

std::vector<std::size_t> Network::interp_layer_indices() const {
    std::vector<std::size_t> out;
    for (std::size_t k = 0; k < layers_.size(); ++k) {
        if (dynamic_cast<const InterpConvLayer*>(layers_[k].get())) out.push_back(k);
    }
    return out;
}

Network build_network(const NetworkConfig& config, std::uint64_t seed) { return Network(config, seed); }

}  // namespace interpconv::nn
