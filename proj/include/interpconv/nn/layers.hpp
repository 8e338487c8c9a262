#pragma once

#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "interpconv/nn/tensor.hpp"

namespace interpconv::nn {

/// Per-sample activation shape. Fully connected outputs use {features, 1, 1}.
struct Shape3 {
    int channels = 0;
    int height = 0;
    int width = 0;

    std::size_t count() const {
        return static_cast<std::size_t>(channels) * static_cast<std::size_t>(height) *
               static_cast<std::size_t>(width);
    }
    std::vector<std::size_t> dims() const {
        return {static_cast<std::size_t>(channels), static_cast<std::size_t>(height),
                static_cast<std::size_t>(width)};
    }
    friend bool operator==(const Shape3&, const Shape3&) = default;
};

struct ConvGeometry {
    int kernel = 3;
    int stride = 1;
    int padding = 0;

    int output_extent(int input) const { return (input + 2 * padding - kernel) / stride + 1; }
};

// ---- stateless kernels -------------------------------------------------------
// Inputs are {C, H, W}; kernels are {Cout, C, k, k}; bias is {Cout}.

Tensor conv2d_forward(const Tensor& input, const Tensor& kernels, const Tensor& bias,
                      int stride, int padding);

struct ConvGrads {
    Tensor input;
    Tensor kernels;
    Tensor bias;
};

ConvGrads conv2d_backward(const Tensor& input, const Tensor& kernels, const Tensor& grad_output,
                          int stride, int padding);

Tensor relu_forward(const Tensor& input);
/// Passes the gradient where the forward input was strictly positive.
Tensor relu_backward(const Tensor& input, const Tensor& grad_output);

struct PoolResult {
    Tensor output;
    std::vector<std::uint32_t> argmax;  // flat input offset per output element
};

/// Non-overlapping size x size max pooling; ties keep the first (row-major) element.
PoolResult maxpool_forward(const Tensor& input, int size);
Tensor maxpool_backward(const std::vector<std::size_t>& input_shape,
                        const std::vector<std::uint32_t>& argmax, const Tensor& grad_output);

/// weights {out, in}, bias {out}; the input is used flattened.
Tensor fc_forward(const Tensor& input, const Tensor& weights, const Tensor& bias);

struct FcGrads {
    Tensor input;
    Tensor weights;
    Tensor bias;
};

FcGrads fc_backward(const Tensor& input, const Tensor& weights, const Tensor& grad_output);

// ---- layers ----------------------------------------------------------------

struct Param {
    std::string name;
    Tensor value;
    Tensor grad;
};

/// Per-sample information the layers may need during a pass.
struct PassContext {
    int label = -1;
    bool training = false;
};

/// A layer processes one sample at a time. forward caches what backward needs;
/// backward accumulates parameter gradients and returns the input gradient.
class Layer {
public:
    virtual ~Layer() = default;

    virtual std::string kind() const = 0;
    virtual Shape3 input_shape() const = 0;
    virtual Shape3 output_shape() const = 0;

    virtual const Tensor& forward(const Tensor& input, const PassContext& ctx) = 0;
    virtual const Tensor& backward(const Tensor& grad_output, const PassContext& ctx) = 0;

    virtual std::vector<Param*> params() { return {}; }

    /// The first layer of a network does not need an input gradient.
    void set_needs_input_grad(bool v) { needs_input_grad_ = v; }
    bool needs_input_grad() const { return needs_input_grad_; }

private:
    bool needs_input_grad_ = true;
};

/// Zero-mean Gaussian weights with std sqrt(2 / fan_in); biases zero.
void he_initialize(Tensor& weights, std::size_t fan_in, std::mt19937_64& rng);

class Conv2dLayer : public Layer {
public:
    Conv2dLayer(Shape3 input, int out_channels, ConvGeometry geometry, std::mt19937_64& rng);

    std::string kind() const override { return "conv"; }
    Shape3 input_shape() const override { return input_; }
    Shape3 output_shape() const override { return output_; }
    const Tensor& forward(const Tensor& input, const PassContext& ctx) override;
    const Tensor& backward(const Tensor& grad_output, const PassContext& ctx) override;
    std::vector<Param*> params() override { return {&weight_, &bias_}; }

    const ConvGeometry& geometry() const { return geometry_; }
    Param& weight() { return weight_; }
    Param& bias() { return bias_; }

private:
    Shape3 input_;
    Shape3 output_;
    ConvGeometry geometry_;
    Param weight_;
    Param bias_;
    Tensor cols_;
    Tensor grad_cols_;
    Tensor output_tensor_;
    Tensor grad_input_;
};

class ReluLayer : public Layer {
public:
    explicit ReluLayer(Shape3 shape) : shape_(shape) {}

    std::string kind() const override { return "relu"; }
    Shape3 input_shape() const override { return shape_; }
    Shape3 output_shape() const override { return shape_; }
    const Tensor& forward(const Tensor& input, const PassContext& ctx) override;
    const Tensor& backward(const Tensor& grad_output, const PassContext& ctx) override;

private:
    Shape3 shape_;
    Tensor output_;
    Tensor grad_input_;
};

class MaxPoolLayer : public Layer {
public:
    MaxPoolLayer(Shape3 input, int size);

    std::string kind() const override { return "pool"; }
    Shape3 input_shape() const override { return input_; }
    Shape3 output_shape() const override { return output_; }
    const Tensor& forward(const Tensor& input, const PassContext& ctx) override;
    const Tensor& backward(const Tensor& grad_output, const PassContext& ctx) override;

private:
    Shape3 input_;
    Shape3 output_;
    int size_;
    PoolResult result_;
    Tensor grad_input_;
};

class FcLayer : public Layer {
public:
    FcLayer(Shape3 input, int outputs, std::mt19937_64& rng);

    std::string kind() const override { return "fc"; }
    Shape3 input_shape() const override { return input_; }
    Shape3 output_shape() const override { return {outputs_, 1, 1}; }
    const Tensor& forward(const Tensor& input, const PassContext& ctx) override;
    const Tensor& backward(const Tensor& grad_output, const PassContext& ctx) override;
    std::vector<Param*> params() override { return {&weight_, &bias_}; }

private:
    Shape3 input_;
    int outputs_;
    Param weight_;
    Param bias_;
    Tensor last_input_;
    Tensor output_;
    Tensor grad_input_;
};

}  // namespace interpconv::nn
