#include "interpconv/nn/layers.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <string>

#include "interpconv/errors.hpp"

namespace interpconv::nn {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

Shape3 shape_of(const Tensor& t, const char* what) {
    if (t.rank() != 3) throw ShapeError(std::string(what) + ": expected a {C,H,W} tensor");
    return {static_cast<int>(t.dim(0)), static_cast<int>(t.dim(1)), static_cast<int>(t.dim(2))};
}

// cols has C*k*k rows and Ho*Wo columns.
void im2col(const double* in, Shape3 s, const ConvGeometry& g, int out_h, int out_w, double* cols) {
    const int k = g.kernel;
    const std::size_t plane = static_cast<std::size_t>(out_h) * out_w;
    for (int c = 0; c < s.channels; ++c) {
        const double* src = in + static_cast<std::size_t>(c) * s.height * s.width;
        for (int ki = 0; ki < k; ++ki) {
            for (int kj = 0; kj < k; ++kj) {
                double* row = cols + (static_cast<std::size_t>(c * k + ki) * k + kj) * plane;
                for (int oy = 0; oy < out_h; ++oy) {
                    const int iy = oy * g.stride - g.padding + ki;
                    double* dst = row + static_cast<std::size_t>(oy) * out_w;
                    if (iy < 0 || iy >= s.height) {
                        std::fill(dst, dst + out_w, 0.0);
                        continue;
                    }
                    const double* line = src + static_cast<std::size_t>(iy) * s.width;
                    for (int ox = 0; ox < out_w; ++ox) {
                        const int ix = ox * g.stride - g.padding + kj;
                        dst[ox] = (ix >= 0 && ix < s.width) ? line[ix] : 0.0;
                    }
                }
            }
        }
    }
}

void col2im(const double* cols, Shape3 s, const ConvGeometry& g, int out_h, int out_w, double* out) {
    const int k = g.kernel;
    const std::size_t plane = static_cast<std::size_t>(out_h) * out_w;
    std::fill(out, out + s.count(), 0.0);
    for (int c = 0; c < s.channels; ++c) {
        double* dst = out + static_cast<std::size_t>(c) * s.height * s.width;
        for (int ki = 0; ki < k; ++ki) {
            for (int kj = 0; kj < k; ++kj) {
                const double* row = cols + (static_cast<std::size_t>(c * k + ki) * k + kj) * plane;
                for (int oy = 0; oy < out_h; ++oy) {
                    const int iy = oy * g.stride - g.padding + ki;
                    if (iy < 0 || iy >= s.height) continue;
                    double* line = dst + static_cast<std::size_t>(iy) * s.width;
                    const double* src = row + static_cast<std::size_t>(oy) * out_w;
                    for (int ox = 0; ox < out_w; ++ox) {
                        const int ix = ox * g.stride - g.padding + kj;
                        if (ix >= 0 && ix < s.width) line[ix] += src[ox];
                    }
                }
            }
        }
    }
}

struct ConvDims {
    Shape3 in;
    int out_channels;
    int out_h;
    int out_w;
    ConvGeometry geometry;
    Eigen::Index patch() const {
        return static_cast<Eigen::Index>(in.channels) * geometry.kernel * geometry.kernel;
    }
    Eigen::Index plane() const { return static_cast<Eigen::Index>(out_h) * out_w; }
};

ConvDims conv_dims(const Tensor& input, const Tensor& kernels, int stride, int padding) {
    const Shape3 in = shape_of(input, "conv2d");
    if (kernels.rank() != 4 || kernels.dim(2) != kernels.dim(3)) {
        throw ShapeError("conv2d: kernels must be {Cout, C, k, k}");
    }
    if (static_cast<int>(kernels.dim(1)) != in.channels) {
        throw ShapeError("conv2d: kernel has " + std::to_string(kernels.dim(1)) +
                         " input channels, input has " + std::to_string(in.channels));
    }
    if (stride < 1 || padding < 0) throw ParameterError("conv2d: invalid stride/padding");
    ConvGeometry g{static_cast<int>(kernels.dim(2)), stride, padding};
    const int oh = g.output_extent(in.height);
    const int ow = g.output_extent(in.width);
    if (oh < 1 || ow < 1) throw ShapeError("conv2d: kernel larger than padded input");
    return {in, static_cast<int>(kernels.dim(0)), oh, ow, g};
}

void conv_forward_into(const Tensor& input, const Tensor& kernels, const Tensor& bias,
                       const ConvDims& d, Tensor& cols, Tensor& out) {
    cols.resize({static_cast<std::size_t>(d.patch()), static_cast<std::size_t>(d.plane())});
    im2col(input.data(), d.in, d.geometry, d.out_h, d.out_w, cols.data());
    out.resize({static_cast<std::size_t>(d.out_channels), static_cast<std::size_t>(d.out_h),
                static_cast<std::size_t>(d.out_w)});
    ConstMapMat w(kernels.data(), d.out_channels, d.patch());
    ConstMapMat c(cols.data(), d.patch(), d.plane());
    MapMat o(out.data(), d.out_channels, d.plane());
    o.noalias() = w * c;
    for (int oc = 0; oc < d.out_channels; ++oc) o.row(oc).array() += bias[static_cast<std::size_t>(oc)];
}

// Accumulates into grad_kernels / grad_bias; writes grad_input when requested.
void conv_backward_into(const Tensor& cols, const Tensor& kernels, const Tensor& grad_output,
                        const ConvDims& d, Tensor& grad_kernels, Tensor& grad_bias,
                        Tensor* grad_cols, Tensor* grad_input) {
    ConstMapMat dy(grad_output.data(), d.out_channels, d.plane());
    ConstMapMat c(cols.data(), d.patch(), d.plane());
    MapMat dw(grad_kernels.data(), d.out_channels, d.patch());
    dw.noalias() += dy * c.transpose();
    for (int oc = 0; oc < d.out_channels; ++oc) grad_bias[static_cast<std::size_t>(oc)] += dy.row(oc).sum();
    if (grad_input != nullptr) {
        grad_cols->resize({static_cast<std::size_t>(d.patch()), static_cast<std::size_t>(d.plane())});
        ConstMapMat w(kernels.data(), d.out_channels, d.patch());
        MapMat dc(grad_cols->data(), d.patch(), d.plane());
        dc.noalias() = w.transpose() * dy;
        grad_input->resize(d.in.dims());
        col2im(grad_cols->data(), d.in, d.geometry, d.out_h, d.out_w, grad_input->data());
    }
}

}  // namespace

Tensor conv2d_forward(const Tensor& input, const Tensor& kernels, const Tensor& bias, int stride,
                      int padding) {
    const ConvDims d = conv_dims(input, kernels, stride, padding);
    if (bias.size() != static_cast<std::size_t>(d.out_channels)) throw ShapeError("conv2d: bias size");
    Tensor cols;
    Tensor out;
    conv_forward_into(input, kernels, bias, d, cols, out);
    return out;
}

ConvGrads conv2d_backward(const Tensor& input, const Tensor& kernels, const Tensor& grad_output,
                          int stride, int padding) {
    const ConvDims d = conv_dims(input, kernels, stride, padding);
    if (grad_output.size() != static_cast<std::size_t>(d.out_channels) * d.plane()) {
        throw ShapeError("conv2d_backward: gradient does not match the output shape");
    }
    Tensor cols({static_cast<std::size_t>(d.patch()), static_cast<std::size_t>(d.plane())});
    im2col(input.data(), d.in, d.geometry, d.out_h, d.out_w, cols.data());
    ConvGrads g{Tensor(), Tensor(kernels.shape()), Tensor({static_cast<std::size_t>(d.out_channels)})};
    Tensor grad_cols;
    conv_backward_into(cols, kernels, grad_output, d, g.kernels, g.bias, &grad_cols, &g.input);
    return g;
}

Tensor relu_forward(const Tensor& input) {
    Tensor out(input.shape());
    for (std::size_t k = 0; k < input.size(); ++k) out[k] = input[k] > 0.0 ? input[k] : 0.0;
    return out;
}

Tensor relu_backward(const Tensor& input, const Tensor& grad_output) {
    if (input.size() != grad_output.size()) throw ShapeError("relu_backward: size mismatch");
    Tensor out(input.shape());
    for (std::size_t k = 0; k < input.size(); ++k) out[k] = input[k] > 0.0 ? grad_output[k] : 0.0;
    return out;
}

PoolResult maxpool_forward(const Tensor& input, int size) {
    const Shape3 s = shape_of(input, "maxpool");
    if (size < 1) throw ParameterError("maxpool: size must be >= 1");
    const int oh = s.height / size;
    const int ow = s.width / size;
    if (oh < 1 || ow < 1) throw ShapeError("maxpool: window larger than input");
    PoolResult r{Tensor({static_cast<std::size_t>(s.channels), static_cast<std::size_t>(oh),
                         static_cast<std::size_t>(ow)}),
                 std::vector<std::uint32_t>(static_cast<std::size_t>(s.channels) * oh * ow)};
    std::size_t o = 0;
    for (int c = 0; c < s.channels; ++c) {
        const std::size_t base = static_cast<std::size_t>(c) * s.height * s.width;
        for (int oy = 0; oy < oh; ++oy) {
            for (int ox = 0; ox < ow; ++ox, ++o) {
                std::size_t best = base + static_cast<std::size_t>(oy * size) * s.width + ox * size;
                for (int dy = 0; dy < size; ++dy) {
                    for (int dx = 0; dx < size; ++dx) {
                        const std::size_t idx =
                            base + static_cast<std::size_t>(oy * size + dy) * s.width + ox * size + dx;
                        if (input[idx] > input[best]) best = idx;
                    }
                }
                r.output[o] = input[best];
                r.argmax[o] = static_cast<std::uint32_t>(best);
            }
        }
    }
    return r;
}

Tensor maxpool_backward(const std::vector<std::size_t>& input_shape,
                        const std::vector<std::uint32_t>& argmax, const Tensor& grad_output) {
    if (argmax.size() != grad_output.size()) throw ShapeError("maxpool_backward: size mismatch");
    Tensor g(input_shape);
    for (std::size_t o = 0; o < argmax.size(); ++o) g[argmax[o]] += grad_output[o];
    return g;
}

Tensor fc_forward(const Tensor& input, const Tensor& weights, const Tensor& bias) {
    if (weights.rank() != 2 || weights.dim(1) != input.size() || bias.size() != weights.dim(0)) {
        throw ShapeError("fc: weights must be {out, in} with in = input size");
    }
    const auto outs = static_cast<Eigen::Index>(weights.dim(0));
    const auto ins = static_cast<Eigen::Index>(weights.dim(1));
    Tensor out({weights.dim(0), 1, 1});
    ConstMapMat w(weights.data(), outs, ins);
    Eigen::Map<const Eigen::VectorXd> x(input.data(), ins);
    Eigen::Map<const Eigen::VectorXd> b(bias.data(), outs);
    Eigen::Map<Eigen::VectorXd> y(out.data(), outs);
    y.noalias() = w * x;
    y += b;
    return out;
}

FcGrads fc_backward(const Tensor& input, const Tensor& weights, const Tensor& grad_output) {
    if (weights.rank() != 2 || weights.dim(1) != input.size() || grad_output.size() != weights.dim(0)) {
        throw ShapeError("fc_backward: shape mismatch");
    }
    const auto outs = static_cast<Eigen::Index>(weights.dim(0));
    const auto ins = static_cast<Eigen::Index>(weights.dim(1));
    FcGrads g{Tensor(input.shape()), Tensor(weights.shape()), Tensor({weights.dim(0)})};
    ConstMapMat w(weights.data(), outs, ins);
    Eigen::Map<const Eigen::VectorXd> x(input.data(), ins);
    Eigen::Map<const Eigen::VectorXd> dy(grad_output.data(), outs);
    MapMat(g.weights.data(), outs, ins).noalias() = dy * x.transpose();
    Eigen::Map<Eigen::VectorXd>(g.bias.data(), outs) = dy;
    Eigen::Map<Eigen::VectorXd>(g.input.data(), ins).noalias() = w.transpose() * dy;
    return g;
}

void he_initialize(Tensor& weights, std::size_t fan_in, std::mt19937_64& rng) {
    std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
    for (auto& v : weights.values()) v = dist(rng);
}

// ---- Conv2dLayer ---------------------------------------------------------------

Conv2dLayer::Conv2dLayer(Shape3 input, int out_channels, ConvGeometry geometry, std::mt19937_64& rng)
    : input_(input), geometry_(geometry) {
    if (out_channels < 1) throw ParameterError("conv: out-channels must be >= 1");
    if (geometry.kernel < 1 || geometry.stride < 1 || geometry.padding < 0) {
        throw ParameterError("conv: invalid kernel/stride/padding");
    }
    output_ = {out_channels, geometry.output_extent(input.height), geometry.output_extent(input.width)};
    if (output_.height < 1 || output_.width < 1) throw ShapeError("conv: output would be empty");
    const std::vector<std::size_t> wshape{static_cast<std::size_t>(out_channels),
                                          static_cast<std::size_t>(input.channels),
                                          static_cast<std::size_t>(geometry.kernel),
                                          static_cast<std::size_t>(geometry.kernel)};
    weight_ = {"weight", Tensor(wshape), Tensor(wshape)};
    bias_ = {"bias", Tensor({static_cast<std::size_t>(out_channels)}),
             Tensor({static_cast<std::size_t>(out_channels)})};
    he_initialize(weight_.value, static_cast<std::size_t>(input.channels) * geometry.kernel * geometry.kernel, rng);
}

const Tensor& Conv2dLayer::forward(const Tensor& input, const PassContext&) {
    if (input.size() != input_.count()) throw ShapeError("conv: unexpected input shape");
    const ConvDims d{input_, output_.channels, output_.height, output_.width, geometry_};
    conv_forward_into(input, weight_.value, bias_.value, d, cols_, output_tensor_);
    return output_tensor_;
}

const Tensor& Conv2dLayer::backward(const Tensor& grad_output, const PassContext&) {
    if (grad_output.size() != output_.count()) throw ShapeError("conv: unexpected gradient shape");
    const ConvDims d{input_, output_.channels, output_.height, output_.width, geometry_};
    conv_backward_into(cols_, weight_.value, grad_output, d, weight_.grad, bias_.grad, &grad_cols_,
                       needs_input_grad() ? &grad_input_ : nullptr);
    return grad_input_;
}

// ---- ReluLayer -------------------------------------------------------------------

const Tensor& ReluLayer::forward(const Tensor& input, const PassContext&) {
    output_.resize(input.shape());
    for (std::size_t k = 0; k < input.size(); ++k) output_[k] = input[k] > 0.0 ? input[k] : 0.0;
    return output_;
}

const Tensor& ReluLayer::backward(const Tensor& grad_output, const PassContext&) {
    grad_input_.resize(grad_output.shape());
    for (std::size_t k = 0; k < grad_output.size(); ++k) {
        grad_input_[k] = output_[k] > 0.0 ? grad_output[k] : 0.0;
    }
    return grad_input_;
}

// ---- MaxPoolLayer ----------------------------------------------------------------

MaxPoolLayer::MaxPoolLayer(Shape3 input, int size) : input_(input), size_(size) {
    if (size < 1) throw ParameterError("pool: size must be >= 1");
    output_ = {input.channels, input.height / size, input.width / size};
    if (output_.height < 1 || output_.width < 1) throw ShapeError("pool: window larger than input");
}

const Tensor& MaxPoolLayer::forward(const Tensor& input, const PassContext&) {
    result_ = maxpool_forward(input, size_);
    return result_.output;
}

const Tensor& MaxPoolLayer::backward(const Tensor& grad_output, const PassContext&) {
    grad_input_.resize(input_.dims());
    grad_input_.fill(0.0);
    for (std::size_t o = 0; o < result_.argmax.size(); ++o) grad_input_[result_.argmax[o]] += grad_output[o];
    return grad_input_;
}

// ---- FcLayer ---------------------------------------------------------------------

FcLayer::FcLayer(Shape3 input, int outputs, std::mt19937_64& rng) : input_(input), outputs_(outputs) {
    if (outputs < 1) throw ParameterError("fc: outputs must be >= 1");
    const std::vector<std::size_t> wshape{static_cast<std::size_t>(outputs), input.count()};
    weight_ = {"weight", Tensor(wshape), Tensor(wshape)};
    bias_ = {"bias", Tensor({static_cast<std::size_t>(outputs)}), Tensor({static_cast<std::size_t>(outputs)})};
    he_initialize(weight_.value, input.count(), rng);
}

const Tensor& FcLayer::forward(const Tensor& input, const PassContext&) {
    if (input.size() != input_.count()) throw ShapeError("fc: unexpected input shape");
    last_input_ = input;
    output_ = fc_forward(input, weight_.value, bias_.value);
    return output_;
}

const Tensor& FcLayer::backward(const Tensor& grad_output, const PassContext&) {
    const auto outs = static_cast<Eigen::Index>(outputs_);
    const auto ins = static_cast<Eigen::Index>(input_.count());
    Eigen::Map<const Eigen::VectorXd> x(last_input_.data(), ins);
    Eigen::Map<const Eigen::VectorXd> dy(grad_output.data(), outs);
    MapMat(weight_.grad.data(), outs, ins).noalias() += dy * x.transpose();
    Eigen::Map<Eigen::VectorXd>(bias_.grad.data(), outs) += dy;
    if (needs_input_grad()) {
        grad_input_.resize(input_.dims());
        ConstMapMat w(weight_.value.data(), outs, ins);
        Eigen::Map<Eigen::VectorXd>(grad_input_.data(), ins).noalias() = w.transpose() * dy;
    }
    return grad_input_;
}

}  // namespace interpconv::nn
