#include "interpconv/nn/tensor.hpp"

#include <algorithm>
#include <functional>
#include <numeric>

#include "interpconv/errors.hpp"

namespace interpconv::nn {

std::size_t element_count(const std::vector<std::size_t>& shape) {
    if (shape.empty()) return 0;
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

Tensor::Tensor(std::vector<std::size_t> shape, double fill)
    : shape_(std::move(shape)), values_(element_count(shape_), fill) {}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> values)
    : shape_(std::move(shape)), values_(values.begin(), values.end()) {
    if (values_.size() != element_count(shape_)) {
        throw ShapeError("tensor value count does not match its shape");
    }
}

void Tensor::fill(double v) { std::fill(values_.begin(), values_.end(), v); }

void Tensor::resize(std::vector<std::size_t> shape) {
    shape_ = std::move(shape);
    values_.resize(element_count(shape_));
}

void Tensor::reshape(std::vector<std::size_t> shape) {
    if (element_count(shape) != values_.size()) {
        throw ShapeError("reshape changes the element count");
    }
    shape_ = std::move(shape);
}

}  // namespace interpconv::nn
