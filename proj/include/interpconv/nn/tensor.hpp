#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "interpconv/aligned.hpp"

namespace interpconv::nn {

/// Dense row-major array of doubles.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> shape, double fill = 0.0);
    Tensor(std::vector<std::size_t> shape, std::vector<double> values);

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
    std::size_t size() const { return values_.size(); }
    bool empty() const { return values_.empty(); }

    double* data() { return values_.data(); }
    const double* data() const { return values_.data(); }
    std::span<double> values() { return values_; }
    std::span<const double> values() const { return values_; }

    double& operator[](std::size_t k) { return values_[k]; }
    double operator[](std::size_t k) const { return values_[k]; }

    void fill(double v);
    /// Changes the shape; reallocates only if the element count changes.
    void resize(std::vector<std::size_t> shape);
    void reshape(std::vector<std::size_t> shape);

    friend bool operator==(const Tensor&, const Tensor&) = default;

private:
    std::vector<std::size_t> shape_;
    AlignedBuffer values_;
};

std::size_t element_count(const std::vector<std::size_t>& shape);

}  // namespace interpconv::nn
