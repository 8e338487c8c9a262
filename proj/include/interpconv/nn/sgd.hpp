#pragma once

#include <span>
#include <vector>

#include "interpconv/nn/layers.hpp"

namespace interpconv::nn {

/// v <- momentum * v - lr * g;  w <- w + v
void sgd_step(std::span<double> params, std::span<const double> grads, std::span<double> velocity,
              double lr, double momentum);

/// Momentum SGD over a fixed parameter list; velocities start at zero.
class Sgd {
public:
    Sgd(std::vector<Param*> params, double momentum);

    void step(double lr);
    void zero_grad();

private:
    std::vector<Param*> params_;
    std::vector<std::vector<double>> velocity_;
    double momentum_;
};

}  // namespace interpconv::nn
