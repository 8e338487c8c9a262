#include "interpconv/nn/sgd.hpp"

#include "interpconv/errors.hpp"

namespace interpconv::nn {

void sgd_step(std::span<double> params, std::span<const double> grads, std::span<double> velocity,
              double lr, double momentum) {
    if (params.size() != grads.size() || params.size() != velocity.size()) {
        throw ShapeError("sgd_step: parameter, gradient and velocity sizes differ");
    }
    for (std::size_t k = 0; k < params.size(); ++k) {
        velocity[k] = momentum * velocity[k] - lr * grads[k];
        params[k] += velocity[k];
    }
}

Sgd::Sgd(std::vector<Param*> params, double momentum) : params_(std::move(params)), momentum_(momentum) {
    if (!(momentum >= 0.0 && momentum < 1.0)) throw ParameterError("momentum must lie in [0,1)");
    for (const auto* p : params_) velocity_.emplace_back(p->value.size(), 0.0);
}

void Sgd::step(double lr) {
    for (std::size_t i = 0; i < params_.size(); ++i) {
        sgd_step(params_[i]->value.values(), params_[i]->grad.values(), velocity_[i], lr, momentum_);
    }
}

void Sgd::zero_grad() {
    for (auto* p : params_) p->grad.fill(0.0);
}

}  // namespace interpconv::nn
