#include "interpconv/nn/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "interpconv/errors.hpp"

namespace interpconv::nn {

namespace {

// log(1 + e^z) without overflow
double softplus(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

}  // namespace

LossResult logistic_log_loss(double score, int label) {
    if (label != 1 && label != -1) throw ParameterError("logistic label must be +1 or -1");
    const double y = label;
    return {softplus(-y * score), {-y * sigmoid(-y * score)}};
}

LossResult softmax_log_loss(std::span<const double> scores, int label) {
    if (scores.empty()) throw ShapeError("softmax loss needs at least one score");
    if (label < 0 || static_cast<std::size_t>(label) >= scores.size()) {
        throw ParameterError("softmax label " + std::to_string(label) + " out of range");
    }
    const double m = *std::max_element(scores.begin(), scores.end());
    double sum = 0.0;
    for (double s : scores) sum += std::exp(s - m);
    const double lse = m + std::log(sum);
    LossResult r{lse - scores[static_cast<std::size_t>(label)], std::vector<double>(scores.size())};
    for (std::size_t c = 0; c < scores.size(); ++c) r.grad[c] = std::exp(scores[c] - lse);
    r.grad[static_cast<std::size_t>(label)] -= 1.0;
    return r;
}

LossResult multi_logistic_log_loss(std::span<const double> scores, int label) {
    if (label < 0 || static_cast<std::size_t>(label) >= scores.size()) {
        throw ParameterError("label " + std::to_string(label) + " out of range");
    }
    LossResult r{0.0, std::vector<double>(scores.size())};
    for (std::size_t c = 0; c < scores.size(); ++c) {
        const auto part = logistic_log_loss(scores[c], c == static_cast<std::size_t>(label) ? 1 : -1);
        r.loss += part.loss;
        r.grad[c] = part.grad[0];
    }
    return r;
}

}  // namespace interpconv::nn
