#pragma once

#include <span>
#include <vector>

namespace interpconv::nn {

struct LossResult {
    double loss = 0.0;
    std::vector<double> grad;  // d loss / d scores
};

/// log(1 + exp(-y * score)) for y in {+1, -1}.
LossResult logistic_log_loss(double score, int label);

/// -log softmax(scores)[label]
LossResult softmax_log_loss(std::span<const double> scores, int label);

/// Independent per-category logistic losses, summed: category `label` gets
/// y = +1, every other category y = -1.
LossResult multi_logistic_log_loss(std::span<const double> scores, int label);

}  // namespace interpconv::nn
