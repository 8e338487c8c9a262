#pragma once

#include <cmath>
#include <random>
#include <span>
#include <vector>

#include "interpconv/interp_layer.hpp"
#include "interpconv/template_bank.hpp"
#include "test_support.hpp"

namespace interpconv::test_support {

// Per-sample surrogate -sum_T p(T) p(x|T) [log p(x|T) - log p(x)] with frozen
// Z_T and p(x) recomputed from x. Written with plain loops over template entries.
inline double surrogate_loss(std::span<const double> x, const TemplateBank& bank,
                             const std::vector<double>& z) {
    const int n = bank.n();
    std::vector<double> cond(bank.size());
    double px = 0.0;
    for (std::size_t t = 0; t < bank.size(); ++t) {
        double tr = 0.0;
        for (int i = 1; i <= n; ++i)
            for (int j = 1; j <= n; ++j) tr += x[(i - 1) * n + (j - 1)] * bank.at(t).at(i, j);
        cond[t] = std::exp(tr) / z[t];
        px += bank.prior(t) * cond[t];
    }
    double loss = 0.0;
    for (std::size_t t = 0; t < bank.size(); ++t) {
        loss -= bank.prior(t) * cond[t] * (std::log(cond[t]) - std::log(px));
    }
    return loss;
}

inline std::vector<double> exact_partition(const std::vector<FeatureMap>& maps, const TemplateBank& bank) {
    std::vector<double> z(bank.size(), 0.0);
    for (const auto& m : maps) {
        for (std::size_t t = 0; t < bank.size(); ++t) z[t] += std::exp(trace_product(m.values(), bank.at(t)));
    }
    return z;
}

// Maps with a background level and a random peak; scale chosen so that traces
// are O(1) and the exponentials differ visibly between templates.
inline FeatureMap random_map(std::mt19937_64& rng, const TemplateBank& bank) {
    const int n = bank.n();
    const double scale = 1.0 / bank.tau();
    auto v = uniform_vector(rng, static_cast<std::size_t>(n) * n, 0.0, 0.3 * scale / (n * n));
    std::uniform_int_distribution<std::size_t> cell(0, v.size() - 1);
    v[cell(rng)] += std::uniform_real_distribution<double>(0.0, 3.0)(rng) * scale;
    if (std::bernoulli_distribution(0.2)(rng)) std::fill(v.begin(), v.end(), 0.0);
    return FeatureMap(n, std::move(v));
}

inline TemplateBank random_bank(std::mt19937_64& rng, int n) {
    BankParams p = BankParams::defaults(n);
    p.tau *= std::uniform_real_distribution<double>(0.5, 2.0)(rng);
    p.beta = std::uniform_real_distribution<double>(1.0, 6.0)(rng);
    p.alpha = std::uniform_real_distribution<double>(0.2, 0.98)(rng);
    return TemplateBank(p);
}

// Hand transcription of the mutual-information loss: plain sums, no log-sum-exp.
inline double brute_force_loss(const std::vector<FeatureMap>& maps, const TemplateBank& bank) {
    const auto z = exact_partition(maps, bank);
    std::vector<double> px(maps.size(), 0.0);
    for (std::size_t s = 0; s < maps.size(); ++s)
        for (std::size_t t = 0; t < bank.size(); ++t)
            px[s] += bank.prior(t) * std::exp(trace_product(maps[s].values(), bank.at(t))) / z[t];
    double loss = 0.0;
    for (std::size_t t = 0; t < bank.size(); ++t) {
        for (std::size_t s = 0; s < maps.size(); ++s) {
            const double c = std::exp(trace_product(maps[s].values(), bank.at(t))) / z[t];
            loss -= bank.prior(t) * c * std::log(c / px[s]);
        }
    }
    return loss;
}

}  // namespace interpconv::test_support
