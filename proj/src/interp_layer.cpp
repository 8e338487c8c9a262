#include "interpconv/interp_layer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "interpconv/errors.hpp"

namespace interpconv {

namespace {

void check_square(std::span<const double> x, int n, const char* what) {
    if (n < 1 || x.size() != static_cast<std::size_t>(n) * static_cast<std::size_t>(n)) {
        throw ShapeError(std::string(what) + ": expected " + std::to_string(n) + "x" +
                         std::to_string(n) + " map, got " + std::to_string(x.size()) + " values");
    }
}

void check_same_size(std::size_t a, std::size_t b, const char* what) {
    if (a != b) {
        throw ShapeError(std::string(what) + ": size mismatch " + std::to_string(a) + " vs " +
                         std::to_string(b));
    }
}

double log_sum_exp(std::span<const double> v) {
    const double m = *std::max_element(v.begin(), v.end());
    double s = 0.0;
    for (double e : v) s += std::exp(e - m);
    return m + std::log(s);
}

double xlogx(double p) { return p > 0.0 ? p * std::log(p) : 0.0; }

// log p(x_s | T) for every sample s and template T, with Z_T taken over the set.
// Layout: [template][sample].
std::vector<std::vector<double>> log_conditionals(std::span<const FeatureMap> maps,
                                                  const TemplateBank& bank) {
    if (maps.empty()) throw InputError("filter loss needs at least one feature map");
    const std::size_t count = maps.size();
    std::vector<std::vector<double>> logp(bank.size(), std::vector<double>(count));
    for (std::size_t s = 0; s < count; ++s) {
        check_square(maps[s].values(), bank.n(), "filter loss");
        const auto tr = bank.traces(maps[s].values());
        for (std::size_t t = 0; t < bank.size(); ++t) logp[t][s] = tr[t];
    }
    for (auto& row : logp) {
        const double log_z = log_sum_exp(row);
        for (double& v : row) v -= log_z;
    }
    return logp;
}

// log p(x_s) = log sum_T p(T) p(x_s|T)
std::vector<double> log_marginals(const std::vector<std::vector<double>>& logp,
                                  const TemplateBank& bank) {
    const std::size_t count = logp.front().size();
    std::vector<double> out(count);
    std::vector<double> terms(bank.size());
    for (std::size_t s = 0; s < count; ++s) {
        for (std::size_t t = 0; t < bank.size(); ++t) {
            terms[t] = std::log(bank.prior(t)) + logp[t][s];
        }
        out[s] = log_sum_exp(terms);
    }
    return out;
}

void check_partition(std::span<const double> z, const TemplateBank& bank) {
    check_same_size(z.size(), bank.size(), "partition estimates");
    for (double v : z) {
        if (!(v > 0.0) || !std::isfinite(v)) {
            throw ParameterError("partition estimates must be positive and finite");
        }
    }
}

}  // namespace

FeatureMap::FeatureMap(int n, std::vector<double> values) : n_(n), values_(std::move(values)) {
    check_square(values_, n_, "FeatureMap");
    for (double v : values_) {
        if (!(v >= 0.0)) throw ParameterError("feature map entries must be >= 0");
    }
}

FeatureMap FeatureMap::zeros(int n) {
    return FeatureMap(n, std::vector<double>(static_cast<std::size_t>(n) * n, 0.0));
}

GridIndex select_template(std::span<const double> x, int n) {
    check_square(x, n, "select_template");
    std::size_t best = 0;
    for (std::size_t k = 1; k < x.size(); ++k) {
        if (x[k] > x[best]) best = k;
    }
    return grid_index(best, n);
}

MaskedMap mask_forward(std::span<const double> x, const TemplateBank& bank) {
    MaskedMap out{std::vector<double>(x.size()), {}};
    out.peak = mask_forward(x, bank, out.values);
    return out;
}

GridIndex mask_forward(std::span<const double> x, const TemplateBank& bank,
                       std::span<double> out) {
    const GridIndex peak = select_template(x, bank.n());
    check_same_size(out.size(), x.size(), "mask_forward");
    const auto t = bank.positive(peak).values();
    for (std::size_t k = 0; k < x.size(); ++k) out[k] = std::max(x[k] * t[k], 0.0);
    return peak;
}

std::vector<double> mask_backward(std::span<const double> grad_out, std::span<const double> x,
                                  const Template& selected) {
    std::vector<double> grad(x.size());
    mask_backward(grad_out, x, selected, grad);
    return grad;
}

void mask_backward(std::span<const double> grad_out, std::span<const double> x,
                   const Template& selected, std::span<double> grad_x) {
    const auto t = selected.values();
    check_same_size(grad_out.size(), x.size(), "mask_backward");
    check_same_size(t.size(), x.size(), "mask_backward");
    check_same_size(grad_x.size(), x.size(), "mask_backward");
    for (std::size_t k = 0; k < x.size(); ++k) {
        grad_x[k] = x[k] * t[k] > 0.0 ? grad_out[k] * t[k] : 0.0;
    }
}

double filter_loss_exact(std::span<const FeatureMap> maps, const TemplateBank& bank) {
    const auto logp = log_conditionals(maps, bank);
    const auto logpx = log_marginals(logp, bank);
    double mi = 0.0;
    for (std::size_t t = 0; t < bank.size(); ++t) {
        double inner = 0.0;
        for (std::size_t s = 0; s < maps.size(); ++s) {
            inner += std::exp(logp[t][s]) * (logp[t][s] - logpx[s]);
        }
        mi += bank.prior(t) * inner;
    }
    return -mi;
}

LossDecomposition filter_loss_decomposed(std::span<const FeatureMap> maps,
                                         const TemplateBank& bank) {
    const auto logp = log_conditionals(maps, bank);
    const auto logpx = log_marginals(logp, bank);
    const std::size_t neg = bank.negative_index();

    LossDecomposition d;
    for (std::size_t t = 0; t < bank.size(); ++t) d.prior_entropy -= xlogx(bank.prior(t));

    std::vector<double> posterior(bank.size());
    for (std::size_t s = 0; s < maps.size(); ++s) {
        const double px = std::exp(logpx[s]);
        for (std::size_t t = 0; t < bank.size(); ++t) {
            posterior[t] = std::exp(std::log(bank.prior(t)) + logp[t][s] - logpx[s]);
        }
        const double p_neg = posterior[neg];
        double p_pos = 0.0;
        for (std::size_t t = 0; t < neg; ++t) p_pos += posterior[t];

        d.inter_category_entropy -= px * (xlogx(p_neg) + xlogx(p_pos));

        if (p_pos > 0.0) {
            double spatial = 0.0;
            for (std::size_t t = 0; t < neg; ++t) spatial -= xlogx(posterior[t] / p_pos);
            d.spatial_entropy_term += px * p_pos * spatial;
        }
    }
    d.total = -d.prior_entropy + d.inter_category_entropy + d.spatial_entropy_term;
    return d;
}

double likelihood_given_partition(std::span<const double> x, const TemplateBank& bank,
                                  std::span<const double> z) {
    check_partition(z, bank);
    const auto tr = bank.traces(x);
    double px = 0.0;
    for (std::size_t t = 0; t < bank.size(); ++t) px += bank.prior(t) * std::exp(tr[t]) / z[t];
    return px;
}

std::vector<double> filter_loss_grad_exact(std::span<const double> x, const TemplateBank& bank,
                                           std::span<const double> z, double p_x) {
    check_square(x, bank.n(), "filter_loss_grad_exact");
    check_partition(z, bank);
    if (!(p_x > 0.0) || !std::isfinite(p_x)) throw ParameterError("p(x) must be positive");

    const auto tr = bank.traces(x);
    const double log_px = std::log(p_x);
    std::vector<double> grad(x.size(), 0.0);
    for (std::size_t t = 0; t < bank.size(); ++t) {
        const double weight = bank.prior(t) * std::exp(tr[t]) / z[t] *
                              (tr[t] - std::log(z[t]) - log_px);
        const auto tv = bank.at(t).values();
        for (std::size_t k = 0; k < x.size(); ++k) grad[k] -= weight * tv[k];
    }
    return grad;
}

std::vector<double> filter_loss_grad_approx(std::span<const double> x, const Template& target,
                                            const TemplateBank& bank, double z_target,
                                            double p_x) {
    check_square(x, bank.n(), "filter_loss_grad_approx");
    const std::size_t k = target.is_negative() ? bank.negative_index() : bank.index_of(target.peak());
    std::vector<double> grad(x.size());
    filter_loss_grad_approx(x, target, bank.prior(k), z_target, p_x, grad);
    return grad;
}

void filter_loss_grad_approx(std::span<const double> x, const Template& target,
                             double target_prior, double z_target, double p_x,
                             std::span<double> grad) {
    if (!(z_target > 0.0) || !(p_x > 0.0)) {
        throw ParameterError("partition estimate and p(x) must be positive");
    }
    const auto tv = target.values();
    check_same_size(tv.size(), x.size(), "filter_loss_grad_approx");
    check_same_size(grad.size(), x.size(), "filter_loss_grad_approx");
    double tr = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) tr += x[k] * tv[k];
    const double weight = target_prior / z_target * std::exp(tr) *
                          (tr - std::log(z_target) - std::log(p_x));
    for (std::size_t k = 0; k < x.size(); ++k) grad[k] = -weight * tv[k];
}

std::size_t target_template_index(std::span<const double> x, const TemplateBank& bank,
                                  int sample_category, std::optional<int> assigned_category) {
    if (!assigned_category) throw StateError("filter has no assigned target category");
    if (sample_category != *assigned_category) return bank.negative_index();
    return bank.index_of(select_template(x, bank.n()));
}

void initialize_running_stats(InterpFilterState& state, const TemplateBank& bank,
                              std::span<const double> exp_means, double reference_count) {
    check_same_size(exp_means.size(), bank.size(), "initialize_running_stats");
    if (!(reference_count > 0.0)) throw ParameterError("reference count must be positive");
    state.z_estimates.resize(bank.size());
    double px = 0.0;
    for (std::size_t t = 0; t < bank.size(); ++t) {
        state.z_estimates[t] = exp_means[t] * reference_count;
        px += bank.prior(t) * exp_means[t] / state.z_estimates[t];
    }
    check_partition(state.z_estimates, bank);
    state.mean_px = px;
    state.initialized = true;
}

void update_running_stats(InterpFilterState& state, const TemplateBank& bank,
                          std::span<const double> batch_exp_means, double reference_count) {
    if (!state.initialized) throw StateError("running statistics used before warm-up");
    check_same_size(batch_exp_means.size(), bank.size(), "update_running_stats");
    check_same_size(state.z_estimates.size(), bank.size(), "update_running_stats");
    const double rho = state.ema_rate;
    if (!(rho > 0.0 && rho <= 1.0)) throw ParameterError("EMA rate must lie in (0,1]");
    double px = 0.0;
    for (std::size_t t = 0; t < bank.size(); ++t) {
        auto& z = state.z_estimates[t];
        z = (1.0 - rho) * z + rho * batch_exp_means[t] * reference_count;
        px += bank.prior(t) * batch_exp_means[t] / z;
    }
    state.mean_px = px;
}

int assign_target_category(const std::map<int, double>& mean_activation_by_category) {
    if (mean_activation_by_category.empty()) {
        throw InputError("category assignment needs at least one category");
    }
    auto best = mean_activation_by_category.begin();
    for (auto it = std::next(best); it != mean_activation_by_category.end(); ++it) {
        if (it->second > best->second) best = it;
    }
    return best->first;
}

LambdaSchedule::LambdaSchedule(double coefficient, double ema_rate)
    : coefficient_(coefficient), ema_rate_(ema_rate) {
    if (!(coefficient >= 0.0)) throw ParameterError("lambda coefficient must be >= 0");
    if (!(ema_rate > 0.0 && ema_rate <= 1.0)) throw ParameterError("EMA rate must lie in (0,1]");
}

void LambdaSchedule::update(std::span<const double> batch_max_activations) {
    if (batch_max_activations.empty()) return;
    double mean = 0.0;
    for (double v : batch_max_activations) mean += v;
    mean /= static_cast<double>(batch_max_activations.size());
    if (!initialized_) {
        running_mean_ = mean;
        initialized_ = true;
    } else {
        running_mean_ = (1.0 - ema_rate_) * running_mean_ + ema_rate_ * mean;
    }
}

void LambdaSchedule::restore(double running_mean, bool initialized) {
    running_mean_ = running_mean;
    initialized_ = initialized;
}

void update_lambda(InterpFilterState& state, LambdaSchedule& schedule,
                   std::span<const double> batch_max_activations) {
    schedule.update(batch_max_activations);
    state.lambda = schedule.lambda();
}

std::vector<double> combined_gradient(std::span<const double> grad_task,
                                      std::span<const double> grad_filter, double lambda) {
    std::vector<double> out(grad_task.begin(), grad_task.end());
    combine_gradient_into(out, grad_filter, lambda);
    return out;
}

void combine_gradient_into(std::span<double> grad_task, std::span<const double> grad_filter,
                           double lambda) {
    check_same_size(grad_task.size(), grad_filter.size(), "combined_gradient");
    if (lambda == 0.0) return;
    for (std::size_t k = 0; k < grad_task.size(); ++k) grad_task[k] += lambda * grad_filter[k];
}

}  // namespace interpconv
