#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "interpconv/template_bank.hpp"

namespace interpconv {

/// n x n post-ReLU activation map of one filter on one image. Entries are >= 0.
class FeatureMap {
public:
    FeatureMap() = default;
    FeatureMap(int n, std::vector<double> values);
    static FeatureMap zeros(int n);

    int size() const { return n_; }
    double at(int row, int col) const { return values_[flat_index({row, col}, n_)]; }
    double& at(int row, int col) { return values_[flat_index({row, col}, n_)]; }
    std::span<const double> values() const { return values_; }
    std::span<double> values() { return values_; }

private:
    int n_ = 0;
    std::vector<double> values_;
};

/// argmax_[i,j] x_ij. Ties go to the smallest row-major index, so an all-zero
/// map selects [1,1].
GridIndex select_template(std::span<const double> x, int n);

struct MaskedMap {
    std::vector<double> values;
    GridIndex peak;
};

/// x_masked = max(x o T_mu, 0) with mu = select_template(x). Only positive
/// templates take part; the negative template is never used as a mask.
MaskedMap mask_forward(std::span<const double> x, const TemplateBank& bank);

/// In-place variant used by the network. Returns the selected peak.
GridIndex mask_forward(std::span<const double> x, const TemplateBank& bank, std::span<double> out);

/// Chain rule through the mask with the selected template held fixed.
/// grad_x_ij = grad_out_ij * t_ij where x_ij * t_ij > 0, else 0.
std::vector<double> mask_backward(std::span<const double> grad_out, std::span<const double> x,
                                  const Template& selected);
void mask_backward(std::span<const double> grad_out, std::span<const double> x,
                   const Template& selected, std::span<double> grad_x);

/// Negative mutual information between the maps and the template set, with
/// Z_T = sum_{x in X} exp(tr(x . T)) computed from X itself and every map
/// weighted uniformly.
double filter_loss_exact(std::span<const FeatureMap> maps, const TemplateBank& bank);

struct LossDecomposition {
    double prior_entropy = 0.0;            // H(T)
    double inter_category_entropy = 0.0;   // H(T' = {T-, T+} | X)
    double spatial_entropy_term = 0.0;     // sum_x p(T+, x) H(T+ | X = x)
    double total = 0.0;                    // -H(T) + inter + spatial
};

/// Same loss as filter_loss_exact, assembled from its entropy terms.
/// The spatial term weights the entropy -sum_mu p~ log p~ of the renormalised
/// positive posterior p~(T_mu|x) = p(T_mu|x) / p(T+|x) by p(T+, x).
LossDecomposition filter_loss_decomposed(std::span<const FeatureMap> maps,
                                         const TemplateBank& bank);

/// p(x) = sum_T p(T) exp(tr(x . T)) / Z_T for frozen partition values.
double likelihood_given_partition(std::span<const double> x, const TemplateBank& bank,
                                  std::span<const double> z);

/// d Loss_f / d x_ij with Z_T and p(x) treated as constants:
///   -sum_T t_ij p(T) e^{tr(x.T)} / Z_T * { tr(x.T) - log[Z_T p(x)] }
/// Passing p_x = likelihood_given_partition(x, ...) gives the exact derivative of
/// the per-sample loss -sum_T p(T) p(x|T) [log p(x|T) - log p(x)] with p(x) live.
std::vector<double> filter_loss_grad_exact(std::span<const double> x, const TemplateBank& bank,
                                           std::span<const double> z, double p_x);

/// Single-template form of the gradient, keeping only the target template:
///   -p(T^) t^_ij / Z_T^ * e^{tr(x.T^)} * { tr(x.T^) - log Z_T^ - log p(x) }
std::vector<double> filter_loss_grad_approx(std::span<const double> x, const Template& target,
                                            const TemplateBank& bank, double z_target, double p_x);
void filter_loss_grad_approx(std::span<const double> x, const Template& target,
                             double target_prior, double z_target, double p_x,
                             std::span<double> grad);

/// Bank index of the template that drives the approximate gradient: the
/// positive template at argmax x for images of the filter's category, the
/// negative template otherwise. Throws StateError for an unassigned filter.
std::size_t target_template_index(std::span<const double> x, const TemplateBank& bank,
                                  int sample_category, std::optional<int> assigned_category);

enum class LikelihoodMode {
    dataset_mean,  // one p(x) per filter, averaged over maps
    per_sample,    // p(x) recomputed from each map
};

/// Running estimates for one interpretable filter.
struct InterpFilterState {
    std::vector<double> z_estimates;  // one Z_T per template, bank order
    double mean_px = 0.0;
    double lambda = 0.0;
    std::optional<int> assigned_category;
    double ema_rate = 0.1;
    bool initialized = false;
};

/// Seeds the partition estimates from a full warm-up pass:
/// exp_means[T] = mean over the pass of exp(tr(x . T)), reference_count = number
/// of maps Z_T should represent.
void initialize_running_stats(InterpFilterState& state, const TemplateBank& bank,
                              std::span<const double> exp_means, double reference_count);

/// z[T] <- (1 - rho) z[T] + rho * batch_mean(exp(tr(x.T))) * reference_count
/// mean_px <- sum_T p(T) batch_mean(exp(tr(x.T))) / z[T]
void update_running_stats(InterpFilterState& state, const TemplateBank& bank,
                          std::span<const double> batch_exp_means, double reference_count);

/// argmax_c of the mean total activation; ties go to the smallest category id.
int assign_target_category(const std::map<int, double>& mean_activation_by_category);

/// Online weight of the filter loss: coefficient * running mean of per-map
/// maximum activation. The first observation seeds the running mean; later
/// batches are blended with the EMA rate.
class LambdaSchedule {
public:
    static constexpr double kDefaultCoefficient = 5e-6;

    explicit LambdaSchedule(double coefficient = kDefaultCoefficient, double ema_rate = 0.1);

    void update(std::span<const double> batch_max_activations);
    double lambda() const { return coefficient_ * running_mean_; }
    double running_mean() const { return running_mean_; }
    bool initialized() const { return initialized_; }
    double coefficient() const { return coefficient_; }
    double ema_rate() const { return ema_rate_; }

    void restore(double running_mean, bool initialized);

private:
    double coefficient_;
    double ema_rate_;
    double running_mean_ = 0.0;
    bool initialized_ = false;
};

/// Writes the schedule's lambda into the filter state.
void update_lambda(InterpFilterState& state, LambdaSchedule& schedule,
                   std::span<const double> batch_max_activations);

/// lambda * grad_filter + grad_task. lambda == 0 returns grad_task unchanged.
std::vector<double> combined_gradient(std::span<const double> grad_task,
                                      std::span<const double> grad_filter, double lambda);
void combine_gradient_into(std::span<double> grad_task, std::span<const double> grad_filter,
                           double lambda);

}  // namespace interpconv
