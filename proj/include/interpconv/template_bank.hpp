#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include "interpconv/aligned.hpp"

namespace interpconv {

/// Position of a unit in an n x n grid. Both coordinates are 1-based.
struct GridIndex {
    int row = 1;
    int col = 1;

    friend bool operator==(const GridIndex&, const GridIndex&) = default;
};

/// Row-major offset (0-based) of a 1-based grid index.
constexpr std::size_t flat_index(GridIndex mu, int n) {
    return static_cast<std::size_t>(mu.row - 1) * static_cast<std::size_t>(n) +
           static_cast<std::size_t>(mu.col - 1);
}

constexpr GridIndex grid_index(std::size_t flat, int n) {
    return {static_cast<int>(flat / static_cast<std::size_t>(n)) + 1,
            static_cast<int>(flat % static_cast<std::size_t>(n)) + 1};
}

/// An n x n part template. Positive templates peak at `peak()` with value tau
/// and fall off linearly with L1 distance; the negative template is a constant -tau.
class Template {
public:
    enum class Kind { positive, negative };

    Template(Kind kind, GridIndex peak, int n, std::vector<double> values);

    Kind kind() const { return kind_; }
    bool is_negative() const { return kind_ == Kind::negative; }
    /// Peak of a positive template. Meaningless for the negative template.
    GridIndex peak() const { return peak_; }
    int size() const { return n_; }

    /// 1-based access.
    double at(int row, int col) const { return values_[flat_index({row, col}, n_)]; }
    std::span<const double> values() const { return values_; }

private:
    Kind kind_;
    GridIndex peak_;
    int n_;
    std::vector<double> values_;
};

/// t_ij = tau * max(1 - beta * |[i,j] - mu|_1 / n, -1)
Template build_positive_template(GridIndex mu, int n, double tau, double beta);

Template build_negative_template(int n, double tau);

/// sum_ij x_ij * t_ij
double trace_product(std::span<const double> x, const Template& t);

struct BankParams {
    int n = 1;
    double tau = 0.0;
    double beta = 0.0;
    double alpha = 0.0;

    /// tau = 0.5 / n^2, alpha = n^2 / (1 + n^2), beta = 4.
    static BankParams defaults(int n);

    friend bool operator==(const BankParams&, const BankParams&) = default;
};

/// The n^2 positive templates in row-major peak order followed by the negative
/// template, with prior p(T_mu) = alpha / n^2 and p(T-) = 1 - alpha.
class TemplateBank {
public:
    explicit TemplateBank(const BankParams& params);

    /// Shared, immutable bank for the given parameters. Built once per distinct
    /// parameter set.
    static std::shared_ptr<const TemplateBank> cached(const BankParams& params);

    const BankParams& params() const { return params_; }
    int n() const { return params_.n; }
    double tau() const { return params_.tau; }

    /// n^2 + 1
    std::size_t size() const { return templates_.size(); }
    std::size_t positive_count() const { return templates_.size() - 1; }
    std::size_t negative_index() const { return templates_.size() - 1; }
    std::size_t index_of(GridIndex mu) const { return flat_index(mu, params_.n); }

    const Template& at(std::size_t k) const { return templates_[k]; }
    const Template& positive(GridIndex mu) const { return templates_[index_of(mu)]; }
    const Template& negative() const { return templates_.back(); }
    const std::vector<Template>& templates() const { return templates_; }

    double prior(std::size_t k) const { return priors_[k]; }
    std::span<const double> priors() const { return priors_; }

    /// tr(x . T) for every template, in bank order.
    std::vector<double> traces(std::span<const double> x) const;
    void traces(std::span<const double> x, std::span<double> out) const;
    /// Traces for `count` maps stored back to back; out is [map][template].
    void traces_many(std::span<const double> maps, std::size_t count, std::span<double> out) const;

private:
    BankParams params_;
    std::vector<Template> templates_;
    std::vector<double> priors_;
    // (n^2 + 1) x n^2, row-major copy of all template values for batched traces.
    AlignedBuffer stacked_;
};

}  // namespace interpconv
