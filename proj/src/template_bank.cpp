#include "interpconv/template_bank.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <map>
#include <mutex>
#include <string>
#include <tuple>

#include "interpconv/errors.hpp"

namespace interpconv {

namespace {

void check_positive(double value, const char* name) {
    if (!(value > 0.0) || !std::isfinite(value)) {
        throw ParameterError(std::string(name) + " must be a positive finite number, got " +
                             std::to_string(value));
    }
}

void check_grid_size(int n) {
    if (n < 1) {
        throw ParameterError("grid size must be >= 1, got " + std::to_string(n));
    }
}

}  // namespace

Template::Template(Kind kind, GridIndex peak, int n, std::vector<double> values)
    : kind_(kind), peak_(peak), n_(n), values_(std::move(values)) {
    if (values_.size() != static_cast<std::size_t>(n) * static_cast<std::size_t>(n)) {
        throw ShapeError("template value count does not match n*n");
    }
}

Template build_positive_template(GridIndex mu, int n, double tau, double beta) {
    check_grid_size(n);
    check_positive(tau, "tau");
    check_positive(beta, "beta");
    if (mu.row < 1 || mu.row > n || mu.col < 1 || mu.col > n) {
        throw ParameterError("template peak [" + std::to_string(mu.row) + "," +
                             std::to_string(mu.col) + "] outside 1.." + std::to_string(n));
    }
    std::vector<double> values(static_cast<std::size_t>(n) * n);
    for (int i = 1; i <= n; ++i) {
        for (int j = 1; j <= n; ++j) {
            const double dist = std::abs(i - mu.row) + std::abs(j - mu.col);
            values[flat_index({i, j}, n)] = tau * std::max(1.0 - beta * dist / n, -1.0);
        }
    }
    return Template(Template::Kind::positive, mu, n, std::move(values));
}

Template build_negative_template(int n, double tau) {
    check_grid_size(n);
    check_positive(tau, "tau");
    return Template(Template::Kind::negative, {1, 1}, n,
                    std::vector<double>(static_cast<std::size_t>(n) * n, -tau));
}

double trace_product(std::span<const double> x, const Template& t) {
    const auto tv = t.values();
    if (x.size() != tv.size()) {
        throw ShapeError("trace_product: feature map has " + std::to_string(x.size()) +
                         " entries, template has " + std::to_string(tv.size()));
    }
    double sum = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) sum += x[k] * tv[k];
    return sum;
}

BankParams BankParams::defaults(int n) {
    check_grid_size(n);
    const double n2 = static_cast<double>(n) * n;
    return {n, 0.5 / n2, 4.0, n2 / (1.0 + n2)};
}

TemplateBank::TemplateBank(const BankParams& params) : params_(params) {
    check_grid_size(params.n);
    check_positive(params.tau, "tau");
    check_positive(params.beta, "beta");
    if (!(params.alpha > 0.0 && params.alpha < 1.0)) {
        throw ParameterError("alpha must lie in (0,1), got " + std::to_string(params.alpha));
    }
    const int n = params.n;
    const std::size_t cells = static_cast<std::size_t>(n) * n;
    templates_.reserve(cells + 1);
    for (std::size_t k = 0; k < cells; ++k) {
        templates_.push_back(build_positive_template(grid_index(k, n), n, params.tau, params.beta));
    }
    templates_.push_back(build_negative_template(n, params.tau));

    priors_.assign(cells, params.alpha / static_cast<double>(cells));
    priors_.push_back(1.0 - params.alpha);

    stacked_.reserve((cells + 1) * cells);
    for (const auto& t : templates_) {
        stacked_.insert(stacked_.end(), t.values().begin(), t.values().end());
    }
}

std::shared_ptr<const TemplateBank> TemplateBank::cached(const BankParams& params) {
    using Key = std::tuple<int, double, double, double>;
    static std::mutex mutex;
    static std::map<Key, std::shared_ptr<const TemplateBank>> cache;

    const Key key{params.n, params.tau, params.beta, params.alpha};
    std::lock_guard lock(mutex);
    auto it = cache.find(key);
    if (it == cache.end()) {
        it = cache.emplace(key, std::make_shared<const TemplateBank>(params)).first;
    }
    return it->second;
}

std::vector<double> TemplateBank::traces(std::span<const double> x) const {
    std::vector<double> out(size());
    traces(x, out);
    return out;
}

void TemplateBank::traces(std::span<const double> x, std::span<double> out) const {
    const std::size_t cells = positive_count();
    if (x.size() != cells || out.size() != size()) {
        throw ShapeError("TemplateBank::traces: expected a " + std::to_string(params_.n) + "x" +
                         std::to_string(params_.n) + " map");
    }
    using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    Eigen::Map<const RowMat> stacked(stacked_.data(), static_cast<Eigen::Index>(size()),
                                     static_cast<Eigen::Index>(cells));
    Eigen::Map<const Eigen::VectorXd> xv(x.data(), static_cast<Eigen::Index>(cells));
    Eigen::Map<Eigen::VectorXd> ov(out.data(), static_cast<Eigen::Index>(size()));
    ov.noalias() = stacked * xv;
}

void TemplateBank::traces_many(std::span<const double> maps, std::size_t count,
                               std::span<double> out) const {
    const std::size_t cells = positive_count();
    if (maps.size() != count * cells || out.size() != count * size()) {
        throw ShapeError("TemplateBank::traces_many: buffer sizes do not match");
    }
    using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    Eigen::Map<const RowMat> stacked(stacked_.data(), static_cast<Eigen::Index>(size()),
                                     static_cast<Eigen::Index>(cells));
    Eigen::Map<const RowMat> x(maps.data(), static_cast<Eigen::Index>(count),
                               static_cast<Eigen::Index>(cells));
    Eigen::Map<RowMat> o(out.data(), static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(size()));
    o.noalias() = x * stacked.transpose();
}

}  // namespace interpconv
