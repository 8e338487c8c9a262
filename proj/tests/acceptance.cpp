// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.
// Pass criterion numbers as arguments to run a subset, e.g. `acceptance 1 2 7`.

#include <array>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include "interpconv/commands.hpp"
#include "interpconv/config.hpp"
#include "interpconv/interp_layer.hpp"
#include "interpconv/nn/interp_conv.hpp"
#include "interpconv/nn/layers.hpp"
#include "interpconv/nn/losses.hpp"
#include "interpconv/nn/network.hpp"
#include "interpconv/nn/trainer.hpp"
#include "interpconv/synth_data.hpp"
#include "metric_oracles.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace interpconv;
using namespace interpconv::test_support;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* pattern, double a, double b = 0.0, double c = 0.0, double d = 0.0) {
    char buf[256];
    std::snprintf(buf, sizeof buf, pattern, a, b, c, d);
    return buf;
}

nn::Tensor random_tensor(std::vector<std::size_t> shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
    nn::Tensor t(std::move(shape));
    const auto v = uniform_vector(rng, t.size(), lo, hi);
    std::copy(v.begin(), v.end(), t.data());
    return t;
}

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
    return s;
}

// ---------------------------------------------------------------------------

Outcome gradient_check() {
    const auto start = Clock::now();
    std::mt19937_64 rng(101);
    double worst = 0.0;
    int instances = 0;
    for (int trial = 0; trial < 150; ++trial) {
        const int n = std::array{3, 5, 7}[trial % 3];
        const auto bank = random_bank(rng, n);
        const std::size_t count = 2 + rng() % 15;
        std::vector<FeatureMap> maps;
        for (std::size_t s = 0; s < count; ++s) maps.push_back(random_map(rng, bank));
        const auto z = exact_partition(maps, bank);
        const auto& x = maps[rng() % count];
        const double px = likelihood_given_partition(x.values(), bank, z);
        const auto g = filter_loss_grad_exact(x.values(), bank, z, px);
        const auto fd = central_difference(
            [&](std::span<const double> p) { return surrogate_loss(p, bank, z); }, x.values(), 1e-5);
        worst = std::max(worst, relative_error(g, fd));
        ++instances;
    }
    const double t = seconds_since(start);
    return {worst <= 1e-6 && t < 10.0 && instances >= 100,
            fmt("%.0f instances, max rel err %.3g (tol 1e-6), %.2f s (limit 10 s)", instances, worst, t)};
}

Outcome decomposition_identity() {
    std::mt19937_64 rng(202);
    double worst = 0.0;
    int banks = 0;
    for (int trial = 0; trial < 80; ++trial) {
        const int n = 2 + trial % 7;
        const auto bank = random_bank(rng, n);
        const std::size_t count = 1 + rng() % 32;
        std::vector<FeatureMap> maps;
        for (std::size_t s = 0; s < count; ++s) maps.push_back(random_map(rng, bank));
        const auto d = filter_loss_decomposed(maps, bank);
        worst = std::max(worst, std::abs(d.total - filter_loss_exact(maps, bank)));
        worst = std::max(worst, std::abs(d.total - (-d.prior_entropy + d.inter_category_entropy + d.spatial_entropy_term)));
        ++banks;
    }
    return {worst <= 1e-9 && banks >= 50, fmt("%.0f banks, max |diff| %.3g (tol 1e-9)", banks, worst)};
}

Outcome approximation_validity() {
    std::mt19937_64 rng(303);
    double worst = 0.0;
    double weakest_dominance = std::numeric_limits<double>::infinity();
    int instances = 0;
    for (int n : {3, 5, 7}) {
        TemplateBank bank(BankParams::defaults(n));
        for (int trial = 0; trial < 30; ++trial) {
            const std::size_t hot = rng() % bank.positive_count();
            const auto& t = bank.at(hot);
            std::vector<double> shape(bank.positive_count());
            for (std::size_t c = 0; c < shape.size(); ++c) shape[c] = std::max(t.values()[c], 0.0) / bank.tau();
            double strength = 1.0;
            std::vector<double> x;
            double margin = 0.0;
            for (;; strength *= 1.05) {
                x = shape;
                for (auto& v : x) v *= strength;
                const auto tr = bank.traces(x);
                double other = -std::numeric_limits<double>::infinity();
                for (std::size_t k = 0; k < bank.size(); ++k)
                    if (k != hot) other = std::max(other, tr[k]);
                margin = tr[hot] - other;
                if (margin >= std::log(1e3)) break;
            }
            weakest_dominance = std::min(weakest_dominance, std::exp(margin));
            // partition values from a balanced set: one comparable map per position plus silent maps
            std::vector<FeatureMap> reference;
            for (std::size_t m = 0; m < bank.positive_count(); ++m) {
                std::vector<double> v(bank.positive_count());
                const double jitter = std::uniform_real_distribution<double>(0.9, 1.1)(rng);
                for (std::size_t c = 0; c < v.size(); ++c)
                    v[c] = std::max(bank.at(m).values()[c], 0.0) / bank.tau() * strength * jitter;
                reference.emplace_back(n, std::move(v));
            }
            for (int s = 0; s < 3; ++s) reference.push_back(FeatureMap::zeros(n));
            const auto z = exact_partition(reference, bank);
            const double px = likelihood_given_partition(x, bank, z);
            const auto exact = filter_loss_grad_exact(x, bank, z, px);
            const auto approx = filter_loss_grad_approx(x, t, bank, z[hot], px);
            std::vector<double> diff(exact.size());
            for (std::size_t k = 0; k < diff.size(); ++k) diff[k] = exact[k] - approx[k];
            worst = std::max(worst, frobenius(diff) / frobenius(exact));
            ++instances;
        }
    }
    return {worst <= 0.05, fmt("%.0f instances, dominance >= %.4g, max rel Frobenius err %.4f (tol 0.05)", instances,
                               weakest_dominance, worst)};
}

Outcome backward_checks() {
    constexpr double kStep = 1e-6;
    std::mt19937_64 rng(404);
    double worst = 0.0;
    int checks = 0;
    auto record = [&](std::span<const double> analytic, std::span<const double> numeric) {
        worst = std::max(worst, relative_error(analytic, numeric));
        ++checks;
    };

    for (int trial = 0; trial < 6; ++trial) {
        const int stride = 1 + trial % 2, pad = trial % 3;
        const auto in = random_tensor({2, 6, 5}, rng);
        const auto w = random_tensor({3, 2, 3, 3}, rng);
        const auto b = random_tensor({3}, rng);
        const auto g = random_tensor(nn::conv2d_forward(in, w, b, stride, pad).shape(), rng);
        const auto grads = nn::conv2d_backward(in, w, g, stride, pad);
        auto f_in = [&](std::span<const double> x) {
            return dot(nn::conv2d_forward(nn::Tensor(in.shape(), {x.begin(), x.end()}), w, b, stride, pad).values(), g.values());
        };
        auto f_w = [&](std::span<const double> x) {
            return dot(nn::conv2d_forward(in, nn::Tensor(w.shape(), {x.begin(), x.end()}), b, stride, pad).values(), g.values());
        };
        auto f_b = [&](std::span<const double> x) {
            return dot(nn::conv2d_forward(in, w, nn::Tensor(b.shape(), {x.begin(), x.end()}), stride, pad).values(), g.values());
        };
        record(grads.input.values(), central_difference(f_in, in.values(), kStep));
        record(grads.kernels.values(), central_difference(f_w, w.values(), kStep));
        record(grads.bias.values(), central_difference(f_b, b.values(), kStep));
    }

    {
        auto in = random_tensor({2, 4, 4}, rng);
        for (auto& v : in.values())
            if (std::abs(v) < 1e-3) v = 0.5;
        const auto g = random_tensor(in.shape(), rng);
        auto f = [&](std::span<const double> x) {
            return dot(nn::relu_forward(nn::Tensor(in.shape(), {x.begin(), x.end()})).values(), g.values());
        };
        record(nn::relu_backward(in, g).values(), central_difference(f, in.values(), kStep));
    }

    {
        const auto in = random_tensor({3, 6, 4}, rng);
        const auto r = nn::maxpool_forward(in, 2);
        const auto g = random_tensor(r.output.shape(), rng);
        auto f = [&](std::span<const double> x) {
            return dot(nn::maxpool_forward(nn::Tensor(in.shape(), {x.begin(), x.end()}), 2).output.values(), g.values());
        };
        record(nn::maxpool_backward(in.shape(), r.argmax, g).values(), central_difference(f, in.values(), kStep));
    }

    {
        const auto in = random_tensor({2, 3, 3}, rng);
        const auto w = random_tensor({5, 18}, rng);
        const auto b = random_tensor({5}, rng);
        const auto g = random_tensor({5, 1, 1}, rng);
        const auto grads = nn::fc_backward(in, w, g);
        auto f_in = [&](std::span<const double> x) {
            return dot(nn::fc_forward(nn::Tensor(in.shape(), {x.begin(), x.end()}), w, b).values(), g.values());
        };
        auto f_w = [&](std::span<const double> x) {
            return dot(nn::fc_forward(in, nn::Tensor(w.shape(), {x.begin(), x.end()}), b).values(), g.values());
        };
        auto f_b = [&](std::span<const double> x) {
            return dot(nn::fc_forward(in, w, nn::Tensor(b.shape(), {x.begin(), x.end()})).values(), g.values());
        };
        record(grads.input.values(), central_difference(f_in, in.values(), kStep));
        record(grads.weights.values(), central_difference(f_w, w.values(), kStep));
        record(grads.bias.values(), central_difference(f_b, b.values(), kStep));
    }

    for (int trial = 0; trial < 10; ++trial) {
        const auto s = uniform_vector(rng, 4, -3.0, 3.0);
        const int label = trial % 4;
        record(nn::softmax_log_loss(s, label).grad,
               central_difference([&](std::span<const double> x) { return nn::softmax_log_loss(x, label).loss; }, s, kStep));
        record(nn::multi_logistic_log_loss(s, label).grad,
               central_difference([&](std::span<const double> x) { return nn::multi_logistic_log_loss(x, label).loss; }, s,
                                  kStep));
        const int y = trial % 2 ? 1 : -1;
        const std::vector<double> one{s[0]};
        record(nn::logistic_log_loss(s[0], y).grad,
               central_difference([&](std::span<const double> x) { return nn::logistic_log_loss(x[0], y).loss; }, one, kStep));
    }

    for (bool interpretable : {false, true}) {
        for (int trial = 0; trial < 3; ++trial) {
            nn::InterpConvLayer layer({2, 6, 6}, 3, std::nullopt, interpretable, rng, interpretable ? 9.0 : 1.0);
            const auto in = random_tensor({2, 6, 6}, rng);
            const nn::PassContext ctx;
            const auto out = layer.forward(in, ctx);
            const auto g = random_tensor(out.shape(), rng);
            for (auto* p : layer.params()) p->grad.fill(0.0);
            const auto gi = layer.backward(g, ctx);
            nn::InterpConvLayer probe = layer;
            auto f_in = [&](std::span<const double> x) {
                return dot(probe.forward(nn::Tensor(in.shape(), {x.begin(), x.end()}), ctx).values(), g.values());
            };
            record(gi.values(), central_difference(f_in, in.values(), kStep));
            auto& w = probe.params()[0]->value;
            const nn::Tensor w0 = w;
            auto f_w = [&](std::span<const double> x) {
                std::copy(x.begin(), x.end(), w.data());
                const double v = dot(probe.forward(in, ctx).values(), g.values());
                w = w0;
                return v;
            };
            record(layer.params()[0]->grad.values(), central_difference(f_w, w0.values(), kStep));
        }
    }

    for (bool interpretable : {false, true}) {
        nn::NetworkConfig c;
        c.layers = nn::parse_layers("conv:3:3:1:1, relu, pool:2, interp:4, relu, fc");
        c.input = {1, 8, 8};
        c.categories = 2;
        c.interpretable = interpretable;
        nn::Network net(c, 3);
        const auto input = random_tensor({1, 8, 8}, rng, 0.0, 1.0);
        const nn::PassContext ctx{1, false};
        const auto scores = net.forward(input, ctx);
        const auto loss = net.loss(scores, 1);
        for (auto* p : net.params()) p->grad.fill(0.0);
        net.backward(nn::Tensor(scores.shape(), loss.grad), ctx);
        for (auto [name, p] : net.named_params()) {
            const nn::Tensor saved = p->value;
            auto f = [&](std::span<const double> x) {
                std::copy(x.begin(), x.end(), p->value.data());
                const double v = net.loss(net.forward(input, ctx), 1).loss;
                p->value = saved;
                return v;
            };
            record(p->grad.values(), central_difference(f, saved.values(), kStep));
        }
    }
    return {worst <= 1e-6, fmt("%.0f gradient checks (conv, relu, pool, fc, losses, interp layer, network), "
                               "max rel err %.3g (tol 1e-6)",
                               checks, worst)};
}

Outcome zero_lambda_equivalence() {
    KeyValues kv{{"seed", "5"}, {"train.lambda_coef", "0"}, {"train.epochs", "2"}};
    const auto config = resolve_run_config(kv);
    const auto set = to_labeled_set(data::generate_dataset(data::default_benchmark(64), 50, 64, 5));

    // ordinary pipeline: every interp layer written as a plain 3x3 conv + relu
    nn::NetworkConfig plain = config.network;
    plain.layers.clear();
    for (const auto& l : nn::NetworkConfig::reference_layers()) {
        if (l.type == nn::LayerType::interp) {
            plain.layers.push_back({nn::LayerType::conv, l.channels, 3, 1, 1});
            plain.layers.push_back({nn::LayerType::relu});
        } else {
            plain.layers.push_back(l);
        }
    }
    plain.interpretable = false;
    nn::Network ordinary(plain, config.seed);
    nn::TrainConfig tc = config.train;
    tc.filter.lambda_coefficient = 0.0;
    nn::Trainer trainer(ordinary, tc);
    std::vector<double> plain_losses;
    for (int e = 0; e < tc.epochs; ++e) plain_losses.push_back(trainer.train_epoch(set).task_loss);

    auto outcome = cli::train_model(config, set);
    std::vector<double> losses;
    for (const auto& s : outcome.epochs) losses.push_back(s.task_loss);

    auto flatten = [](nn::Network& net) {
        std::vector<double> w;
        for (auto* p : net.params()) w.insert(w.end(), p->value.values().begin(), p->value.values().end());
        return w;
    };
    const auto a = flatten(outcome.network), b = flatten(ordinary);
    const bool same = losses == plain_losses && a == b && !a.empty();
    return {same, fmt("reference architecture, %.0f epochs, %.0f weights", tc.epochs, static_cast<double>(a.size())) +
                      ", loss sequence " + (losses == plain_losses ? "identical" : "differs") + ", weights " +
                      (a == b ? "identical" : "differ")};
}

Outcome directional_replication() {
    const auto start = Clock::now();
    int wins_both = 0;
    bool accuracy_ok = true;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const auto seed_start = Clock::now();
        const auto config = resolve_run_config({{"seed", std::to_string(seed)}});
        auto specs = data::default_benchmark(config.data.image_size);
        const auto train = data::generate_dataset(specs, config.data.train_per_category, config.data.image_size,
                                                  config.data.seed, 0);
        const auto test = data::generate_dataset(specs, config.data.test_per_category, config.data.image_size,
                                                 config.data.seed, 1);
        const auto interp = cli::run_arm(config, train, test);
        const auto base = cli::run_arm(cli::baseline_config(config), train, test);
        const double di = interp.report.location_instability.value_or(std::numeric_limits<double>::quiet_NaN());
        const double db = base.report.location_instability.value_or(std::numeric_limits<double>::quiet_NaN());
        const double pi = interp.report.mean_interpretability, pb = base.report.mean_interpretability;
        const double ai = interp.report.accuracy, ab = base.report.accuracy;
        const bool win = di < db && pi > pb;
        const bool acc = std::abs(ai - ab) <= 0.05;
        wins_both += win;
        accuracy_ok = accuracy_ok && acc;
        std::printf("  seed %d: D %.4f vs %.4f, P %.4f vs %.4f, acc %.3f vs %.3f%s (%.0f s)\n", static_cast<int>(seed), di,
                    db, pi, pb, ai, ab, win ? "" : "  [no win]", seconds_since(seed_start));
        std::fflush(stdout);
    }
    const double minutes = seconds_since(start) / 60.0;
    return {wins_both >= 4 && accuracy_ok && minutes <= 30.0,
            fmt("interpretable lower D and higher P in %.0f/5 seeds (need 4), %.1f min (limit 30)", wins_both, minutes) +
                ", accuracy within 5 points in every seed: " + (accuracy_ok ? "yes" : "no")};
}

Outcome metric_oracles() {
    const auto tally = metric_oracle_battery(707, 400, 1e-12);
    return {tally.mismatches == 0 && tally.cases > 0,
            fmt("%.0f comparisons (threshold, region, iou, deviation, distance), %.0f mismatches, max err %.3g (tol 1e-12)",
                tally.cases, tally.mismatches, tally.max_error)};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Outcome determinism() {
    const auto root = fs::temp_directory_path() / "interpconv_acceptance_determinism";
    fs::remove_all(root);
    KeyValues kv{{"seed", "8"},
                 {"output", (root / "out").string()},
                 {"data.path", (root / "data").string()},
                 {"data.train_per_category", "20"},
                 {"data.test_per_category", "10"},
                 {"train.epochs", "3"},
                 {"train.batch", "8"}};
    const auto config = resolve_run_config(kv);
    cli::cmd_gen_data(config);
    cli::cmd_train(config);
    const auto model = slurp(config.checkpoint_path());
    cli::cmd_eval(config);
    const auto report = slurp(config.output / "report.json");
    fs::remove_all(config.output);
    cli::cmd_train(config);
    cli::cmd_eval(config);
    const bool same_model = !model.empty() && slurp(config.checkpoint_path()) == model;
    const bool same_report = !report.empty() && slurp(config.output / "report.json") == report;
    fs::remove_all(root);
    return {same_model && same_report,
            std::string("checkpoint ") + std::to_string(model.size()) + " bytes " +
                (same_model ? "identical" : "differs") + ", report " + (same_report ? "identical" : "differs")};
}

}  // namespace

int main(int argc, char** argv) {
    struct Criterion {
        int id;
        const char* name;
        std::function<Outcome()> run;
    };
    const std::vector<Criterion> criteria = {
        {1, "filter-loss gradient vs finite differences", gradient_check},
        {2, "entropy decomposition identity", decomposition_identity},
        {3, "approximate gradient on dominant-template maps", approximation_validity},
        {4, "layer backward passes vs finite differences", backward_checks},
        {5, "lambda 0 matches the ordinary CNN bit for bit", zero_lambda_equivalence},
        {6, "directional replication on the synthetic benchmark", directional_replication},
        {7, "metric primitives vs brute-force oracles", metric_oracles},
        {8, "train and eval reruns are byte-identical", determinism},
    };
    std::set<int> selected;
    for (int k = 1; k < argc; ++k) selected.insert(std::atoi(argv[k]));

    int failures = 0;
    for (const auto& c : criteria) {
        if (!selected.empty() && !selected.count(c.id)) continue;
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failures += !o.pass;
        std::printf("%s [%d] %s: %s\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str());
        std::fflush(stdout);
    }
    return failures == 0 ? 0 : 1;
}
