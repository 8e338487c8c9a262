#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "interpconv/errors.hpp"
#include "interpconv/evaluation.hpp"
#include "interpconv/metrics.hpp"
#include "metric_oracles.hpp"

using namespace interpconv;
using namespace interpconv::metrics;
using interpconv::test_support::counted_iou;
using interpconv::test_support::raster_dilate;
using interpconv::test_support::sort_quantile;

namespace {

Mask block(int size, int r0, int c0, int h, int w) {
    Mask m(static_cast<std::size_t>(size * size), 0);
    for (int r = r0; r < r0 + h; ++r)
        for (int c = c0; c < c0 + w; ++c) m[static_cast<std::size_t>(r * size + c)] = 1;
    return m;
}

std::size_t area(const Mask& m) { return static_cast<std::size_t>(std::count(m.begin(), m.end(), 1)); }

}  // namespace

TEST(Threshold, MatchesSortOracleOnUniformValues) {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> v(1000);
    for (double& x : v) x = u(rng);
    const double t = activation_threshold(v);
    EXPECT_EQ(t, sort_quantile(v));
    auto sorted = v;
    std::sort(sorted.begin(), sorted.end());
    EXPECT_EQ(t, sorted[994]);
    EXPECT_EQ(std::count_if(v.begin(), v.end(), [t](double x) { return x > t; }), 5);
}

TEST(Threshold, ConstantMapsGiveEmptyRegion) {
    std::vector<double> map(64, 0.7);
    const double t = activation_threshold(map);
    EXPECT_EQ(t, 0.7);
    EXPECT_EQ(area(valid_region_rf(map, 8, t, 64)), 0u);
}

TEST(Threshold, SpikeSurvivesOnlyFromTwoHundredValues) {
    for (std::size_t n : {199u, 200u, 201u, 400u}) {
        std::vector<double> v(n, 0.0);
        v[n / 2] = 9.0;
        const double t = activation_threshold(v);
        EXPECT_EQ(9.0 > t, n >= 200) << n;
    }
    EXPECT_THROW(activation_threshold(std::vector<double>{}), InputError);
}

TEST(ValidRegion, EmptyAndSingleBlock) {
    std::vector<double> map(64, 0.0);
    EXPECT_EQ(area(valid_region_rf(map, 8, 0.5, 64)), 0u);
    map[2 * 8 + 5] = 1.0;
    EXPECT_EQ(valid_region_rf(map, 8, 0.5, 64), block(64, 16, 40, 8, 8));
}

TEST(ValidRegion, DilationMatchesRasterisedDisc) {
    std::vector<double> map(64, 0.0);
    map[3 * 8 + 3] = 1.0;
    const auto grown = valid_region_rf(map, 8, 0.5, 64, 4);
    const auto plain = valid_region_rf(map, 8, 0.5, 64, 0);
    EXPECT_EQ(grown, raster_dilate(plain, 64, 4));
    // square grown by 4 on each side with the corners cut by quarter discs of radius 4
    std::size_t quarter = 0;
    for (int dr = 1; dr <= 4; ++dr)
        for (int dc = 1; dc <= 4; ++dc) quarter += dr * dr + dc * dc <= 16;
    EXPECT_EQ(area(grown), 64u + 4u * 8u * 4u + 4u * quarter);
}

TEST(ValidRegion, NonDivisibleSizesPartitionThePlane) {
    for (int size : {13, 50, 64, 65}) {
        std::vector<double> map(49);
        std::iota(map.begin(), map.end(), 0.0);
        std::size_t total = 0;
        for (int cell = 0; cell < 49; ++cell) {
            total += area(valid_region_rf(map, 7, cell - 0.5, size)) - area(valid_region_rf(map, 7, cell + 0.5, size));
        }
        EXPECT_EQ(total, static_cast<std::size_t>(size * size)) << size;
    }
    EXPECT_THROW(valid_region_rf(std::vector<double>(10), 3, 0.0, 9), ShapeError);
}

TEST(Iou, HandCases) {
    const auto a = block(32, 0, 0, 8, 8);
    EXPECT_EQ(iou(a, a), 1.0);
    EXPECT_EQ(iou(a, block(32, 16, 16, 8, 8)), 0.0);
    EXPECT_DOUBLE_EQ(iou(a, block(32, 0, 4, 8, 8)), 1.0 / 3.0);
    const Mask empty(32 * 32, 0);
    EXPECT_EQ(iou(empty, empty), 0.0);
    EXPECT_THROW(iou(a, Mask(10, 0)), ShapeError);
}

TEST(Iou, SymmetricAndBoundedOnRandomMasks) {
    std::mt19937_64 rng(2);
    for (int t = 0; t < 100; ++t) {
        Mask a(400), b(400);
        for (auto& v : a) v = rng() % 3 == 0;
        for (auto& v : b) v = rng() % 5 == 0;
        const double x = iou(a, b);
        EXPECT_EQ(x, iou(b, a));
        EXPECT_GE(x, 0.0);
        EXPECT_LE(x, 1.0);
        EXPECT_NEAR(x, counted_iou(a, b), 1e-15);
    }
}

TEST(Interpretability, HandCounts) {
    EXPECT_EQ(part_interpretability({{1.0, 1.0, 1.0}, {0.0, 0.0, 0.0}}).p_f, 1.0);
    EXPECT_EQ(part_interpretability({{0.0, 0.0}, {0.0, 0.0}}).p_f, 0.0);
    const auto r = part_interpretability({{0.25, 0.1, 0.3, 0.0}, {0.1, 0.1}});
    EXPECT_EQ(r.per_part[0], 0.5);
    EXPECT_EQ(r.per_part[1], 0.0);
    EXPECT_EQ(r.p_f, 0.5);
    EXPECT_EQ(r.best_part, 0);
    // exactly at the association threshold does not count
    EXPECT_EQ(part_interpretability({{0.2}}).p_f, 0.0);
    const auto none = part_interpretability({{}, {}});
    EXPECT_EQ(none.p_f, 0.0);
    EXPECT_TRUE(std::isnan(none.per_part[0]));
}

TEST(Deviation, HandValues) {
    EXPECT_EQ(*location_deviation(std::vector<double>{0.2, 0.2, 0.2}), 0.0);
    EXPECT_NEAR(*location_deviation(std::vector<double>{0.1, 0.3}), 0.1, 1e-12);
    EXPECT_FALSE(location_deviation(std::vector<double>{0.4}).has_value());
    EXPECT_FALSE(location_deviation(std::vector<double>{}).has_value());
    EXPECT_NEAR(normalized_distance({0, 0}, {3, 4}, 64, 64), 5.0 / (64.0 * std::sqrt(2.0)), 1e-12);
    EXPECT_NEAR(normalized_distance({0, 0}, {3, 4}, 64, 64), 0.05524, 1e-5);
}

TEST(Location, BlockCentres) {
    const auto p = infer_part_location(GridIndex{1, 1}, 8, 64);
    EXPECT_EQ(p, (data::Point{4.0, 4.0}));
    std::vector<double> uniform(64, 1.0);
    EXPECT_EQ(infer_part_location(uniform, 8, 64), p);
    std::vector<double> onehot(49, 0.0);
    onehot[3 * 7 + 3] = 2.0;
    const auto c = infer_part_location(onehot, 7, 56);
    EXPECT_EQ(c, (data::Point{28.0, 28.0}));
}

TEST(SelectTop, OrdersByScoreThenIndex) {
    const std::vector<double> s{0.5, 0.9, 0.5, 0.9, 0.1};
    EXPECT_EQ(select_top(s, 3), (std::vector<std::size_t>{1, 3, 0}));
    EXPECT_EQ(select_top(s, 10).size(), 5u);
}

TEST(Instability, HandTables) {
    using Row = std::vector<std::optional<double>>;
    EXPECT_EQ(*location_instability({Row{0.3}}), 0.3);
    EXPECT_EQ(*location_instability({Row{0.0, 0.0}, Row{0.0, 0.0}}), 0.0);
    EXPECT_NEAR(*location_instability({Row{0.1, 0.3}, Row{0.2, 0.6}}), (0.2 + 0.4) / 2, 1e-15);
    // missing entries are skipped, not treated as zero
    EXPECT_NEAR(*location_instability({Row{0.1, std::nullopt}, Row{std::nullopt, std::nullopt}}), 0.1, 1e-15);
    EXPECT_FALSE(location_instability({Row{std::nullopt}}).has_value());

    using Table = std::vector<Row>;
    EXPECT_NEAR(*multi_category_instability({Table{Row{0.1, 0.3}}}), 0.2, 1e-15);
    EXPECT_NEAR(*multi_category_instability({Table{Row{0.1, 0.3}, Row{0.5, 0.7}}}), 0.2, 1e-15);
    EXPECT_NEAR(*multi_category_instability({Table{Row{0.1, 0.3}, Row{0.05, 0.15}},
                                             Table{Row{0.4, 0.4}, Row{0.6, 0.2}}}),
                (0.1 + 0.4) / 2, 1e-15);
}

TEST(Heatmap, ZeroOneHotAndAdditive) {
    const int n = 4, size = 16;
    std::vector<std::vector<std::vector<double>>> zero{{std::vector<double>(16, 0.0)}};
    const auto z = part_distribution_heatmap(zero, n, size);
    EXPECT_TRUE(std::all_of(z.begin(), z.end(), [](double v) { return v == 0.0; }));

    std::vector<double> one(16, 0.0);
    one[5] = 3.0;
    const auto h1 = part_distribution_heatmap({{one}}, n, size);
    for (int r = 0; r < size; ++r)
        for (int c = 0; c < size; ++c)
            EXPECT_EQ(h1[static_cast<std::size_t>(r * size + c)], (r / 4 == 1 && c / 4 == 1) ? 1.0 : 0.0);

    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<std::vector<std::vector<double>>> maps(3, std::vector<std::vector<double>>(2, std::vector<double>(16)));
    for (auto& image : maps)
        for (auto& m : image)
            for (double& v : m) v = u(rng);
    std::vector<double> oracle(static_cast<std::size_t>(size * size), 0.0);
    for (int r = 0; r < size; ++r)
        for (int c = 0; c < size; ++c)
            for (const auto& image : maps)
                for (const auto& m : image) oracle[static_cast<std::size_t>(r * size + c)] += m[(r / 4) * 4 + c / 4];
    const double peak = *std::max_element(oracle.begin(), oracle.end());
    const auto h = part_distribution_heatmap(maps, n, size);
    for (std::size_t k = 0; k < h.size(); ++k) EXPECT_NEAR(h[k], oracle[k] / peak, 1e-12);
}

TEST(Oracles, RandomisedBattery) {
    const auto tally = test_support::metric_oracle_battery(5, 200, 1e-12);
    EXPECT_EQ(tally.mismatches, 0) << "max error " << tally.max_error;
    EXPECT_GE(tally.cases, 1000);
}

namespace {

struct Fixture {
    data::Dataset dataset;
    LayerMaps maps;
};

Fixture random_fixture(unsigned seed, int n = 4) {
    Fixture fx;
    auto specs = data::default_benchmark(32);
    specs.resize(2);
    fx.dataset = data::generate_dataset(specs, 12, 32, seed);
    fx.maps.n = n;
    fx.maps.filters = 5;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (std::size_t k = 0; k < fx.dataset.samples.size(); ++k) {
        std::vector<double> m(static_cast<std::size_t>(5 * n * n));
        for (double& v : m) v = u(rng) < 0.4 ? 0.0 : u(rng);
        fx.maps.maps.push_back(m);
        fx.maps.predictions.push_back(fx.dataset.samples[k].label);
    }
    return fx;
}

}  // namespace

TEST(Evaluate, InvariantToPositiveRescaling) {
    const auto fx = random_fixture(6);
    EvalConfig cfg;
    cfg.top_n = 8;
    const auto base = evaluate_maps(fx.maps, fx.dataset, cfg);
    for (double scale : {2.0, 0.37, 1e3}) {
        auto scaled = fx.maps;
        for (auto& m : scaled.maps)
            for (double& v : m) v *= scale;
        const auto r = evaluate_maps(scaled, fx.dataset, cfg);
        EXPECT_EQ(r.mean_interpretability, base.mean_interpretability) << scale;
        ASSERT_TRUE(r.location_instability && base.location_instability);
        EXPECT_NEAR(*r.location_instability, *base.location_instability, 1e-12) << scale;
        for (int f = 0; f < 5; ++f) {
            EXPECT_EQ(r.filters[f].assigned_category, base.filters[f].assigned_category);
            EXPECT_NEAR(r.filters[f].threshold, base.filters[f].threshold * scale, 1e-12 * scale);
        }
    }
}

TEST(Evaluate, DeterministicAndWellFormed) {
    const auto fx = random_fixture(7);
    const EvalConfig cfg;
    const auto a = to_json(evaluate_maps(fx.maps, fx.dataset, cfg));
    const auto b = to_json(evaluate_maps(fx.maps, fx.dataset, cfg));
    EXPECT_EQ(a.dump(), b.dump());
    const auto r = evaluate_maps(fx.maps, fx.dataset, cfg);
    EXPECT_EQ(r.accuracy, 1.0);
    for (const auto& f : r.filters) {
        EXPECT_GE(f.interpretability.p_f, 0.0);
        EXPECT_LE(f.interpretability.p_f, 1.0);
        for (const auto& d : f.deviation)
            if (d) EXPECT_GE(*d, 0.0);
    }
}

TEST(Evaluate, TorsoDetectorIsAssignedTheTorso) {
    // a filter that fires only on the cell holding the torso centroid; the
    // quantile threshold keeps the strongest few images
    auto fx = random_fixture(8, 8);
    const int n = fx.maps.n, size = fx.dataset.image_size;
    for (std::size_t k = 0; k < fx.dataset.samples.size(); ++k) {
        std::fill(fx.maps.maps[k].begin(), fx.maps.maps[k].end(), 0.0);
        const auto& p = fx.dataset.samples[k].landmarks[1];
        const int i = static_cast<int>(p.y) * n / size, j = static_cast<int>(p.x) * n / size;
        fx.maps.maps[k][static_cast<std::size_t>(i * n + j)] = 1.0 + static_cast<double>(k);
    }
    const auto r = evaluate_maps(fx.maps, fx.dataset, EvalConfig{});
    const auto& f0 = r.filters[0];
    EXPECT_EQ(f0.interpretability.best_part, 1);
    EXPECT_GT(f0.interpretability.p_f, 0.0);
    ASSERT_TRUE(f0.deviation[1].has_value());
    EXPECT_LT(*f0.deviation[1], 0.125);
    EXPECT_TRUE(r.filters[1].silent);
    EXPECT_EQ(r.filters[1].interpretability.p_f, 0.0);
}
