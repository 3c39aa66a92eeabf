#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "halotouch/gbrt.hpp"

using namespace halotouch;
using gbrt::GbrtConfig;
using gbrt::TrainingSet;

namespace {

// Smooth 4-feature target in the corrector's feature layout.
double smooth_fn(const std::vector<double>& r) {
    return 100.0 + 0.5 * r[0] - 0.3 * r[1] + 2.0 * std::sin(r[2] / 20.0) +
           0.8 * std::cos(r[3] / 30.0) + 0.01 * r[0] * r[3];
}

TrainingSet smooth_set(size_t n, uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> x(-100.0, 100.0);
    std::uniform_real_distribution<double> pitch(30.0, 60.0);
    std::uniform_real_distribution<double> yaw(-45.0, 45.0);
    TrainingSet set;
    for (size_t i = 0; i < n; ++i) {
        std::vector<double> row = {x(rng), x(rng), pitch(rng), yaw(rng)};
        set.targets.push_back(smooth_fn(row));
        set.features.push_back(std::move(row));
    }
    return set;
}

double r_squared(const gbrt::GbrtModel& m, const TrainingSet& set) {
    double mean = 0.0;
    for (double t : set.targets) mean += t;
    mean /= double(set.targets.size());
    double ss_res = 0.0, ss_tot = 0.0;
    for (size_t i = 0; i < set.features.size(); ++i) {
        const double e = gbrt::predict(m, set.features[i]) - set.targets[i];
        ss_res += e * e;
        ss_tot += (set.targets[i] - mean) * (set.targets[i] - mean);
    }
    return 1.0 - ss_res / ss_tot;
}

std::string file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string tmp(const std::string& name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("binning: a constant feature gets no cut points") {
    std::vector<std::vector<double>> rows(100, {7.0});
    auto X = gbrt::bin_features(rows, 255);
    CHECK(X.edges[0].empty());
    for (uint8_t b : X.bins) CHECK(b == 0);
}

TEST_CASE("binning: 1..1000 fills 255 near-equal bins") {
    std::vector<std::vector<double>> rows;
    for (int i = 1; i <= 1000; ++i) rows.push_back({double(i)});
    auto X = gbrt::bin_features(rows, 255);
    CHECK(X.edges[0].size() == 254);

    std::vector<int> counts(255, 0);
    for (uint8_t b : X.bins) ++counts[b];
    const auto [lo, hi] = std::minmax_element(counts.begin(), counts.end());
    CHECK(*lo >= 3);
    CHECK(*hi <= 5);  // 1000/255 = 3.9, so every bin holds 3..5 values
}

TEST_CASE("binning: edges are ascending and bin_value is monotone") {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> g(0.0, 10.0);
    std::vector<std::vector<double>> rows;
    for (int i = 0; i < 500; ++i) rows.push_back({g(rng)});
    auto X = gbrt::bin_features(rows, 64);
    for (size_t i = 1; i < X.edges[0].size(); ++i)
        CHECK(X.edges[0][i] > X.edges[0][i - 1]);
    uint8_t prev = 0;
    for (double x = -40.0; x <= 40.0; x += 0.25) {
        const uint8_t b = gbrt::bin_value(X.edges[0], x);
        CHECK(b >= prev);
        prev = b;
    }
    CHECK(gbrt::bin_value(X.edges[0], -1e9) == 0);
    CHECK(gbrt::bin_value(X.edges[0], 1e9) == X.edges[0].size());
}

TEST_CASE("single stump at learning rate 1 recovers two cluster means") {
    TrainingSet set;
    for (int i = 0; i < 50; ++i) {
        set.features.push_back({0.0});
        set.targets.push_back(1.0);
        set.features.push_back({10.0});
        set.targets.push_back(5.0);
    }
    GbrtConfig cfg;
    cfg.learning_rate = 1.0;
    cfg.n_iterations = 1;
    cfg.max_leaf_nodes = 2;
    cfg.min_samples_leaf = 5;
    cfg.validation_fraction = 0.0;
    auto [model, log] = gbrt::fit(set, cfg);
    REQUIRE(model.trees.size() == 1);
    CHECK(model.trees[0].leaf_count() == 2);
    CHECK(gbrt::predict(model, {0.0}) == doctest::Approx(1.0));
    CHECK(gbrt::predict(model, {10.0}) == doctest::Approx(5.0));
    CHECK(log.train_mse.back() == doctest::Approx(0.0));
}

TEST_CASE("fit on a smooth surface reaches R^2 >= 0.9") {
    const auto train = smooth_set(2000, 11);
    const auto held_out = smooth_set(500, 12);
    auto [model, log] = gbrt::fit(train, {});
    CHECK(r_squared(model, train) >= 0.95);
    CHECK(r_squared(model, held_out) >= 0.9);
    CHECK(log.train_mse.size() == 200);
    CHECK(log.valid_mse.size() == 200);
    CHECK(log.train_mse.back() < log.train_mse.front());
    CHECK(log.valid_mse.back() < log.valid_mse.front());
}

TEST_CASE("leaf-node and leaf-size limits are honored") {
    const auto train = smooth_set(1500, 4);
    GbrtConfig cfg;
    cfg.max_leaf_nodes = 8;
    cfg.min_samples_leaf = 40;
    cfg.n_iterations = 20;
    auto [model, log] = gbrt::fit(train, cfg);
    for (const auto& tree : model.trees) {
        CHECK(tree.leaf_count() <= 8);
        for (const auto& n : tree.nodes)
            if (n.is_leaf && n.sample_count > 0) CHECK(n.sample_count >= 40);
    }
}

TEST_CASE("fit is deterministic for a fixed seed") {
    const auto train = smooth_set(800, 21);
    auto [a, la] = gbrt::fit(train, {});
    auto [b, lb] = gbrt::fit(train, {});
    const auto probe = smooth_set(50, 22);
    for (const auto& row : probe.features)
        CHECK(gbrt::predict(a, row) == gbrt::predict(b, row));

    GbrtConfig other;
    other.seed = 99;
    auto [c, lc] = gbrt::fit(train, other);
    CHECK(la.valid_mse.back() != lc.valid_mse.back());
}

TEST_CASE("HTGB round-trip preserves predictions bitwise") {
    const auto train = smooth_set(1000, 31);
    auto [model, log] = gbrt::fit(train, {});
    const auto p1 = tmp("model_rt1.htgb"), p2 = tmp("model_rt2.htgb");
    gbrt::save_model(model, p1);
    auto back = gbrt::load_model(p1);

    const auto probe = smooth_set(200, 32);
    for (const auto& row : probe.features)
        CHECK(gbrt::predict(back, row) == gbrt::predict(model, row));

    gbrt::save_model(back, p2);
    CHECK(file_bytes(p1) == file_bytes(p2));
    std::filesystem::remove(p1);
    std::filesystem::remove(p2);
}

TEST_CASE("HTGB rejects bad magic and truncation") {
    const auto train = smooth_set(300, 41);
    auto [model, log] = gbrt::fit(train, {});
    const auto path = tmp("model_bad.htgb");
    gbrt::save_model(model, path);
    auto bytes = file_bytes(path);

    bytes[0] = 'X';
    std::ofstream(path, std::ios::binary) << bytes;
    CHECK_THROWS_AS(gbrt::load_model(path), gbrt::GbrtError);

    bytes[0] = 'H';
    bytes.resize(bytes.size() / 2);
    std::ofstream(path, std::ios::binary).write(bytes.data(), bytes.size());
    CHECK_THROWS_AS(gbrt::load_model(path), gbrt::GbrtError);
    std::filesystem::remove(path);
}

TEST_CASE("warm start appends trees and fits the new data better") {
    auto base_set = smooth_set(1200, 51);
    GbrtConfig cfg;
    cfg.n_iterations = 60;
    auto [base, log] = gbrt::fit(base_set, cfg);

    // Shifted regime the base model has not seen.
    auto new_set = smooth_set(400, 52);
    for (auto& t : new_set.targets) t += 25.0;

    auto tuned = gbrt::warm_start_update(base, new_set, 40);
    CHECK(tuned.trees.size() == base.trees.size() + 40);

    double mse_base = 0.0, mse_tuned = 0.0;
    for (size_t i = 0; i < new_set.features.size(); ++i) {
        const double eb = gbrt::predict(base, new_set.features[i]) - new_set.targets[i];
        const double et = gbrt::predict(tuned, new_set.features[i]) - new_set.targets[i];
        mse_base += eb * eb;
        mse_tuned += et * et;
    }
    CHECK(mse_tuned < 0.2 * mse_base);

    // The base trees are untouched: predictions on old data barely move
    // relative to the 25-unit shift the update absorbed.
    CHECK(tuned.trees[0].nodes.size() == base.trees[0].nodes.size());
}

TEST_CASE("input validation errors") {
    CHECK_THROWS_AS(gbrt::fit({}, {}), gbrt::GbrtError);
    TrainingSet bad;
    bad.features = {{1.0}, {2.0}};
    bad.targets = {1.0};
    CHECK_THROWS_AS(gbrt::fit(bad, {}), gbrt::GbrtError);
    bad.targets = {1.0, std::nan("")};
    CHECK_THROWS_AS(gbrt::fit(bad, {}), gbrt::GbrtError);

    const auto train = smooth_set(300, 61);
    auto [model, log] = gbrt::fit(train, {});
    CHECK_THROWS_AS(gbrt::predict(model, {1.0}), gbrt::GbrtError);
    CHECK_THROWS_AS(gbrt::predict(model, {1.0, 2.0, 3.0, std::nan("")}),
                    gbrt::GbrtError);
}
