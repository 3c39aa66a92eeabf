#pragma once

// Histogram gradient-boosted regression trees: quantile feature binning,
// best-first leaf growth with variance-reduction gain, squared-error loss,
// stagewise boosting, warm-start fine-tuning, and a versioned binary model
// format (HTGB).

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace halotouch::gbrt {

struct GbrtError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct GbrtConfig {
    double learning_rate = 0.1;
    int n_iterations = 200;
    int max_leaf_nodes = 31;
    int min_samples_leaf = 25;
    int max_bins = 255;
    double validation_fraction = 0.2;
    uint64_t seed = 0;
};

struct TreeNode {
    bool is_leaf = true;
    uint8_t feature = 0;
    uint8_t bin = 0;          // goes left when binned value <= bin
    uint32_t left = 0;
    uint32_t right = 0;
    double leaf_value = 0.0;
    uint32_t sample_count = 0;
};

struct Tree {
    std::vector<TreeNode> nodes;  // nodes[0] is the root

    double predict_binned(const uint8_t* row) const;
    int leaf_count() const;
};

struct GbrtModel {
    GbrtConfig config;
    uint32_t n_features = 4;
    double base_prediction = 0.0;
    std::vector<std::vector<double>> bin_edges;  // per feature, ascending cuts
    std::vector<Tree> trees;

    static const std::vector<std::string>& feature_names();  // x, y, theta_p, theta_y
};

struct TrainingSet {
    std::vector<std::vector<double>> features;  // N rows
    std::vector<double> targets;                // N
};

struct TrainingLog {
    std::vector<double> train_mse;  // per boosting iteration
    std::vector<double> valid_mse;
};

struct BinnedMatrix {
    uint32_t n_rows = 0;
    uint32_t n_features = 0;
    std::vector<uint8_t> bins;  // row-major
    std::vector<std::vector<double>> edges;
};

BinnedMatrix bin_features(const std::vector<std::vector<double>>& features,
                          int max_bins);
uint8_t bin_value(const std::vector<double>& edges, double x);

std::pair<GbrtModel, TrainingLog> fit(const TrainingSet& data,
                                      const GbrtConfig& cfg);

double predict(const GbrtModel& model, const std::vector<double>& row);

GbrtModel warm_start_update(const GbrtModel& model, const TrainingSet& new_data,
                            int extra_iterations);

void save_model(const GbrtModel& model, const std::string& path);
GbrtModel load_model(const std::string& path);

}  // namespace halotouch::gbrt
