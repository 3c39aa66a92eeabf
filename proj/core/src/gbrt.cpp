#include "halotouch/gbrt.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <random>

namespace halotouch::gbrt {

namespace {

void check_finite(const std::vector<std::vector<double>>& rows) {
    for (const auto& row : rows)
        for (double v : row)
            if (!std::isfinite(v)) throw GbrtError("non-finite feature value");
}

struct SplitCandidate {
    double gain = 0.0;
    int feature = -1;
    int bin = -1;
    uint32_t node = 0;
};

// Deterministic ordering: higher gain wins; ties go to the earlier node,
// then lower feature index, then lower bin.
bool better(const SplitCandidate& a, const SplitCandidate& b) {
    if (a.gain != b.gain) return a.gain > b.gain;
    if (a.node != b.node) return a.node < b.node;
    if (a.feature != b.feature) return a.feature < b.feature;
    return a.bin < b.bin;
}

struct NodeRows {
    std::vector<uint32_t> rows;
};

SplitCandidate best_split(const BinnedMatrix& X, const std::vector<double>& residual,
                          const std::vector<uint32_t>& rows, uint32_t node_id,
                          const GbrtConfig& cfg) {
    SplitCandidate best;
    best.node = node_id;
    const size_t n = rows.size();
    if (n < 2 * size_t(cfg.min_samples_leaf)) return best;

    double total_sum = 0.0;
    for (uint32_t r : rows) total_sum += residual[r];

    std::vector<double> sum(256);
    std::vector<uint32_t> cnt(256);
    for (uint32_t f = 0; f < X.n_features; ++f) {
        const int n_bins = int(X.edges[f].size()) + 1;
        if (n_bins < 2) continue;
        std::fill(sum.begin(), sum.begin() + n_bins, 0.0);
        std::fill(cnt.begin(), cnt.begin() + n_bins, 0u);
        for (uint32_t r : rows) {
            const uint8_t b = X.bins[size_t(r) * X.n_features + f];
            sum[b] += residual[r];
            ++cnt[b];
        }
        double left_sum = 0.0;
        uint32_t left_cnt = 0;
        const double parent = total_sum * total_sum / double(n);
        for (int b = 0; b < n_bins - 1; ++b) {
            left_sum += sum[b];
            left_cnt += cnt[b];
            const uint32_t right_cnt = uint32_t(n) - left_cnt;
            if (left_cnt < uint32_t(cfg.min_samples_leaf) ||
                right_cnt < uint32_t(cfg.min_samples_leaf))
                continue;
            const double right_sum = total_sum - left_sum;
            const double gain = left_sum * left_sum / left_cnt +
                                right_sum * right_sum / right_cnt - parent;
            SplitCandidate c{gain, int(f), b, node_id};
            if (c.gain > 1e-12 && better(c, best)) best = c;
        }
    }
    return best;
}

Tree build_tree(const BinnedMatrix& X, const std::vector<double>& residual,
                const std::vector<uint32_t>& all_rows, const GbrtConfig& cfg) {
    Tree tree;
    std::vector<NodeRows> node_rows;

    auto make_leaf = [&](const std::vector<uint32_t>& rows) -> uint32_t {
        TreeNode node;
        node.is_leaf = true;
        node.sample_count = uint32_t(rows.size());
        double s = 0.0;
        for (uint32_t r : rows) s += residual[r];
        node.leaf_value = rows.empty() ? 0.0 : s / double(rows.size());
        tree.nodes.push_back(node);
        node_rows.push_back({rows});
        return uint32_t(tree.nodes.size() - 1);
    };

    make_leaf(all_rows);

    std::vector<SplitCandidate> frontier;
    frontier.push_back(best_split(X, residual, node_rows[0].rows, 0, cfg));

    int leaves = 1;
    while (leaves < cfg.max_leaf_nodes) {
        SplitCandidate chosen;
        for (const auto& c : frontier)
            if (c.feature >= 0 && (chosen.feature < 0 || better(c, chosen)))
                chosen = c;
        if (chosen.feature < 0) break;

        std::vector<uint32_t> left_rows, right_rows;
        for (uint32_t r : node_rows[chosen.node].rows) {
            const uint8_t b = X.bins[size_t(r) * X.n_features + chosen.feature];
            (b <= chosen.bin ? left_rows : right_rows).push_back(r);
        }
        const uint32_t li = make_leaf(left_rows);
        const uint32_t ri = make_leaf(right_rows);
        TreeNode& parent = tree.nodes[chosen.node];
        parent.is_leaf = false;
        parent.feature = uint8_t(chosen.feature);
        parent.bin = uint8_t(chosen.bin);
        parent.left = li;
        parent.right = ri;
        node_rows[chosen.node].rows.clear();
        ++leaves;

        frontier.erase(std::remove_if(frontier.begin(), frontier.end(),
                                      [&](const SplitCandidate& c) {
                                          return c.node == chosen.node;
                                      }),
                       frontier.end());
        frontier.push_back(best_split(X, residual, node_rows[li].rows, li, cfg));
        frontier.push_back(best_split(X, residual, node_rows[ri].rows, ri, cfg));
    }
    return tree;
}

double mse(const std::vector<double>& pred, const std::vector<double>& target,
           const std::vector<uint32_t>& rows) {
    if (rows.empty()) return 0.0;
    double s = 0.0;
    for (uint32_t r : rows) {
        const double e = pred[r] - target[r];
        s += e * e;
    }
    return s / double(rows.size());
}

template <typename T>
void put(std::ostream& os, T v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is) {
    T v;
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw GbrtError("HTGB model: truncated file");
    return v;
}

}  // namespace

const std::vector<std::string>& GbrtModel::feature_names() {
    static const std::vector<std::string> names = {"x", "y", "theta_p", "theta_y"};
    return names;
}

double Tree::predict_binned(const uint8_t* row) const {
    uint32_t i = 0;
    while (!nodes[i].is_leaf)
        i = row[nodes[i].feature] <= nodes[i].bin ? nodes[i].left : nodes[i].right;
    return nodes[i].leaf_value;
}

int Tree::leaf_count() const {
    int c = 0;
    for (const auto& n : nodes)
        if (n.is_leaf) ++c;
    return c;
}

uint8_t bin_value(const std::vector<double>& edges, double x) {
    const auto it = std::upper_bound(edges.begin(), edges.end(), x);
    return uint8_t(it - edges.begin());
}

BinnedMatrix bin_features(const std::vector<std::vector<double>>& features,
                          int max_bins) {
    if (features.empty()) throw GbrtError("bin_features: empty input");
    check_finite(features);
    const uint32_t n_rows = uint32_t(features.size());
    const uint32_t n_features = uint32_t(features.front().size());

    BinnedMatrix X;
    X.n_rows = n_rows;
    X.n_features = n_features;
    X.edges.resize(n_features);
    X.bins.resize(size_t(n_rows) * n_features);

    std::vector<double> col(n_rows);
    for (uint32_t f = 0; f < n_features; ++f) {
        for (uint32_t r = 0; r < n_rows; ++r) col[r] = features[r][f];
        std::sort(col.begin(), col.end());
        auto& edges = X.edges[f];
        for (int b = 1; b < max_bins; ++b) {
            const size_t pos = size_t(b) * n_rows / max_bins;
            if (pos == 0 || pos >= n_rows) continue;
            if (col[pos - 1] == col[pos]) continue;  // tie, no cut here
            const double edge = 0.5 * (col[pos - 1] + col[pos]);
            if (edges.empty() || edge > edges.back()) edges.push_back(edge);
        }
        for (uint32_t r = 0; r < n_rows; ++r)
            X.bins[size_t(r) * n_features + f] = bin_value(edges, features[r][f]);
    }
    return X;
}

std::pair<GbrtModel, TrainingLog> fit(const TrainingSet& data,
                                      const GbrtConfig& cfg) {
    if (data.features.size() != data.targets.size())
        throw GbrtError("fit: feature/target size mismatch");
    if (data.features.empty()) throw GbrtError("fit: empty training set");
    check_finite(data.features);
    for (double t : data.targets)
        if (!std::isfinite(t)) throw GbrtError("fit: non-finite target");

    const uint32_t n = uint32_t(data.features.size());

    GbrtModel model;
    model.config = cfg;
    model.n_features = uint32_t(data.features.front().size());
    model.base_prediction =
        std::accumulate(data.targets.begin(), data.targets.end(), 0.0) / n;

    TrainingLog log;

    // Seeded shuffle; the last validation_fraction of shuffled rows are
    // held out from tree fitting and only tracked in the log.
    std::vector<uint32_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(cfg.seed);
    std::shuffle(order.begin(), order.end(), rng);
    const uint32_t n_valid = uint32_t(double(n) * cfg.validation_fraction);
    const uint32_t n_train = n - n_valid;
    std::vector<uint32_t> train_rows(order.begin(), order.begin() + n_train);
    std::vector<uint32_t> valid_rows(order.begin() + n_train, order.end());

    if (n_train < uint32_t(2 * cfg.min_samples_leaf)) {
        // Too small for any split; constant model.
        return {model, log};
    }

    std::vector<std::vector<double>> train_features(n_train);
    for (uint32_t i = 0; i < n_train; ++i)
        train_features[i] = data.features[train_rows[i]];
    BinnedMatrix Xt = bin_features(train_features, cfg.max_bins);
    model.bin_edges = Xt.edges;

    // Full binned matrix (training edges) for logging validation error.
    std::vector<uint8_t> all_bins(size_t(n) * model.n_features);
    for (uint32_t r = 0; r < n; ++r)
        for (uint32_t f = 0; f < model.n_features; ++f)
            all_bins[size_t(r) * model.n_features + f] =
                bin_value(model.bin_edges[f], data.features[r][f]);

    std::vector<double> pred(n, model.base_prediction);
    std::vector<double> residual(n_train);
    std::vector<uint32_t> local_rows(n_train);
    std::iota(local_rows.begin(), local_rows.end(), 0);

    for (int it = 0; it < cfg.n_iterations; ++it) {
        for (uint32_t i = 0; i < n_train; ++i)
            residual[i] = data.targets[train_rows[i]] - pred[train_rows[i]];
        Tree tree = build_tree(Xt, residual, local_rows, cfg);
        for (uint32_t r = 0; r < n; ++r)
            pred[r] += cfg.learning_rate *
                       tree.predict_binned(&all_bins[size_t(r) * model.n_features]);
        model.trees.push_back(std::move(tree));
        log.train_mse.push_back(mse(pred, data.targets, train_rows));
        log.valid_mse.push_back(mse(pred, data.targets, valid_rows));
    }
    return {model, log};
}

double predict(const GbrtModel& model, const std::vector<double>& row) {
    if (row.size() != model.n_features)
        throw GbrtError("predict: feature arity mismatch");
    for (double v : row)
        if (!std::isfinite(v)) throw GbrtError("predict: non-finite input");
    std::vector<uint8_t> bins(model.n_features);
    for (uint32_t f = 0; f < model.n_features; ++f)
        bins[f] = bin_value(model.bin_edges[f], row[f]);
    double y = model.base_prediction;
    for (const auto& tree : model.trees)
        y += model.config.learning_rate * tree.predict_binned(bins.data());
    return y;
}

GbrtModel warm_start_update(const GbrtModel& model, const TrainingSet& new_data,
                            int extra_iterations) {
    if (!new_data.features.empty() &&
        new_data.features.front().size() != model.n_features)
        throw GbrtError("warm_start_update: feature arity mismatch");
    GbrtModel out = model;
    if (extra_iterations <= 0 || new_data.features.empty()) return out;
    check_finite(new_data.features);

    const uint32_t n = uint32_t(new_data.features.size());
    if (n < uint32_t(2 * model.config.min_samples_leaf)) return out;

    // New data is binned with the original model's edges so appended trees
    // stay on the same split grid as the base model.
    BinnedMatrix X;
    X.n_rows = n;
    X.n_features = model.n_features;
    X.edges = model.bin_edges;
    X.bins.resize(size_t(n) * model.n_features);
    std::vector<double> pred(n);
    for (uint32_t r = 0; r < n; ++r) {
        for (uint32_t f = 0; f < model.n_features; ++f)
            X.bins[size_t(r) * model.n_features + f] =
                bin_value(model.bin_edges[f], new_data.features[r][f]);
        pred[r] = predict(model, new_data.features[r]);
    }

    std::vector<uint32_t> rows(n);
    std::iota(rows.begin(), rows.end(), 0);
    std::vector<double> residual(n);
    for (int it = 0; it < extra_iterations; ++it) {
        for (uint32_t r = 0; r < n; ++r) residual[r] = new_data.targets[r] - pred[r];
        Tree tree = build_tree(X, residual, rows, model.config);
        for (uint32_t r = 0; r < n; ++r)
            pred[r] += model.config.learning_rate *
                       tree.predict_binned(&X.bins[size_t(r) * model.n_features]);
        out.trees.push_back(std::move(tree));
    }
    return out;
}

void save_model(const GbrtModel& model, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw GbrtError("cannot open for writing: " + path);
    os.write("HTGB", 4);
    put<uint16_t>(os, 1);
    put<double>(os, model.config.learning_rate);
    put<uint32_t>(os, uint32_t(model.config.n_iterations));
    put<uint32_t>(os, uint32_t(model.config.max_leaf_nodes));
    put<uint32_t>(os, uint32_t(model.config.min_samples_leaf));
    put<uint32_t>(os, uint32_t(model.config.max_bins));
    put<double>(os, model.config.validation_fraction);
    put<uint64_t>(os, model.config.seed);
    put<uint32_t>(os, model.n_features);
    put<double>(os, model.base_prediction);
    for (uint32_t f = 0; f < model.n_features; ++f) {
        put<uint32_t>(os, uint32_t(model.bin_edges[f].size()));
        for (double e : model.bin_edges[f]) put<double>(os, e);
    }
    put<uint32_t>(os, uint32_t(model.trees.size()));
    for (const auto& tree : model.trees) {
        put<uint32_t>(os, uint32_t(tree.nodes.size()));
        for (const auto& n : tree.nodes) {
            put<uint8_t>(os, n.is_leaf ? 1 : 0);
            if (n.is_leaf) {
                put<double>(os, n.leaf_value);
                put<uint32_t>(os, n.sample_count);
            } else {
                put<uint8_t>(os, n.feature);
                put<uint8_t>(os, n.bin);
                put<uint32_t>(os, n.left);
                put<uint32_t>(os, n.right);
            }
        }
    }
    if (!os) throw GbrtError("HTGB model: write failure");
}

GbrtModel load_model(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw GbrtError("cannot open for reading: " + path);
    char magic[4];
    is.read(magic, 4);
    if (is.gcount() != 4 || std::memcmp(magic, "HTGB", 4) != 0)
        throw GbrtError("HTGB model: bad magic");
    const uint16_t version = get<uint16_t>(is);
    if (version != 1)
        throw GbrtError("HTGB model: unsupported version " + std::to_string(version));

    GbrtModel m;
    m.config.learning_rate = get<double>(is);
    m.config.n_iterations = int(get<uint32_t>(is));
    m.config.max_leaf_nodes = int(get<uint32_t>(is));
    m.config.min_samples_leaf = int(get<uint32_t>(is));
    m.config.max_bins = int(get<uint32_t>(is));
    m.config.validation_fraction = get<double>(is);
    m.config.seed = get<uint64_t>(is);
    m.n_features = get<uint32_t>(is);
    m.base_prediction = get<double>(is);
    m.bin_edges.resize(m.n_features);
    for (uint32_t f = 0; f < m.n_features; ++f) {
        const uint32_t n_edges = get<uint32_t>(is);
        m.bin_edges[f].resize(n_edges);
        for (auto& e : m.bin_edges[f]) e = get<double>(is);
    }
    const uint32_t n_trees = get<uint32_t>(is);
    m.trees.resize(n_trees);
    for (auto& tree : m.trees) {
        const uint32_t n_nodes = get<uint32_t>(is);
        tree.nodes.resize(n_nodes);
        for (auto& n : tree.nodes) {
            n.is_leaf = get<uint8_t>(is) != 0;
            if (n.is_leaf) {
                n.leaf_value = get<double>(is);
                n.sample_count = get<uint32_t>(is);
            } else {
                n.feature = get<uint8_t>(is);
                n.bin = get<uint8_t>(is);
                n.left = get<uint32_t>(is);
                n.right = get<uint32_t>(is);
            }
        }
    }
    return m;
}

}  // namespace halotouch::gbrt
