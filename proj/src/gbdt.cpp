#include "pathwatch/gbdt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>

#include <nlohmann/json.hpp>

namespace pathwatch {

void validate(const GbdtParams& params) {
    if (params.n_estimators < 0) throw InvalidConfigError("n_estimators must be >= 0");
    if (!(params.learning_rate > 0 && params.learning_rate <= 1)) {
        throw InvalidConfigError("learning_rate must be in (0,1]");
    }
    if (params.max_leaves < 2) throw InvalidConfigError("max_leaves must be >= 2");
    if (params.max_depth < 1) throw InvalidConfigError("max_depth must be >= 1");
    if (!(params.feature_fraction > 0 && params.feature_fraction <= 1)) {
        throw InvalidConfigError("feature_fraction must be in (0,1]");
    }
    if (!(params.bagging_fraction > 0 && params.bagging_fraction <= 1)) {
        throw InvalidConfigError("bagging_fraction must be in (0,1]");
    }
    if (params.l1 < 0 || params.l2 < 0) throw InvalidConfigError("l1/l2 must be >= 0");
    if (params.n_bins < 2 || params.n_bins > 65535) {
        throw InvalidConfigError("n_bins must be in [2, 65535]");
    }
}

// ---------------------------------------------------------------------------
// Binning
// ---------------------------------------------------------------------------

FeatureBinner FeatureBinner::fit(const FeatureMatrix& x, int n_bins) {
    FeatureBinner binner;
    const std::size_t d = x.n_cols();
    binner.edges_.resize(d);
    parallel_for(d, [&](std::size_t f) {
        std::vector<double> column(x.n_rows);
        for (std::size_t r = 0; r < x.n_rows; ++r) column[r] = x.at(r, f);
        std::sort(column.begin(), column.end());

        std::vector<double> uniques;
        for (double v : column) {
            if (uniques.empty() || v != uniques.back()) uniques.push_back(v);
        }
        std::vector<double>& edges = binner.edges_[f];
        if (uniques.size() <= 1) return;  // constant column, single bin
        if (uniques.size() <= static_cast<std::size_t>(n_bins)) {
            for (std::size_t i = 0; i + 1 < uniques.size(); ++i) {
                edges.push_back(0.5 * (uniques[i] + uniques[i + 1]));
            }
            return;
        }
        // More distinct values than bins: quantile-spaced cuts.
        const std::size_t n = column.size();
        for (int k = 1; k < n_bins; ++k) {
            std::size_t pos = static_cast<std::size_t>(
                static_cast<double>(k) * static_cast<double>(n) / n_bins);
            pos = std::clamp<std::size_t>(pos, 1, n - 1);
            double cut = 0.5 * (column[pos - 1] + column[pos]);
            if (edges.empty() || cut > edges.back()) edges.push_back(cut);
        }
    });
    return binner;
}

std::uint16_t FeatureBinner::bin(std::size_t feature, double value) const {
    const auto& edges = edges_[feature];
    auto it = std::lower_bound(edges.begin(), edges.end(), value);
    return static_cast<std::uint16_t>(it - edges.begin());
}

std::vector<std::uint16_t> FeatureBinner::bin_matrix(const FeatureMatrix& x) const {
    const std::size_t d = x.n_cols();
    if (d != edges_.size()) throw SchemaMismatchError("binner/matrix width mismatch");
    std::vector<std::uint16_t> binned(x.n_rows * d);
    parallel_for(x.n_rows, [&](std::size_t r) {
        for (std::size_t f = 0; f < d; ++f) binned[r * d + f] = bin(f, x.at(r, f));
    });
    return binned;
}

// ---------------------------------------------------------------------------
// Tree structure
// ---------------------------------------------------------------------------

double Tree::value_at(std::span<const double> row) const {
    int node = 0;
    while (!nodes[node].is_leaf()) {
        const TreeNode& n = nodes[node];
        node = row[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
    }
    return nodes[node].value;
}

int Tree::leaf_count() const {
    int count = 0;
    for (const auto& n : nodes) count += n.is_leaf() ? 1 : 0;
    return count;
}

int Tree::depth() const {
    // Depth of the root is 0.
    std::vector<int> depths(nodes.size(), 0);
    int max_depth = 0;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        if (!nodes[i].is_leaf()) {
            depths[static_cast<std::size_t>(nodes[i].left)] = depths[i] + 1;
            depths[static_cast<std::size_t>(nodes[i].right)] = depths[i] + 1;
            max_depth = std::max(max_depth, depths[i] + 1);
        }
    }
    return max_depth;
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

namespace {

struct HistBin {
    double g = 0;
    double h = 0;
    std::int32_t count = 0;
};

double soft_threshold(double g, double l1) {
    if (g > l1) return g - l1;
    if (g < -l1) return g + l1;
    return 0.0;
}

double leaf_objective(double g, double h, double l1, double l2) {
    double num = soft_threshold(g, l1);
    double denom = h + l2;
    if (denom <= 1e-300) return 0.0;
    return num * num / denom;
}

double leaf_weight(double g, double h, double l1, double l2) {
    double denom = h + l2;
    if (denom <= 1e-300) return 0.0;
    return -soft_threshold(g, l1) / denom;
}

struct SplitInfo {
    double gain = -std::numeric_limits<double>::infinity();
    int feature = -1;  // index into the sampled feature list
    int bin = -1;      // left side takes bins <= bin
    double g_left = 0;
    double h_left = 0;
    std::int32_t count_left = 0;
};

struct BuildNode {
    int tree_node = -1;
    std::size_t begin = 0;
    std::size_t end = 0;
    int depth = 0;
    double sum_g = 0;
    double sum_h = 0;
    std::vector<HistBin> hist;
    SplitInfo best;
};

class TreeBuilder {
public:
    TreeBuilder(const std::vector<std::uint16_t>& binned, std::size_t n_features,
                const FeatureBinner& binner, std::span<const double> g,
                std::span<const double> h, const GbdtParams& params,
                std::vector<std::size_t> features)
        : binned_(binned),
          d_(n_features),
          binner_(binner),
          g_(g),
          h_(h),
          params_(params),
          features_(std::move(features)) {
        offsets_.resize(features_.size() + 1, 0);
        for (std::size_t j = 0; j < features_.size(); ++j) {
            offsets_[j + 1] = offsets_[j] +
                              static_cast<std::size_t>(binner_.bin_count(features_[j]));
        }
    }

    Tree build(std::vector<std::uint32_t>& rows) {
        Tree tree;
        // Pre-size so BuildNode references stay valid across apply_split.
        const std::size_t cap = 2 * static_cast<std::size_t>(params_.max_leaves) + 1;
        tree.nodes.reserve(cap);
        tree.nodes.emplace_back();

        nodes_.clear();
        nodes_.reserve(cap);
        BuildNode root;
        root.tree_node = 0;
        root.begin = 0;
        root.end = rows.size();
        root.depth = 0;
        for (std::uint32_t r : rows) {
            root.sum_g += g_[r];
            root.sum_h += h_[r];
        }
        root.hist = make_histogram(rows, root.begin, root.end);
        find_best_split(root);
        nodes_.push_back(std::move(root));

        if (params_.growth == Growth::kLeafWise) {
            grow_leaf_wise(tree, rows);
        } else {
            grow_depth_wise(tree, rows);
        }

        for (const auto& node : nodes_) {
            if (tree.nodes[static_cast<std::size_t>(node.tree_node)].is_leaf()) {
                tree.nodes[static_cast<std::size_t>(node.tree_node)].value =
                    leaf_weight(node.sum_g, node.sum_h, params_.l1, params_.l2);
            }
        }
        return tree;
    }

private:
    std::vector<HistBin> make_histogram(const std::vector<std::uint32_t>& rows,
                                        std::size_t begin, std::size_t end) const {
        std::vector<HistBin> hist(offsets_.back());
        const std::size_t n_sampled = features_.size();
        for (std::size_t i = begin; i < end; ++i) {
            const std::uint32_t r = rows[i];
            const std::uint16_t* row_bins = binned_.data() + static_cast<std::size_t>(r) * d_;
            const double gr = g_[r];
            const double hr = h_[r];
            for (std::size_t j = 0; j < n_sampled; ++j) {
                HistBin& bin = hist[offsets_[j] + row_bins[features_[j]]];
                bin.g += gr;
                bin.h += hr;
                bin.count += 1;
            }
        }
        return hist;
    }

    void find_best_split(BuildNode& node) const {
        node.best = SplitInfo{};
        if (node.depth >= params_.max_depth) return;
        if (node.end - node.begin < 2) return;
        const double parent = leaf_objective(node.sum_g, node.sum_h, params_.l1, params_.l2);
        const std::int32_t total =
            static_cast<std::int32_t>(node.end - node.begin);
        for (std::size_t j = 0; j < features_.size(); ++j) {
            const int bins = binner_.bin_count(features_[j]);
            double g_left = 0, h_left = 0;
            std::int32_t count_left = 0;
            for (int b = 0; b + 1 < bins; ++b) {
                const HistBin& hb = node.hist[offsets_[j] + static_cast<std::size_t>(b)];
                g_left += hb.g;
                h_left += hb.h;
                count_left += hb.count;
                if (count_left == 0) continue;
                if (count_left == total) break;
                double g_right = node.sum_g - g_left;
                double h_right = node.sum_h - h_left;
                double gain = 0.5 * (leaf_objective(g_left, h_left, params_.l1, params_.l2) +
                                     leaf_objective(g_right, h_right, params_.l1, params_.l2) -
                                     parent);
                if (gain > node.best.gain) {
                    node.best.gain = gain;
                    node.best.feature = static_cast<int>(j);
                    node.best.bin = b;
                    node.best.g_left = g_left;
                    node.best.h_left = h_left;
                    node.best.count_left = count_left;
                }
            }
        }
    }

    // Splits `node`, appends the two children to nodes_, returns their
    // indices. The parent histogram is released; the smaller child is built
    // directly and the larger one obtained by subtraction.
    std::pair<std::size_t, std::size_t> apply_split(Tree& tree, BuildNode& node,
                                                    std::vector<std::uint32_t>& rows) {
        const std::size_t feature_global = features_[static_cast<std::size_t>(node.best.feature)];
        const int split_bin = node.best.bin;
        auto mid_it = std::partition(
            rows.begin() + static_cast<std::ptrdiff_t>(node.begin),
            rows.begin() + static_cast<std::ptrdiff_t>(node.end), [&](std::uint32_t r) {
                return binned_[static_cast<std::size_t>(r) * d_ + feature_global] <=
                       split_bin;
            });
        const std::size_t mid =
            static_cast<std::size_t>(mid_it - rows.begin());

        TreeNode& parent = tree.nodes[static_cast<std::size_t>(node.tree_node)];
        parent.feature = static_cast<int>(feature_global);
        parent.threshold = binner_.edge(feature_global, split_bin);
        parent.left = static_cast<int>(tree.nodes.size());
        parent.right = parent.left + 1;
        tree.nodes.emplace_back();
        tree.nodes.emplace_back();

        BuildNode left, right;
        left.tree_node = tree.nodes[static_cast<std::size_t>(node.tree_node)].left;
        right.tree_node = tree.nodes[static_cast<std::size_t>(node.tree_node)].right;
        left.begin = node.begin;
        left.end = mid;
        right.begin = mid;
        right.end = node.end;
        left.depth = right.depth = node.depth + 1;
        left.sum_g = node.best.g_left;
        left.sum_h = node.best.h_left;
        right.sum_g = node.sum_g - left.sum_g;
        right.sum_h = node.sum_h - left.sum_h;

        BuildNode& small = (left.end - left.begin <= right.end - right.begin) ? left : right;
        BuildNode& large = (&small == &left) ? right : left;
        small.hist = make_histogram(rows, small.begin, small.end);
        large.hist = std::move(node.hist);
        for (std::size_t i = 0; i < large.hist.size(); ++i) {
            large.hist[i].g -= small.hist[i].g;
            large.hist[i].h -= small.hist[i].h;
            large.hist[i].count -= small.hist[i].count;
        }
        node.hist.clear();
        node.hist.shrink_to_fit();

        find_best_split(left);
        find_best_split(right);
        std::size_t left_idx = nodes_.size();
        nodes_.push_back(std::move(left));
        nodes_.push_back(std::move(right));
        return {left_idx, left_idx + 1};
    }

    void grow_leaf_wise(Tree& tree, std::vector<std::uint32_t>& rows) {
        // Max-heap over (gain, insertion order) for deterministic expansion.
        auto cmp = [this](std::size_t a, std::size_t b) {
            if (nodes_[a].best.gain != nodes_[b].best.gain) {
                return nodes_[a].best.gain < nodes_[b].best.gain;
            }
            return a > b;
        };
        std::priority_queue<std::size_t, std::vector<std::size_t>, decltype(cmp)> open(cmp);
        open.push(0);
        int leaves = 1;
        while (!open.empty() && leaves < params_.max_leaves) {
            std::size_t idx = open.top();
            open.pop();
            if (!(nodes_[idx].best.gain > 0)) break;  // heap top: nothing better remains
            auto [l, r] = apply_split(tree, nodes_[idx], rows);
            ++leaves;
            open.push(l);
            open.push(r);
        }
    }

    void grow_depth_wise(Tree& tree, std::vector<std::uint32_t>& rows) {
        std::vector<std::size_t> level{0};
        int leaves = 1;
        while (!level.empty()) {
            std::vector<std::size_t> next;
            for (std::size_t idx : level) {
                if (leaves >= params_.max_leaves) break;
                if (!(nodes_[idx].best.gain > 0)) continue;
                auto [l, r] = apply_split(tree, nodes_[idx], rows);
                ++leaves;
                next.push_back(l);
                next.push_back(r);
            }
            level = std::move(next);
        }
    }

    const std::vector<std::uint16_t>& binned_;
    const std::size_t d_;
    const FeatureBinner& binner_;
    std::span<const double> g_;
    std::span<const double> h_;
    const GbdtParams& params_;
    std::vector<std::size_t> features_;
    std::vector<std::size_t> offsets_;
    std::vector<BuildNode> nodes_;
};

// Deterministic sample of k distinct values from [0, n) (partial
// Fisher-Yates), returned sorted.
std::vector<std::size_t> sample_indices(std::size_t n, std::size_t k,
                                        std::mt19937_64& rng) {
    std::vector<std::size_t> pool(n);
    for (std::size_t i = 0; i < n; ++i) pool[i] = i;
    for (std::size_t i = 0; i < k; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, n - 1);
        std::swap(pool[i], pool[pick(rng)]);
    }
    pool.resize(k);
    std::sort(pool.begin(), pool.end());
    return pool;
}

}  // namespace

GbdtModel fit_gbdt(const FeatureMatrix& x, std::span<const int> y,
                   const GbdtParams& params) {
    validate(params);
    if (x.n_rows == 0) throw EmptyInputError("fit_gbdt: empty feature matrix");
    if (x.n_rows != y.size()) throw SchemaMismatchError("fit_gbdt: |X| != |y|");
    if (x.n_rows < 2) throw EmptyInputError("fit_gbdt: need at least 2 rows");

    const std::size_t n = x.n_rows;
    const std::size_t d = x.n_cols();

    GbdtModel model;
    model.learning_rate = params.learning_rate;
    model.schema = x.schema;
    model.schema_fp = x.schema_fingerprint();
    model.n_train_rows = static_cast<std::int64_t>(n);

    double mean = 0;
    for (int label : y) mean += label;
    mean /= static_cast<double>(n);
    mean = std::clamp(mean, 1e-6, 1.0 - 1e-6);
    model.base_score = std::log(mean / (1.0 - mean));

    FeatureBinner binner = FeatureBinner::fit(x, params.n_bins);
    std::vector<std::uint16_t> binned = binner.bin_matrix(x);

    std::vector<double> raw(n, model.base_score);
    std::vector<double> g(n), h(n);

    for (int t = 0; t < params.n_estimators; ++t) {
        std::mt19937_64 rng(derive_seed(params.seed, static_cast<std::uint64_t>(t)));

        for (std::size_t i = 0; i < n; ++i) {
            double p = sigmoid(raw[i]);
            g[i] = p - static_cast<double>(y[i]);
            h[i] = p * (1.0 - p);
        }

        std::vector<std::size_t> features;
        if (params.feature_fraction < 1.0) {
            std::size_t k = std::max<std::size_t>(
                1, static_cast<std::size_t>(
                       std::llround(params.feature_fraction * static_cast<double>(d))));
            features = sample_indices(d, std::min(k, d), rng);
        } else {
            features.resize(d);
            for (std::size_t f = 0; f < d; ++f) features[f] = f;
        }

        std::vector<std::uint32_t> rows;
        if (params.bagging_fraction < 1.0) {
            std::size_t k = std::max<std::size_t>(
                1, static_cast<std::size_t>(params.bagging_fraction *
                                            static_cast<double>(n)));
            auto sampled = sample_indices(n, std::min(k, n), rng);
            rows.assign(sampled.begin(), sampled.end());
        } else {
            rows.resize(n);
            for (std::size_t i = 0; i < n; ++i) rows[i] = static_cast<std::uint32_t>(i);
        }

        TreeBuilder builder(binned, d, binner, g, h, params, std::move(features));
        Tree tree = builder.build(rows);

        const double lr = params.learning_rate;
        constexpr std::size_t kChunk = 8192;
        const std::size_t chunks = (n + kChunk - 1) / kChunk;
        parallel_for(chunks, [&](std::size_t c) {
            const std::size_t begin = c * kChunk;
            const std::size_t end = std::min(n, begin + kChunk);
            for (std::size_t i = begin; i < end; ++i) {
                raw[i] += lr * tree.value_at(x.row(i));
            }
        });
        model.trees.push_back(std::move(tree));
    }
    return model;
}

double GbdtModel::raw_score(std::span<const double> row) const {
    double score = base_score;
    for (const auto& tree : trees) score += learning_rate * tree.value_at(row);
    return score;
}

std::vector<double> predict_raw(const GbdtModel& model, const FeatureMatrix& x) {
    if (x.schema_fingerprint() != model.schema_fp) {
        throw SchemaMismatchError("predict: feature schema does not match the model");
    }
    std::vector<double> raw(x.n_rows);
    constexpr std::size_t kChunk = 4096;
    const std::size_t chunks = (x.n_rows + kChunk - 1) / kChunk;
    parallel_for(chunks, [&](std::size_t c) {
        const std::size_t begin = c * kChunk;
        const std::size_t end = std::min(x.n_rows, begin + kChunk);
        for (std::size_t i = begin; i < end; ++i) raw[i] = model.raw_score(x.row(i));
    });
    return raw;
}

std::vector<double> predict_proba(const GbdtModel& model, const FeatureMatrix& x) {
    std::vector<double> probs = predict_raw(model, x);
    for (double& p : probs) p = sigmoid(p);
    return probs;
}

double logistic_loss(std::span<const double> raw, std::span<const int> y) {
    double total = 0;
    for (std::size_t i = 0; i < raw.size(); ++i) {
        // log(1 + e^raw) - y*raw, computed stably.
        double v = raw[i];
        double log1pexp = v > 0 ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v));
        total += log1pexp - static_cast<double>(y[i]) * v;
    }
    return total / static_cast<double>(raw.size());
}

// ---------------------------------------------------------------------------
// Serialization (JSON container, format version 1)
// ---------------------------------------------------------------------------

std::string serialize_model(const GbdtModel& model) {
    nlohmann::json j;
    j["format"] = "pathwatch-gbdt";
    j["version"] = 1;
    j["base_score"] = model.base_score;
    j["learning_rate"] = model.learning_rate;
    j["schema"] = model.schema;
    j["schema_fp"] = model.schema_fp;
    j["n_train_rows"] = model.n_train_rows;
    nlohmann::json trees = nlohmann::json::array();
    for (const auto& tree : model.trees) {
        nlohmann::json nodes = nlohmann::json::array();
        for (const auto& n : tree.nodes) {
            nodes.push_back({n.feature, n.threshold, n.left, n.right, n.value});
        }
        trees.push_back(std::move(nodes));
    }
    j["trees"] = std::move(trees);
    return j.dump();
}

GbdtModel deserialize_model(std::string_view bytes) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(bytes);
    } catch (const nlohmann::json::exception& e) {
        throw CorruptEncodingError(std::string("model container: ") + e.what());
    }
    try {
        if (j.at("format").get<std::string>() != "pathwatch-gbdt") {
            throw CorruptEncodingError("not a gbdt model container");
        }
        if (j.at("version").get<int>() != 1) {
            throw VersionMismatchError("unsupported model container version");
        }
        GbdtModel model;
        model.base_score = j.at("base_score").get<double>();
        model.learning_rate = j.at("learning_rate").get<double>();
        model.schema = j.at("schema").get<std::vector<std::string>>();
        model.schema_fp = j.at("schema_fp").get<std::uint64_t>();
        model.n_train_rows = j.at("n_train_rows").get<std::int64_t>();
        for (const auto& tree_json : j.at("trees")) {
            Tree tree;
            for (const auto& node_json : tree_json) {
                if (!node_json.is_array() || node_json.size() != 5) {
                    throw CorruptEncodingError("bad tree node");
                }
                TreeNode node;
                node.feature = node_json[0].get<int>();
                node.threshold = node_json[1].get<double>();
                node.left = node_json[2].get<int>();
                node.right = node_json[3].get<int>();
                node.value = node_json[4].get<double>();
                tree.nodes.push_back(node);
            }
            if (tree.nodes.empty()) throw CorruptEncodingError("empty tree");
            model.trees.push_back(std::move(tree));
        }
        return model;
    } catch (const nlohmann::json::exception& e) {
        throw CorruptEncodingError(std::string("model container: ") + e.what());
    }
}

}  // namespace pathwatch
