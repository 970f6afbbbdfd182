#include "pathwatch/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <nlohmann/json.hpp>

#include "pathwatch/evaluate.hpp"

namespace pathwatch {

std::string to_string(BaselineKind kind) {
    switch (kind) {
        case BaselineKind::kDummy: return "dummy";
        case BaselineKind::kLogistic: return "logistic";
        case BaselineKind::kDecisionTree: return "decision_tree";
        case BaselineKind::kRandomForest: return "random_forest";
        case BaselineKind::kKnn: return "knn";
    }
    throw Error("unknown baseline kind");
}

BaselineKind baseline_kind_from_string(const std::string& name) {
    if (name == "dummy") return BaselineKind::kDummy;
    if (name == "logistic") return BaselineKind::kLogistic;
    if (name == "decision_tree") return BaselineKind::kDecisionTree;
    if (name == "random_forest") return BaselineKind::kRandomForest;
    if (name == "knn") return BaselineKind::kKnn;
    throw DataError("unknown baseline kind: " + name);
}

namespace {

void standardize_stats(const FeatureMatrix& x, std::vector<double>& means,
                       std::vector<double>& stds) {
    const std::size_t d = x.n_cols();
    means.assign(d, 0.0);
    stds.assign(d, 0.0);
    for (std::size_t r = 0; r < x.n_rows; ++r) {
        for (std::size_t c = 0; c < d; ++c) means[c] += x.at(r, c);
    }
    for (double& m : means) m /= static_cast<double>(x.n_rows);
    for (std::size_t r = 0; r < x.n_rows; ++r) {
        for (std::size_t c = 0; c < d; ++c) {
            double v = x.at(r, c) - means[c];
            stds[c] += v * v;
        }
    }
    for (double& s : stds) {
        s = std::sqrt(s / static_cast<double>(x.n_rows));
        if (s == 0.0) s = 1.0;  // constant column
    }
}

// ---------------------------------------------------------------------------
// Logistic regression, full-batch gradient descent
// ---------------------------------------------------------------------------

void fit_logistic(BaselineModel& model, const FeatureMatrix& x, std::span<const int> y) {
    const std::size_t n = x.n_rows;
    const std::size_t d = x.n_cols();
    standardize_stats(x, model.feature_means, model.feature_stds);

    std::vector<double> xs(n * d);
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < d; ++c) {
            xs[r * d + c] = (x.at(r, c) - model.feature_means[c]) / model.feature_stds[c];
        }
    }

    // Step size from the largest curvature: 0.25/n * lambda_max(X~^T X~) for
    // the logistic term (bias column included) plus the ridge term.
    std::vector<double> v(d + 1, 1.0), xv(n), xtxv(d + 1);
    double lambda_max = 1.0;
    for (int iter = 0; iter < 30; ++iter) {
        for (std::size_t r = 0; r < n; ++r) {
            double dot = v[d];
            const double* row = xs.data() + r * d;
            for (std::size_t c = 0; c < d; ++c) dot += row[c] * v[c];
            xv[r] = dot;
        }
        std::fill(xtxv.begin(), xtxv.end(), 0.0);
        for (std::size_t r = 0; r < n; ++r) {
            const double* row = xs.data() + r * d;
            for (std::size_t c = 0; c < d; ++c) xtxv[c] += row[c] * xv[r];
            xtxv[d] += xv[r];
        }
        double norm = 0;
        for (double val : xtxv) norm += val * val;
        norm = std::sqrt(norm);
        if (norm == 0) break;
        lambda_max = norm;
        for (std::size_t c = 0; c <= d; ++c) v[c] = xtxv[c] / norm;
    }
    const double lipschitz =
        0.25 * lambda_max / static_cast<double>(n) + model.params.logistic_l2 / static_cast<double>(n);
    const double step = 1.0 / std::max(lipschitz, 1e-12);

    model.weights.assign(d, 0.0);
    model.bias = 0.0;
    std::vector<double> grad(d);
    std::vector<double> margin(n);
    for (int iter = 0; iter < model.params.logistic_max_iter; ++iter) {
        for (std::size_t r = 0; r < n; ++r) {
            double z = model.bias;
            const double* row = xs.data() + r * d;
            for (std::size_t c = 0; c < d; ++c) z += row[c] * model.weights[c];
            margin[r] = sigmoid(z) - static_cast<double>(y[r]);
        }
        std::fill(grad.begin(), grad.end(), 0.0);
        double grad_bias = 0;
        for (std::size_t r = 0; r < n; ++r) {
            const double* row = xs.data() + r * d;
            for (std::size_t c = 0; c < d; ++c) grad[c] += row[c] * margin[r];
            grad_bias += margin[r];
        }
        double max_grad = std::abs(grad_bias) / static_cast<double>(n);
        for (std::size_t c = 0; c < d; ++c) {
            grad[c] = grad[c] / static_cast<double>(n) +
                      model.params.logistic_l2 * model.weights[c] / static_cast<double>(n);
            max_grad = std::max(max_grad, std::abs(grad[c]));
        }
        grad_bias /= static_cast<double>(n);
        if (max_grad < model.params.logistic_tol) break;
        for (std::size_t c = 0; c < d; ++c) model.weights[c] -= step * grad[c];
        model.bias -= step * grad_bias;
    }
}

std::vector<double> predict_logistic(const BaselineModel& model, const FeatureMatrix& x) {
    const std::size_t d = x.n_cols();
    std::vector<double> probs(x.n_rows);
    for (std::size_t r = 0; r < x.n_rows; ++r) {
        double z = model.bias;
        for (std::size_t c = 0; c < d; ++c) {
            double v = (x.at(r, c) - model.feature_means[c]) / model.feature_stds[c];
            z += v * model.weights[c];
        }
        probs[r] = sigmoid(z);
    }
    return probs;
}

// ---------------------------------------------------------------------------
// Gini histogram tree (shared by decision tree and random forest)
// ---------------------------------------------------------------------------

struct GiniBin {
    std::int32_t pos = 0;
    std::int32_t count = 0;
};

class GiniTreeBuilder {
public:
    GiniTreeBuilder(const std::vector<std::uint16_t>& binned, std::size_t d,
                    const FeatureBinner& binner, std::span<const int> y,
                    int max_depth, int mtry, std::mt19937_64* rng)
        : binned_(binned),
          d_(d),
          binner_(binner),
          y_(y),
          max_depth_(max_depth),
          mtry_(mtry),
          rng_(rng) {}

    Tree build(std::vector<std::uint32_t>& rows) {
        Tree tree;
        tree.nodes.emplace_back();
        grow(tree, 0, rows, 0, rows.size(), 0);
        return tree;
    }

private:
    void grow(Tree& tree, int node, std::vector<std::uint32_t>& rows,
              std::size_t begin, std::size_t end, int depth) {
        std::int64_t pos = 0;
        for (std::size_t i = begin; i < end; ++i) pos += y_[rows[i]];
        const std::int64_t total = static_cast<std::int64_t>(end - begin);

        auto make_leaf = [&]() {
            tree.nodes[static_cast<std::size_t>(node)].value =
                static_cast<double>(pos) / static_cast<double>(total);
        };
        if (depth >= max_depth_ || pos == 0 || pos == total || total < 2) {
            make_leaf();
            return;
        }

        // Candidate features: all of them, or an mtry-sized random draw.
        std::vector<std::size_t> features;
        if (rng_ != nullptr && mtry_ > 0 && static_cast<std::size_t>(mtry_) < d_) {
            std::vector<std::size_t> pool(d_);
            std::iota(pool.begin(), pool.end(), 0);
            for (int i = 0; i < mtry_; ++i) {
                std::uniform_int_distribution<std::size_t> pick(
                    static_cast<std::size_t>(i), d_ - 1);
                std::swap(pool[static_cast<std::size_t>(i)], pool[pick(*rng_)]);
            }
            pool.resize(static_cast<std::size_t>(mtry_));
            std::sort(pool.begin(), pool.end());
            features = std::move(pool);
        } else {
            features.resize(d_);
            std::iota(features.begin(), features.end(), 0);
        }

        // Class-count histograms for the candidate features.
        std::vector<std::size_t> offsets(features.size() + 1, 0);
        for (std::size_t j = 0; j < features.size(); ++j) {
            offsets[j + 1] = offsets[j] + static_cast<std::size_t>(binner_.bin_count(features[j]));
        }
        std::vector<GiniBin> hist(offsets.back());
        for (std::size_t i = begin; i < end; ++i) {
            const std::uint32_t r = rows[i];
            const std::uint16_t* row_bins = binned_.data() + static_cast<std::size_t>(r) * d_;
            for (std::size_t j = 0; j < features.size(); ++j) {
                GiniBin& bin = hist[offsets[j] + row_bins[features[j]]];
                bin.count += 1;
                bin.pos += y_[r];
            }
        }

        // Weighted Gini: impurity(n, p) = 2 p (n-p) / n summed over children.
        auto weighted = [](std::int64_t count, std::int64_t positives) {
            return count == 0 ? 0.0
                              : 2.0 * static_cast<double>(positives) *
                                    static_cast<double>(count - positives) /
                                    static_cast<double>(count);
        };
        const double parent_impurity = weighted(total, pos);
        double best_decrease = 1e-12;
        int best_feature = -1;
        int best_bin = -1;
        for (std::size_t j = 0; j < features.size(); ++j) {
            const int bins = binner_.bin_count(features[j]);
            std::int64_t left_count = 0, left_pos = 0;
            for (int b = 0; b + 1 < bins; ++b) {
                const GiniBin& hb = hist[offsets[j] + static_cast<std::size_t>(b)];
                left_count += hb.count;
                left_pos += hb.pos;
                if (left_count == 0) continue;
                if (left_count == total) break;
                double decrease = parent_impurity - weighted(left_count, left_pos) -
                                  weighted(total - left_count, pos - left_pos);
                if (decrease > best_decrease) {
                    best_decrease = decrease;
                    best_feature = static_cast<int>(features[j]);
                    best_bin = b;
                }
            }
        }
        if (best_feature < 0) {
            make_leaf();
            return;
        }

        auto mid_it = std::partition(
            rows.begin() + static_cast<std::ptrdiff_t>(begin),
            rows.begin() + static_cast<std::ptrdiff_t>(end), [&](std::uint32_t r) {
                return binned_[static_cast<std::size_t>(r) * d_ +
                               static_cast<std::size_t>(best_feature)] <= best_bin;
            });
        const std::size_t mid = static_cast<std::size_t>(mid_it - rows.begin());

        const int left = static_cast<int>(tree.nodes.size());
        tree.nodes.emplace_back();
        tree.nodes.emplace_back();
        TreeNode& parent = tree.nodes[static_cast<std::size_t>(node)];
        parent.feature = best_feature;
        parent.threshold = binner_.edge(static_cast<std::size_t>(best_feature), best_bin);
        parent.left = left;
        parent.right = left + 1;

        grow(tree, left, rows, begin, mid, depth + 1);
        grow(tree, left + 1, rows, mid, end, depth + 1);
    }

    const std::vector<std::uint16_t>& binned_;
    const std::size_t d_;
    const FeatureBinner& binner_;
    std::span<const int> y_;
    const int max_depth_;
    const int mtry_;
    std::mt19937_64* rng_;
};

void fit_tree_or_forest(BaselineModel& model, const FeatureMatrix& x,
                        std::span<const int> y) {
    const std::size_t n = x.n_rows;
    FeatureBinner binner = FeatureBinner::fit(x, model.params.n_bins);
    std::vector<std::uint16_t> binned = binner.bin_matrix(x);

    const bool forest = model.kind == BaselineKind::kRandomForest;
    const int n_trees = forest ? model.params.forest_size : 1;
    int mtry = 0;
    if (forest) {
        mtry = model.params.forest_mtry > 0
                   ? model.params.forest_mtry
                   : static_cast<int>(std::lround(std::sqrt(static_cast<double>(x.n_cols()))));
        mtry = std::min<int>(mtry, static_cast<int>(x.n_cols()));
    }

    model.trees.assign(static_cast<std::size_t>(n_trees), Tree{});
    parallel_for(static_cast<std::size_t>(n_trees), [&](std::size_t t) {
        std::mt19937_64 rng(derive_seed(model.params.seed, t));
        std::vector<std::uint32_t> rows;
        rows.reserve(n);
        if (forest && model.params.forest_bootstrap) {
            std::uniform_int_distribution<std::size_t> pick(0, n - 1);
            for (std::size_t i = 0; i < n; ++i) {
                rows.push_back(static_cast<std::uint32_t>(pick(rng)));
            }
        } else {
            for (std::size_t i = 0; i < n; ++i) rows.push_back(static_cast<std::uint32_t>(i));
        }
        GiniTreeBuilder builder(binned, x.n_cols(), binner, y, model.params.tree_max_depth,
                                mtry, forest ? &rng : nullptr);
        model.trees[t] = builder.build(rows);
    });
}

std::vector<double> predict_trees(const BaselineModel& model, const FeatureMatrix& x) {
    std::vector<double> probs(x.n_rows, 0.0);
    constexpr std::size_t kChunk = 4096;
    const std::size_t chunks = (x.n_rows + kChunk - 1) / kChunk;
    parallel_for(chunks, [&](std::size_t c) {
        const std::size_t begin = c * kChunk;
        const std::size_t end = std::min(x.n_rows, begin + kChunk);
        for (std::size_t i = begin; i < end; ++i) {
            double sum = 0;
            for (const auto& tree : model.trees) sum += tree.value_at(x.row(i));
            probs[i] = sum / static_cast<double>(model.trees.size());
        }
    });
    return probs;
}

// ---------------------------------------------------------------------------
// k-nearest neighbours (brute force on standardized features)
// ---------------------------------------------------------------------------

void fit_knn(BaselineModel& model, const FeatureMatrix& x, std::span<const int> y) {
    standardize_stats(x, model.feature_means, model.feature_stds);
    const std::size_t d = x.n_cols();
    model.train_points.resize(x.n_rows * d);
    for (std::size_t r = 0; r < x.n_rows; ++r) {
        for (std::size_t c = 0; c < d; ++c) {
            model.train_points[r * d + c] = static_cast<float>(
                (x.at(r, c) - model.feature_means[c]) / model.feature_stds[c]);
        }
    }
    model.train_labels.assign(y.begin(), y.end());
}

std::vector<double> predict_knn(const BaselineModel& model, const FeatureMatrix& x) {
    const std::size_t d = x.n_cols();
    const std::size_t n_train = model.train_labels.size();
    const std::size_t k =
        std::min<std::size_t>(static_cast<std::size_t>(model.params.knn_k), n_train);
    std::vector<double> probs(x.n_rows, 0.0);

    parallel_for(x.n_rows, [&](std::size_t q) {
        std::vector<float> query(d);
        for (std::size_t c = 0; c < d; ++c) {
            query[c] = static_cast<float>((x.at(q, c) - model.feature_means[c]) /
                                          model.feature_stds[c]);
        }
        std::vector<std::pair<float, std::uint32_t>> dists(n_train);
        for (std::size_t r = 0; r < n_train; ++r) {
            const float* row = model.train_points.data() + r * d;
            float acc = 0;
            for (std::size_t c = 0; c < d; ++c) {
                float diff = query[c] - row[c];
                acc += diff * diff;
            }
            dists[r] = {acc, static_cast<std::uint32_t>(r)};
        }
        std::nth_element(dists.begin(), dists.begin() + static_cast<std::ptrdiff_t>(k - 1),
                         dists.end());
        std::sort(dists.begin(), dists.begin() + static_cast<std::ptrdiff_t>(k));
        std::int64_t pos = 0;
        for (std::size_t i = 0; i < k; ++i) pos += model.train_labels[dists[i].second];
        probs[q] = static_cast<double>(pos) / static_cast<double>(k);
    });
    return probs;
}

}  // namespace

BaselineModel fit_baseline(BaselineKind kind, const FeatureMatrix& x,
                           std::span<const int> y, const BaselineParams& params) {
    if (x.n_rows == 0) throw EmptyInputError("fit_baseline: empty input");
    if (x.n_rows != y.size()) throw SchemaMismatchError("fit_baseline: |X| != |y|");
    if (params.knn_k < 1 || params.forest_size < 1 || params.tree_max_depth < 1 ||
        params.logistic_max_iter < 1 || params.logistic_l2 < 0 || params.n_bins < 2) {
        throw InvalidConfigError("fit_baseline: bad hyperparameters");
    }

    std::int64_t positives = 0;
    for (int label : y) positives += label;
    if (kind != BaselineKind::kDummy &&
        (positives == 0 || positives == static_cast<std::int64_t>(y.size()))) {
        throw SingleClassError("fit_baseline: both classes required for " + to_string(kind));
    }

    BaselineModel model;
    model.kind = kind;
    model.params = params;
    model.schema = x.schema;
    model.schema_fp = x.schema_fingerprint();

    switch (kind) {
        case BaselineKind::kDummy:
            model.constant = static_cast<double>(positives) / static_cast<double>(x.n_rows);
            break;
        case BaselineKind::kLogistic:
            fit_logistic(model, x, y);
            break;
        case BaselineKind::kDecisionTree:
        case BaselineKind::kRandomForest:
            fit_tree_or_forest(model, x, y);
            break;
        case BaselineKind::kKnn:
            fit_knn(model, x, y);
            break;
    }
    return model;
}

std::vector<double> predict_baseline(const BaselineModel& model, const FeatureMatrix& x) {
    if (x.schema_fingerprint() != model.schema_fp) {
        throw SchemaMismatchError("predict_baseline: schema mismatch");
    }
    switch (model.kind) {
        case BaselineKind::kDummy:
            return std::vector<double>(x.n_rows, model.constant);
        case BaselineKind::kLogistic:
            return predict_logistic(model, x);
        case BaselineKind::kDecisionTree:
        case BaselineKind::kRandomForest:
            return predict_trees(model, x);
        case BaselineKind::kKnn:
            return predict_knn(model, x);
    }
    throw Error("unknown baseline kind");
}

TunedBaseline tune_baseline(BaselineKind kind, const FeatureMatrix& x,
                            std::span<const int> y, std::uint64_t seed) {
    BaselineParams params;
    params.seed = seed;
    if (kind == BaselineKind::kDummy) {
        // Nothing to tune; the constant prediction gets the default cutoff.
        return {fit_baseline(kind, x, y, params), 0.5, 0.0};
    }

    // Stratified 75/25 holdout for grid selection.
    std::vector<std::size_t> pos_idx, neg_idx;
    for (std::size_t i = 0; i < y.size(); ++i) {
        (y[i] == 1 ? pos_idx : neg_idx).push_back(i);
    }
    std::mt19937_64 rng(derive_seed(seed, 0x6772696Aull));
    std::shuffle(pos_idx.begin(), pos_idx.end(), rng);
    std::shuffle(neg_idx.begin(), neg_idx.end(), rng);
    std::vector<std::size_t> valid_rows, fit_rows;
    auto deal = [&](const std::vector<std::size_t>& idx) {
        std::size_t n_valid = std::max<std::size_t>(1, idx.size() / 4);
        for (std::size_t i = 0; i < idx.size(); ++i) {
            (i < n_valid ? valid_rows : fit_rows).push_back(idx[i]);
        }
    };
    deal(pos_idx);
    deal(neg_idx);
    std::sort(valid_rows.begin(), valid_rows.end());
    std::sort(fit_rows.begin(), fit_rows.end());

    FeatureMatrix x_fit = x.select_rows(fit_rows);
    FeatureMatrix x_valid = x.select_rows(valid_rows);
    std::vector<int> y_fit, y_valid;
    for (std::size_t i : fit_rows) y_fit.push_back(y[i]);
    for (std::size_t i : valid_rows) y_valid.push_back(y[i]);

    auto candidates = [&]() -> std::vector<BaselineParams> {
        std::vector<BaselineParams> grid;
        auto base = params;
        switch (kind) {
            case BaselineKind::kLogistic:
                for (double l2 : {0.1, 1.0, 10.0}) {
                    base.logistic_l2 = l2;
                    grid.push_back(base);
                }
                break;
            case BaselineKind::kDecisionTree:
                for (int depth : {4, 8, 16}) {
                    base.tree_max_depth = depth;
                    grid.push_back(base);
                }
                break;
            case BaselineKind::kRandomForest:
                for (int size : {50, 100, 200}) {
                    base.forest_size = size;
                    grid.push_back(base);
                }
                break;
            case BaselineKind::kKnn:
                for (int k : {5, 15, 31}) {
                    base.knn_k = k;
                    grid.push_back(base);
                }
                break;
            default:
                grid.push_back(base);
        }
        return grid;
    }();

    // Candidates are independent fits; evaluate them in parallel and pick
    // by index order so the selection is scheduling-invariant.
    std::vector<ThresholdScanResult> scans(candidates.size());
    parallel_for(candidates.size(), [&](std::size_t i) {
        auto model = fit_baseline(kind, x_fit, y_fit, candidates[i]);
        auto probs = predict_baseline(model, x_valid);
        try {
            scans[i] = threshold_scan(probs, y_valid);
        } catch (const SingleClassError&) {
            scans[i] = {0.5, 0.0};
        }
    });
    std::size_t best_idx = 0;
    for (std::size_t i = 1; i < candidates.size(); ++i) {
        if (scans[i].f1 > scans[best_idx].f1) best_idx = i;
    }
    TunedBaseline tuned;
    tuned.model = fit_baseline(kind, x, y, candidates[best_idx]);
    tuned.threshold = scans[best_idx].threshold;
    tuned.holdout_f1 = scans[best_idx].f1;
    return tuned;
}

// ---------------------------------------------------------------------------
// Serialization (kind-tagged container, format version 1)
// ---------------------------------------------------------------------------

std::string serialize_baseline(const BaselineModel& model) {
    nlohmann::json j;
    j["format"] = "pathwatch-baseline";
    j["version"] = 1;
    j["kind"] = to_string(model.kind);
    j["schema"] = model.schema;
    j["schema_fp"] = model.schema_fp;
    j["params"] = {{"logistic_l2", model.params.logistic_l2},
                   {"logistic_max_iter", model.params.logistic_max_iter},
                   {"logistic_tol", model.params.logistic_tol},
                   {"tree_max_depth", model.params.tree_max_depth},
                   {"n_bins", model.params.n_bins},
                   {"forest_size", model.params.forest_size},
                   {"forest_bootstrap", model.params.forest_bootstrap},
                   {"forest_mtry", model.params.forest_mtry},
                   {"knn_k", model.params.knn_k},
                   {"seed", model.params.seed}};
    j["constant"] = model.constant;
    j["weights"] = model.weights;
    j["bias"] = model.bias;
    j["feature_means"] = model.feature_means;
    j["feature_stds"] = model.feature_stds;
    nlohmann::json trees = nlohmann::json::array();
    for (const auto& tree : model.trees) {
        nlohmann::json nodes = nlohmann::json::array();
        for (const auto& n : tree.nodes) {
            nodes.push_back({n.feature, n.threshold, n.left, n.right, n.value});
        }
        trees.push_back(std::move(nodes));
    }
    j["trees"] = std::move(trees);
    j["train_points"] = model.train_points;
    j["train_labels"] = model.train_labels;
    return j.dump();
}

BaselineModel deserialize_baseline(std::string_view bytes) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(bytes);
    } catch (const nlohmann::json::exception& e) {
        throw CorruptEncodingError(std::string("baseline container: ") + e.what());
    }
    try {
        if (j.at("format").get<std::string>() != "pathwatch-baseline") {
            throw CorruptEncodingError("not a baseline model container");
        }
        if (j.at("version").get<int>() != 1) {
            throw VersionMismatchError("unsupported baseline container version");
        }
        BaselineModel model;
        model.kind = baseline_kind_from_string(j.at("kind").get<std::string>());
        model.schema = j.at("schema").get<std::vector<std::string>>();
        model.schema_fp = j.at("schema_fp").get<std::uint64_t>();
        const auto& p = j.at("params");
        model.params.logistic_l2 = p.at("logistic_l2").get<double>();
        model.params.logistic_max_iter = p.at("logistic_max_iter").get<int>();
        model.params.logistic_tol = p.at("logistic_tol").get<double>();
        model.params.tree_max_depth = p.at("tree_max_depth").get<int>();
        model.params.n_bins = p.at("n_bins").get<int>();
        model.params.forest_size = p.at("forest_size").get<int>();
        model.params.forest_bootstrap = p.at("forest_bootstrap").get<bool>();
        model.params.forest_mtry = p.at("forest_mtry").get<int>();
        model.params.knn_k = p.at("knn_k").get<int>();
        model.params.seed = p.at("seed").get<std::uint64_t>();
        model.constant = j.at("constant").get<double>();
        model.weights = j.at("weights").get<std::vector<double>>();
        model.bias = j.at("bias").get<double>();
        model.feature_means = j.at("feature_means").get<std::vector<double>>();
        model.feature_stds = j.at("feature_stds").get<std::vector<double>>();
        for (const auto& tree_json : j.at("trees")) {
            Tree tree;
            for (const auto& node_json : tree_json) {
                TreeNode node;
                node.feature = node_json.at(0).get<int>();
                node.threshold = node_json.at(1).get<double>();
                node.left = node_json.at(2).get<int>();
                node.right = node_json.at(3).get<int>();
                node.value = node_json.at(4).get<double>();
                tree.nodes.push_back(node);
            }
            model.trees.push_back(std::move(tree));
        }
        model.train_points = j.at("train_points").get<std::vector<float>>();
        model.train_labels = j.at("train_labels").get<std::vector<int>>();
        return model;
    } catch (const nlohmann::json::exception& e) {
        throw CorruptEncodingError(std::string("baseline container: ") + e.what());
    }
}

}  // namespace pathwatch
