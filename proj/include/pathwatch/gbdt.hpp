#pragma once

// Histogram-based gradient-boosted decision trees with binary logistic loss.
// One engine backs the three diversified base learners, the standalone
// boosted models, and the stacking meta-model.
//
// Training: per round, gradients g = p - y and hessians h = p(1-p) are
// accumulated into per-feature histograms over quantile-spaced bins fitted
// once on the training data. Splits maximize
//   0.5 * (S(G_L,H_L) + S(G_R,H_R) - S(G_P,H_P)),
//   S(G,H) = soft(G,l1)^2 / (H + l2),  soft(G,l1) = sign(G)*max(|G|-l1, 0)
// and leaves take w* = -soft(G,l1) / (H + l2). Ties prefer the lowest
// feature index, then the lowest threshold.

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "pathwatch/features.hpp"

namespace pathwatch {

enum class Growth { kLeafWise, kDepthWise };

struct GbdtParams {
    int n_estimators = 300;
    double learning_rate = 0.05;
    int max_leaves = 31;
    int max_depth = 16;
    double feature_fraction = 1.0;  // per-tree column subsample
    double bagging_fraction = 1.0;  // per-tree row subsample
    double l1 = 0.0;
    double l2 = 1.0;
    Growth growth = Growth::kLeafWise;
    std::uint64_t seed = 0;
    int n_bins = 256;
};

void validate(const GbdtParams& params);

/// Quantile-spaced histogram bin edges, fitted once on training columns.
/// Value x falls in the first bin b with x <= edge[b]; the last bin is
/// unbounded above.
class FeatureBinner {
public:
    static FeatureBinner fit(const FeatureMatrix& x, int n_bins);

    std::uint16_t bin(std::size_t feature, double value) const;
    int bin_count(std::size_t feature) const {
        return static_cast<int>(edges_[feature].size()) + 1;
    }
    double edge(std::size_t feature, int bin) const { return edges_[feature][bin]; }
    std::size_t n_features() const { return edges_.size(); }

    /// Row-major binned copy of a matrix (same schema as the fit matrix).
    std::vector<std::uint16_t> bin_matrix(const FeatureMatrix& x) const;

private:
    std::vector<std::vector<double>> edges_;
};

struct TreeNode {
    int feature = -1;      // split feature; -1 for leaves
    double threshold = 0;  // go left when x[feature] <= threshold
    int left = -1;
    int right = -1;
    double value = 0;  // leaf weight
    bool is_leaf() const { return left < 0; }
};

struct Tree {
    std::vector<TreeNode> nodes;  // nodes[0] is the root

    double value_at(std::span<const double> row) const;
    int leaf_count() const;
    int depth() const;
};

struct GbdtModel {
    double base_score = 0;  // initial log-odds
    double learning_rate = 0;
    std::vector<Tree> trees;
    std::vector<std::string> schema;
    std::uint64_t schema_fp = 0;
    std::int64_t n_train_rows = 0;

    /// Raw additive score: base_score + sum_t lr * tree_t(x).
    double raw_score(std::span<const double> row) const;
};

GbdtModel fit_gbdt(const FeatureMatrix& x, std::span<const int> y,
                   const GbdtParams& params);

std::vector<double> predict_raw(const GbdtModel& model, const FeatureMatrix& x);
std::vector<double> predict_proba(const GbdtModel& model, const FeatureMatrix& x);

inline double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

/// Mean binary logistic loss of raw scores.
double logistic_loss(std::span<const double> raw, std::span<const int> y);

// Versioned JSON model container (format version 1).
std::string serialize_model(const GbdtModel& model);
GbdtModel deserialize_model(std::string_view bytes);

}  // namespace pathwatch
