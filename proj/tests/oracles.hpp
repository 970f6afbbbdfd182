#pragma once

// Test-only reference implementations, written independently of the library
// code paths they check: a quadratic-time feature engine, exhaustive
// axis-aligned split search for boosted trees, and a literal 2^n sign
// enumeration for the signed-rank test.

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "pathwatch/features.hpp"
#include "pathwatch/ingest.hpp"

namespace oracle {

using pathwatch::Dataset;
using pathwatch::FeatureConfig;
using pathwatch::TracerouteRecord;

inline double naive_percentile(std::vector<double> v, double rank) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    double pos = rank / 100.0 * static_cast<double>(v.size() - 1);
    std::size_t lo = static_cast<std::size_t>(pos);
    double frac = pos - static_cast<double>(lo);
    if (lo + 1 >= v.size()) return v.back();
    return v[lo] * (1.0 - frac) + v[lo + 1] * frac;
}

// Index of the immediate predecessor of row i within its path under
// (timestamp, original index) ordering, or -1. O(n) per call.
inline int naive_predecessor(const Dataset& ds, std::size_t i) {
    const auto& rec = ds.records[i];
    int best = -1;
    for (std::size_t j = 0; j < ds.records.size(); ++j) {
        if (j == i) continue;
        const auto& other = ds.records[j];
        if (other.src != rec.src || other.dst != rec.dst) continue;
        bool before = other.timestamp < rec.timestamp ||
                      (other.timestamp == rec.timestamp && j < i);
        if (!before) continue;
        if (best < 0) {
            best = static_cast<int>(j);
            continue;
        }
        const auto& cur = ds.records[static_cast<std::size_t>(best)];
        bool later = other.timestamp > cur.timestamp ||
                     (other.timestamp == cur.timestamp &&
                      j > static_cast<std::size_t>(best));
        if (later) best = static_cast<int>(j);
    }
    return best;
}

struct NaiveRow {
    std::map<std::string, double> values;
};

// Full quadratic-time re-derivation of every engineered column for one
// dataset. Column names follow pathwatch::feature_schema.
inline std::vector<NaiveRow> naive_features(const Dataset& ds, const FeatureConfig& cfg) {
    const std::size_t n = ds.records.size();
    std::vector<NaiveRow> rows(n);

    auto stat_block = [&](const TracerouteRecord& r, NaiveRow& out) {
        const auto& v = r.rtts;
        double mean = 0, var = 0, mn = 0, mx = 0;
        if (!v.empty()) {
            for (double x : v) mean += x;
            mean /= static_cast<double>(v.size());
            for (double x : v) var += (x - mean) * (x - mean);
            var /= static_cast<double>(v.size());
            mn = *std::min_element(v.begin(), v.end());
            mx = *std::max_element(v.begin(), v.end());
        }
        out.values["rtt_mean"] = mean;
        out.values["rtt_var"] = var;
        out.values["rtt_std"] = std::sqrt(var);
        out.values["rtt_min"] = mn;
        out.values["rtt_max"] = mx;
        out.values["rtt_count"] = static_cast<double>(v.size());
        for (double p : cfg.percentiles) {
            out.values["rtt_p" + pathwatch::format_double(p)] =
                v.empty() ? 0.0 : naive_percentile(v, p);
        }
        out.values["rtt_iqr"] =
            v.empty() ? 0.0 : naive_percentile(v, 75) - naive_percentile(v, 25);
        double success = r.probes_sent > 0 ? static_cast<double>(r.replies_last_hop) /
                                                 static_cast<double>(r.probes_sent)
                                           : 0.0;
        out.values["success_rate"] = success;
        out.values["loss_rate"] = r.probes_sent > 0 ? 1.0 - success : 0.0;
        out.values["probes_sent"] = static_cast<double>(r.probes_sent);
        out.values["replies_last_hop"] = static_cast<double>(r.replies_last_hop);
    };
    for (std::size_t i = 0; i < n; ++i) stat_block(ds.records[i], rows[i]);

    const std::vector<std::string> tracked = {"rtt_mean", "rtt_std", "rtt_p90",
                                              "success_rate"};
    auto tracked_value = [&](std::size_t i, const std::string& name) {
        if (name == "rtt_p90") return naive_percentile(ds.records[i].rtts, 90);
        return rows[i].values.at(name);
    };

    // Temporal block.
    for (std::size_t i = 0; i < n; ++i) {
        int j = naive_predecessor(ds, i);
        for (const auto& name : tracked) {
            double delta = 0, ratio = 0;
            if (j >= 0) {
                double xi = tracked_value(i, name);
                double xj = tracked_value(static_cast<std::size_t>(j), name);
                delta = xi - xj;
                ratio = std::clamp(xi / (xj + cfg.epsilon), cfg.ratio_clip[0],
                                   cfg.ratio_clip[1]);
            }
            rows[i].values["delta_" + name] = delta;
            rows[i].values["ratio_" + name] = ratio;
        }
        rows[i].values["delta_t"] =
            j < 0 ? 0.0
                  : static_cast<double>(ds.records[i].timestamp -
                                        ds.records[static_cast<std::size_t>(j)].timestamp);
    }

    // Rolling block: walk predecessors one at a time.
    for (std::size_t i = 0; i < n; ++i) {
        for (int w : cfg.rolling_windows) {
            std::vector<std::size_t> window{i};
            int cursor = static_cast<int>(i);
            while (static_cast<int>(window.size()) < w) {
                cursor = naive_predecessor(ds, static_cast<std::size_t>(cursor));
                if (cursor < 0) break;
                window.push_back(static_cast<std::size_t>(cursor));
            }
            for (const auto& name : tracked) {
                double mean = 0;
                for (std::size_t idx : window) mean += tracked_value(idx, name);
                mean /= static_cast<double>(window.size());
                double var = 0;
                for (std::size_t idx : window) {
                    double d = tracked_value(idx, name) - mean;
                    var += d * d;
                }
                var /= static_cast<double>(window.size());
                rows[i].values["roll" + std::to_string(w) + "_mean_" + name] = mean;
                rows[i].values["roll" + std::to_string(w) + "_std_" + name] =
                    std::sqrt(var);
            }
        }
    }

    // Aggregate block.
    struct Key {
        std::vector<std::size_t> members;
        std::set<std::string> counterparts;
    };
    std::map<std::string, Key> by_src, by_dst;
    for (std::size_t i = 0; i < n; ++i) {
        by_src[ds.records[i].src].members.push_back(i);
        by_src[ds.records[i].src].counterparts.insert(ds.records[i].dst);
        by_dst[ds.records[i].dst].members.push_back(i);
        by_dst[ds.records[i].dst].counterparts.insert(ds.records[i].src);
    }
    auto key_mean_std = [&](const std::vector<std::size_t>& members,
                            const std::string& name) {
        double mean = 0;
        for (std::size_t idx : members) mean += tracked_value(idx, name);
        mean /= static_cast<double>(members.size());
        double var = 0;
        for (std::size_t idx : members) {
            double d = tracked_value(idx, name) - mean;
            var += d * d;
        }
        var /= static_cast<double>(members.size());
        return std::pair<double, double>(mean, var > 0 ? std::sqrt(var) : 0.0);
    };
    std::vector<std::size_t> everyone(n);
    for (std::size_t i = 0; i < n; ++i) everyone[i] = i;
    for (std::size_t i = 0; i < n; ++i) {
        const auto& src_key = by_src.at(ds.records[i].src);
        const auto& dst_key = by_dst.at(ds.records[i].dst);
        rows[i].values["src_row_count"] = static_cast<double>(src_key.members.size());
        rows[i].values["src_distinct_dst"] =
            static_cast<double>(src_key.counterparts.size());
        rows[i].values["dst_row_count"] = static_cast<double>(dst_key.members.size());
        rows[i].values["dst_distinct_src"] =
            static_cast<double>(dst_key.counterparts.size());
        for (const auto& name : tracked) {
            auto [src_mean, src_std] = key_mean_std(src_key.members, name);
            auto [dst_mean, dst_std] = key_mean_std(dst_key.members, name);
            double x = tracked_value(i, name);
            rows[i].values["z_src_" + name] =
                std::clamp((x - src_mean) / (src_std + cfg.epsilon), cfg.z_clip[0],
                           cfg.z_clip[1]);
            rows[i].values["z_dst_" + name] =
                std::clamp((x - dst_mean) / (dst_std + cfg.epsilon), cfg.z_clip[0],
                           cfg.z_clip[1]);
        }
    }
    return rows;
}

// ---------------------------------------------------------------------------
// Exhaustive split search for the boosted-tree oracle
// ---------------------------------------------------------------------------

struct SplitScore {
    double gain = -1e300;
    int feature = -1;
    double threshold = 0;
};

inline double leaf_score(double g, double h, double l1, double l2) {
    double soft = g > l1 ? g - l1 : (g < -l1 ? g + l1 : 0.0);
    return h + l2 > 0 ? soft * soft / (h + l2) : 0.0;
}

// Best split over every feature and every midpoint between consecutive
// distinct values.
inline SplitScore exhaustive_best_split(const std::vector<std::vector<double>>& x,
                                        const std::vector<double>& g,
                                        const std::vector<double>& h,
                                        const std::vector<std::size_t>& rows, double l1,
                                        double l2) {
    SplitScore best;
    if (rows.size() < 2) return best;
    double g_total = 0, h_total = 0;
    for (std::size_t r : rows) {
        g_total += g[r];
        h_total += h[r];
    }
    const double parent = leaf_score(g_total, h_total, l1, l2);
    const std::size_t d = x[0].size();
    for (std::size_t f = 0; f < d; ++f) {
        std::vector<double> values;
        for (std::size_t r : rows) values.push_back(x[r][f]);
        std::sort(values.begin(), values.end());
        values.erase(std::unique(values.begin(), values.end()), values.end());
        for (std::size_t v = 0; v + 1 < values.size(); ++v) {
            double threshold = 0.5 * (values[v] + values[v + 1]);
            double g_left = 0, h_left = 0;
            for (std::size_t r : rows) {
                if (x[r][f] <= threshold) {
                    g_left += g[r];
                    h_left += h[r];
                }
            }
            double gain = 0.5 * (leaf_score(g_left, h_left, l1, l2) +
                                 leaf_score(g_total - g_left, h_total - h_left, l1, l2) -
                                 parent);
            if (gain > best.gain) {
                best.gain = gain;
                best.feature = static_cast<int>(f);
                best.threshold = threshold;
            }
        }
    }
    return best;
}

// ---------------------------------------------------------------------------
// Literal 2^n enumeration for the Wilcoxon oracle (n <= ~16)
// ---------------------------------------------------------------------------

inline double brute_wilcoxon_two_sided_p(const std::vector<double>& diffs) {
    std::vector<double> abs_diffs;
    std::vector<int> signs;
    for (double d : diffs) {
        if (d == 0) continue;
        abs_diffs.push_back(std::abs(d));
        signs.push_back(d > 0 ? 1 : -1);
    }
    const std::size_t n = abs_diffs.size();
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return abs_diffs[a] < abs_diffs[b]; });
    std::vector<double> ranks(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && abs_diffs[order[j + 1]] == abs_diffs[order[i]]) ++j;
        double avg = 0.5 * static_cast<double>(i + 1 + j + 1);
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
        i = j + 1;
    }
    double observed_plus = 0, total = 0;
    for (std::size_t k = 0; k < n; ++k) {
        total += ranks[k];
        if (signs[k] > 0) observed_plus += ranks[k];
    }
    const double mean = total / 2.0;
    const double observed_dev = std::abs(observed_plus - mean);
    std::size_t count = 0;
    const std::size_t patterns = std::size_t{1} << n;
    for (std::size_t mask = 0; mask < patterns; ++mask) {
        double plus = 0;
        for (std::size_t k = 0; k < n; ++k) {
            if (mask & (std::size_t{1} << k)) plus += ranks[k];
        }
        if (std::abs(plus - mean) >= observed_dev - 1e-9) ++count;
    }
    return static_cast<double>(count) / static_cast<double>(patterns);
}

// ---------------------------------------------------------------------------
// Random data helpers
// ---------------------------------------------------------------------------

inline Dataset random_dataset(std::size_t n_rows, std::size_t n_paths,
                              std::uint64_t seed, bool labeled = true) {
    std::mt19937_64 rng(seed);
    std::vector<TracerouteRecord> records;
    std::uniform_int_distribution<int> path_pick(0, static_cast<int>(n_paths) - 1);
    std::uniform_int_distribution<int> len_pick(0, 5);
    std::uniform_real_distribution<double> rtt_pick(0.1, 200.0);
    std::uniform_int_distribution<std::int64_t> gap(1, 500);
    std::vector<std::int64_t> clocks(n_paths, 1000000);
    for (std::size_t i = 0; i < n_rows; ++i) {
        int p = path_pick(rng);
        TracerouteRecord rec;
        rec.src = "s" + std::to_string(p % 5);
        rec.dst = "d" + std::to_string(p);
        clocks[static_cast<std::size_t>(p)] += gap(rng);
        rec.timestamp = clocks[static_cast<std::size_t>(p)];
        int len = len_pick(rng);
        for (int l = 0; l < len; ++l) rec.rtts.push_back(rtt_pick(rng));
        rec.probes_sent = len + std::uniform_int_distribution<int>(0, 2)(rng);
        rec.replies_last_hop = len;
        if (labeled) rec.label = std::uniform_int_distribution<int>(0, 1)(rng) == 0 ? 0 : 1;
        records.push_back(std::move(rec));
    }
    return pathwatch::make_dataset(std::move(records));
}

}  // namespace oracle
