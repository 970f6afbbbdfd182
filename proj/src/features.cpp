#include "pathwatch/features.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>
#include <unordered_set>

#include <nlohmann/json.hpp>

namespace pathwatch {

const std::array<std::string, kTrackedCount> kTrackedNames = {
    "rtt_mean", "rtt_std", "rtt_p90", "success_rate"};

void validate(const FeatureConfig& config) {
    if (!(config.epsilon > 0)) throw InvalidConfigError("epsilon must be > 0");
    if (!(config.ratio_clip[0] <= 1.0 && 1.0 <= config.ratio_clip[1])) {
        throw InvalidConfigError("ratio_clip must contain 1");
    }
    if (!(config.z_clip[0] <= 0.0 && 0.0 <= config.z_clip[1])) {
        throw InvalidConfigError("z_clip must contain 0");
    }
    for (int w : config.rolling_windows) {
        if (w < 2) throw InvalidConfigError("rolling windows must be >= 2");
    }
    for (double p : config.percentiles) {
        if (!(p > 0 && p < 100)) throw InvalidConfigError("percentile ranks must be in (0,100)");
    }
}

double percentile(std::span<const double> values, double rank) {
    if (values.empty()) return 0.0;
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    if (sorted.size() == 1) return sorted[0];
    // Linear interpolation between closest order statistics, inclusive ranks.
    double pos = rank / 100.0 * static_cast<double>(sorted.size() - 1);
    auto lo = static_cast<std::size_t>(std::floor(pos));
    auto hi = static_cast<std::size_t>(std::ceil(pos));
    double frac = pos - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

TraceStats per_trace_stats(const TracerouteRecord& record, const FeatureConfig& config) {
    TraceStats stats;
    stats.percentile_values.assign(config.percentiles.size(), 0.0);
    const auto& rtts = record.rtts;
    stats.count = static_cast<double>(rtts.size());
    if (!rtts.empty()) {
        double sum = 0;
        for (double v : rtts) sum += v;
        stats.mean = sum / stats.count;
        double ss = 0;
        for (double v : rtts) ss += (v - stats.mean) * (v - stats.mean);
        stats.variance = ss / stats.count;
        stats.stddev = std::sqrt(stats.variance);
        stats.min = *std::min_element(rtts.begin(), rtts.end());
        stats.max = *std::max_element(rtts.begin(), rtts.end());
        for (std::size_t i = 0; i < config.percentiles.size(); ++i) {
            stats.percentile_values[i] = percentile(rtts, config.percentiles[i]);
        }
        stats.iqr = percentile(rtts, 75) - percentile(rtts, 25);
    }
    if (record.probes_sent > 0) {
        stats.success_rate = static_cast<double>(record.replies_last_hop) /
                             static_cast<double>(record.probes_sent);
        stats.loss_rate = 1.0 - stats.success_rate;
    }
    return stats;
}

std::vector<double> temporal_gaps(std::span<const std::int64_t> timestamps) {
    std::vector<double> gaps(timestamps.size(), 0.0);
    for (std::size_t i = 1; i < timestamps.size(); ++i) {
        if (timestamps[i] < timestamps[i - 1]) {
            throw UnsortedInputError("path rows must be sorted by timestamp");
        }
        gaps[i] = static_cast<double>(timestamps[i] - timestamps[i - 1]);
    }
    return gaps;
}

TemporalColumns temporal_deltas(std::span<const double> values,
                                const FeatureConfig& config) {
    TemporalColumns out;
    out.delta.assign(values.size(), 0.0);
    out.ratio.assign(values.size(), 0.0);
    for (std::size_t i = 1; i < values.size(); ++i) {
        out.delta[i] = values[i] - values[i - 1];
        double raw = values[i] / (values[i - 1] + config.epsilon);
        out.ratio[i] = std::clamp(raw, config.ratio_clip[0], config.ratio_clip[1]);
    }
    return out;
}

RollingColumns rolling_stats(std::span<const double> values, int window) {
    RollingColumns out;
    out.mean.assign(values.size(), 0.0);
    out.stddev.assign(values.size(), 0.0);
    for (std::size_t i = 0; i < values.size(); ++i) {
        std::size_t begin = i + 1 >= static_cast<std::size_t>(window)
                                ? i + 1 - static_cast<std::size_t>(window)
                                : 0;
        double n = static_cast<double>(i - begin + 1);
        double sum = 0;
        for (std::size_t j = begin; j <= i; ++j) sum += values[j];
        double mean = sum / n;
        double ss = 0;
        for (std::size_t j = begin; j <= i; ++j) ss += (values[j] - mean) * (values[j] - mean);
        out.mean[i] = mean;
        out.stddev[i] = std::sqrt(ss / n);
    }
    return out;
}

namespace {

struct Accumulator {
    std::int64_t count = 0;
    TrackedRow sum{};
    TrackedRow sum_sq{};
    std::unordered_set<std::string> counterparts;

    void add(const TrackedRow& row, const std::string& counterpart) {
        ++count;
        for (std::size_t i = 0; i < kTrackedCount; ++i) {
            sum[i] += row[i];
            sum_sq[i] += row[i] * row[i];
        }
        counterparts.insert(counterpart);
    }

    KeyAggregate finish() const {
        KeyAggregate agg;
        agg.row_count = count;
        agg.distinct_counterparts = static_cast<std::int64_t>(counterparts.size());
        double n = static_cast<double>(count);
        for (std::size_t i = 0; i < kTrackedCount; ++i) {
            agg.mean[i] = sum[i] / n;
            double var = sum_sq[i] / n - agg.mean[i] * agg.mean[i];
            agg.stddev[i] = var > 0 ? std::sqrt(var) : 0.0;
        }
        return agg;
    }
};

}  // namespace

AggregateTables fit_aggregates(std::span<const std::string> src,
                               std::span<const std::string> dst,
                               std::span<const TrackedRow> tracked) {
    if (tracked.empty()) throw EmptyInputError("fit_aggregates needs at least one row");
    if (src.size() != tracked.size() || dst.size() != tracked.size()) {
        throw DataError("fit_aggregates: key/feature length mismatch");
    }
    std::unordered_map<std::string, Accumulator> by_src, by_dst;
    Accumulator global;
    for (std::size_t i = 0; i < tracked.size(); ++i) {
        by_src[src[i]].add(tracked[i], dst[i]);
        by_dst[dst[i]].add(tracked[i], src[i]);
        global.add(tracked[i], dst[i]);
    }
    AggregateTables tables;
    for (const auto& [key, acc] : by_src) tables.per_src[key] = acc.finish();
    for (const auto& [key, acc] : by_dst) tables.per_dst[key] = acc.finish();
    tables.global = global.finish();
    tables.global.distinct_counterparts = 0;
    return tables;
}

AggregateRowFeatures apply_aggregates(const std::string& src, const std::string& dst,
                                      const TrackedRow& tracked,
                                      const AggregateTables& tables,
                                      const FeatureConfig& config) {
    auto zscores = [&](const KeyAggregate& agg, TrackedRow& out) {
        for (std::size_t i = 0; i < kTrackedCount; ++i) {
            double z = (tracked[i] - agg.mean[i]) / (agg.stddev[i] + config.epsilon);
            out[i] = std::clamp(z, config.z_clip[0], config.z_clip[1]);
        }
    };
    AggregateRowFeatures row;
    auto s = tables.per_src.find(src);
    if (s != tables.per_src.end()) {
        row.src_row_count = static_cast<double>(s->second.row_count);
        row.src_distinct = static_cast<double>(s->second.distinct_counterparts);
        zscores(s->second, row.z_src);
    } else {
        // Unseen source: z against the global statistics, no count history.
        zscores(tables.global, row.z_src);
    }
    auto d = tables.per_dst.find(dst);
    if (d != tables.per_dst.end()) {
        row.dst_row_count = static_cast<double>(d->second.row_count);
        row.dst_distinct = static_cast<double>(d->second.distinct_counterparts);
        zscores(d->second, row.z_dst);
    } else {
        zscores(tables.global, row.z_dst);
    }
    return row;
}

std::size_t FeatureMatrix::column(const std::string& name) const {
    for (std::size_t i = 0; i < schema.size(); ++i) {
        if (schema[i] == name) return i;
    }
    throw MissingColumnError(name);
}

FeatureMatrix FeatureMatrix::select_rows(std::span<const std::size_t> rows) const {
    FeatureMatrix out;
    out.schema = schema;
    out.n_rows = rows.size();
    out.data.reserve(rows.size() * schema.size());
    for (std::size_t r : rows) {
        auto row_span = row(r);
        out.data.insert(out.data.end(), row_span.begin(), row_span.end());
        if (!labels.empty()) out.labels.push_back(labels[r]);
    }
    return out;
}

std::string FeatureMatrix::to_csv() const {
    std::string out;
    for (std::size_t c = 0; c < schema.size(); ++c) {
        if (c) out += ',';
        out += schema[c];
    }
    if (!labels.empty()) out += ",route_changed";
    out += '\n';
    for (std::size_t r = 0; r < n_rows; ++r) {
        for (std::size_t c = 0; c < schema.size(); ++c) {
            if (c) out += ',';
            out += format_double(at(r, c));
        }
        if (!labels.empty()) {
            out += ',';
            out += std::to_string(labels[r]);
        }
        out += '\n';
    }
    return out;
}

std::vector<std::string> feature_schema(const FeatureConfig& config) {
    std::vector<std::string> schema = {"rtt_mean", "rtt_var", "rtt_std",
                                       "rtt_min", "rtt_max", "rtt_count"};
    for (double p : config.percentiles) {
        schema.push_back("rtt_p" + format_double(p));
    }
    schema.insert(schema.end(), {"rtt_iqr", "success_rate", "loss_rate",
                                 "probes_sent", "replies_last_hop"});
    for (const auto& name : kTrackedNames) {
        schema.push_back("delta_" + name);
        schema.push_back("ratio_" + name);
    }
    schema.push_back("delta_t");
    for (int w : config.rolling_windows) {
        for (const auto& name : kTrackedNames) {
            schema.push_back("roll" + std::to_string(w) + "_mean_" + name);
            schema.push_back("roll" + std::to_string(w) + "_std_" + name);
        }
    }
    schema.insert(schema.end(), {"src_row_count", "src_distinct_dst"});
    for (const auto& name : kTrackedNames) schema.push_back("z_src_" + name);
    schema.insert(schema.end(), {"dst_row_count", "dst_distinct_src"});
    for (const auto& name : kTrackedNames) schema.push_back("z_dst_" + name);
    return schema;
}

std::pair<FeatureMatrix, AggregateTables> build_features(
    const Dataset& dataset, const FeatureConfig& config,
    const std::optional<AggregateTables>& tables) {
    validate(config);
    const std::size_t n = dataset.records.size();

    FeatureMatrix matrix;
    matrix.schema = feature_schema(config);
    matrix.n_rows = n;
    matrix.data.assign(n * matrix.schema.size(), 0.0);
    if (dataset.labeled) matrix.labels = dataset.labels();

    // Per-trace statistics and the tracked scalars.
    std::vector<TraceStats> stats(n);
    std::vector<TrackedRow> tracked(n);
    parallel_for(n, [&](std::size_t i) {
        stats[i] = per_trace_stats(dataset.records[i], config);
        double p90 = percentile(dataset.records[i].rtts, 90);
        tracked[i] = {stats[i].mean, stats[i].stddev, p90, stats[i].success_rate};
    });

    // Group rows by path; within a path order by (timestamp, original index).
    std::unordered_map<std::string, std::size_t> path_index;
    std::vector<std::vector<std::size_t>> paths;
    for (std::size_t i = 0; i < n; ++i) {
        const auto& rec = dataset.records[i];
        std::string key = rec.src + '\x1f' + rec.dst;
        auto [it, inserted] = path_index.emplace(std::move(key), paths.size());
        if (inserted) paths.emplace_back();
        paths[it->second].push_back(i);
    }
    for (auto& rows : paths) {
        std::stable_sort(rows.begin(), rows.end(), [&](std::size_t a, std::size_t b) {
            return dataset.records[a].timestamp < dataset.records[b].timestamp;
        });
    }

    const std::size_t d = matrix.schema.size();
    const std::size_t col_delta0 = matrix.column("delta_" + kTrackedNames[0]);
    const std::size_t col_delta_t = matrix.column("delta_t");
    const std::size_t col_roll0 = col_delta_t + 1;  // first rolling column, if any

    // Temporal and rolling blocks, one path at a time.
    parallel_for(paths.size(), [&](std::size_t p) {
        const auto& rows = paths[p];
        const std::size_t m = rows.size();
        std::vector<std::int64_t> ts(m);
        for (std::size_t j = 0; j < m; ++j) ts[j] = dataset.records[rows[j]].timestamp;
        auto gaps = temporal_gaps(ts);

        std::array<std::vector<double>, kTrackedCount> series;
        for (std::size_t f = 0; f < kTrackedCount; ++f) {
            series[f].resize(m);
            for (std::size_t j = 0; j < m; ++j) series[f][j] = tracked[rows[j]][f];
        }

        for (std::size_t f = 0; f < kTrackedCount; ++f) {
            auto cols = temporal_deltas(series[f], config);
            for (std::size_t j = 0; j < m; ++j) {
                double* out = matrix.data.data() + rows[j] * d;
                out[col_delta0 + 2 * f] = cols.delta[j];
                out[col_delta0 + 2 * f + 1] = cols.ratio[j];
            }
        }
        for (std::size_t j = 0; j < m; ++j) {
            matrix.data[rows[j] * d + col_delta_t] = gaps[j];
        }

        for (std::size_t w = 0; w < config.rolling_windows.size(); ++w) {
            for (std::size_t f = 0; f < kTrackedCount; ++f) {
                auto roll = rolling_stats(series[f], config.rolling_windows[w]);
                std::size_t base = col_roll0 + w * 2 * kTrackedCount + 2 * f;
                for (std::size_t j = 0; j < m; ++j) {
                    double* out = matrix.data.data() + rows[j] * d;
                    out[base] = roll.mean[j];
                    out[base + 1] = roll.stddev[j];
                }
            }
        }
    });

    // Aggregate block.
    AggregateTables fitted;
    if (tables) {
        fitted = *tables;
    } else {
        std::vector<std::string> src(n), dst(n);
        for (std::size_t i = 0; i < n; ++i) {
            src[i] = dataset.records[i].src;
            dst[i] = dataset.records[i].dst;
        }
        fitted = fit_aggregates(src, dst, tracked);
    }
    const std::size_t col_src_count = matrix.column("src_row_count");
    parallel_for(n, [&](std::size_t i) {
        const auto& rec = dataset.records[i];
        auto agg = apply_aggregates(rec.src, rec.dst, tracked[i], fitted, config);
        double* out = matrix.data.data() + i * d + col_src_count;
        *out++ = agg.src_row_count;
        *out++ = agg.src_distinct;
        for (double z : agg.z_src) *out++ = z;
        *out++ = agg.dst_row_count;
        *out++ = agg.dst_distinct;
        for (double z : agg.z_dst) *out++ = z;
    });

    // Per-trace block last (cheap, sequential layout).
    parallel_for(n, [&](std::size_t i) {
        const auto& rec = dataset.records[i];
        const auto& st = stats[i];
        double* out = matrix.data.data() + i * d;
        *out++ = st.mean;
        *out++ = st.variance;
        *out++ = st.stddev;
        *out++ = st.min;
        *out++ = st.max;
        *out++ = st.count;
        for (double q : st.percentile_values) *out++ = q;
        *out++ = st.iqr;
        *out++ = st.success_rate;
        *out++ = st.loss_rate;
        *out++ = static_cast<double>(rec.probes_sent);
        *out++ = static_cast<double>(rec.replies_last_hop);
    });

    for (double v : matrix.data) {
        if (!std::isfinite(v)) throw Error("internal: non-finite feature value");
    }
    return {std::move(matrix), std::move(fitted)};
}

namespace {

nlohmann::json aggregate_to_json(const KeyAggregate& agg) {
    return {{"rows", agg.row_count},
            {"distinct", agg.distinct_counterparts},
            {"mean", agg.mean},
            {"std", agg.stddev}};
}

KeyAggregate aggregate_from_json(const nlohmann::json& j) {
    KeyAggregate agg;
    agg.row_count = j.at("rows").get<std::int64_t>();
    agg.distinct_counterparts = j.at("distinct").get<std::int64_t>();
    auto mean = j.at("mean").get<std::vector<double>>();
    auto stddev = j.at("std").get<std::vector<double>>();
    if (mean.size() != kTrackedCount || stddev.size() != kTrackedCount) {
        throw CorruptEncodingError("aggregate entry has wrong width");
    }
    std::copy(mean.begin(), mean.end(), agg.mean.begin());
    std::copy(stddev.begin(), stddev.end(), agg.stddev.begin());
    return agg;
}

}  // namespace

std::string serialize_feature_state(const FeatureConfig& config,
                                    const AggregateTables& tables) {
    nlohmann::json j;
    j["format"] = "pathwatch-features";
    j["version"] = 1;
    j["config"] = {{"epsilon", config.epsilon},
                   {"ratio_clip", config.ratio_clip},
                   {"z_clip", config.z_clip},
                   {"rolling_windows", config.rolling_windows},
                   {"percentiles", config.percentiles}};
    nlohmann::json src = nlohmann::json::object();
    for (const auto& [key, agg] : tables.per_src) src[key] = aggregate_to_json(agg);
    nlohmann::json dst = nlohmann::json::object();
    for (const auto& [key, agg] : tables.per_dst) dst[key] = aggregate_to_json(agg);
    j["per_src"] = std::move(src);
    j["per_dst"] = std::move(dst);
    j["global"] = aggregate_to_json(tables.global);
    return j.dump();
}

std::pair<FeatureConfig, AggregateTables> deserialize_feature_state(
    std::string_view text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw CorruptEncodingError(std::string("feature state: ") + e.what());
    }
    try {
        if (j.at("format").get<std::string>() != "pathwatch-features") {
            throw CorruptEncodingError("not a feature-state file");
        }
        if (j.at("version").get<int>() != 1) {
            throw VersionMismatchError("unsupported feature-state version");
        }
        FeatureConfig config;
        const auto& c = j.at("config");
        config.epsilon = c.at("epsilon").get<double>();
        auto rc = c.at("ratio_clip").get<std::vector<double>>();
        auto zc = c.at("z_clip").get<std::vector<double>>();
        if (rc.size() != 2 || zc.size() != 2) throw CorruptEncodingError("bad clip bounds");
        config.ratio_clip = {rc[0], rc[1]};
        config.z_clip = {zc[0], zc[1]};
        config.rolling_windows = c.at("rolling_windows").get<std::vector<int>>();
        config.percentiles = c.at("percentiles").get<std::vector<double>>();
        AggregateTables tables;
        for (const auto& [key, val] : j.at("per_src").items()) {
            tables.per_src[key] = aggregate_from_json(val);
        }
        for (const auto& [key, val] : j.at("per_dst").items()) {
            tables.per_dst[key] = aggregate_from_json(val);
        }
        tables.global = aggregate_from_json(j.at("global"));
        return {std::move(config), std::move(tables)};
    } catch (const nlohmann::json::exception& e) {
        throw CorruptEncodingError(std::string("feature state: ") + e.what());
    }
}

}  // namespace pathwatch
