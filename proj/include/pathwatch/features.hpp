#pragma once

// Feature engineering: per-trace statistics, path-level temporal context,
// rolling statistics, and source/destination aggregate context.
//
// Column order produced by build_features (d depends on config):
//   per-trace block:
//     rtt_mean, rtt_var, rtt_std, rtt_min, rtt_max, rtt_count,
//     rtt_p<rank> (one per configured percentile rank), rtt_iqr,
//     success_rate, loss_rate, probes_sent, replies_last_hop
//   temporal block (tracked features: rtt_mean, rtt_std, rtt_p90,
//   success_rate):
//     delta_<x>, ratio_<x> per tracked feature, then delta_t
//   rolling block:
//     roll<w>_mean_<x>, roll<w>_std_<x> per window w and tracked feature x
//   aggregate block:
//     src_row_count, src_distinct_dst, z_src_<x> per tracked feature,
//     dst_row_count, dst_distinct_src, z_dst_<x> per tracked feature
//
// First observation of a path has all temporal features exactly 0. Ratios
// are clipped to ratio_clip and standardized deviations to z_clip, so the
// matrix never contains non-finite values.

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pathwatch/ingest.hpp"

namespace pathwatch {

struct FeatureConfig {
    double epsilon = 1e-6;
    std::array<double, 2> ratio_clip{0.01, 100.0};
    std::array<double, 2> z_clip{-50.0, 50.0};
    std::vector<int> rolling_windows{3, 7};
    std::vector<double> percentiles{25, 50, 75, 90};
};

void validate(const FeatureConfig& config);

/// Summary statistics of one traceroute's RTT list plus probe reliability.
/// Empty RTT lists yield all-zero latency statistics.
struct TraceStats {
    double mean = 0;
    double variance = 0;  // population (1/L) normalization
    double stddev = 0;
    double min = 0;
    double max = 0;
    double count = 0;
    std::vector<double> percentile_values;  // parallel to config.percentiles
    double iqr = 0;
    double success_rate = 0;  // replies / probes, 0 when no probes
    double loss_rate = 0;
};

TraceStats per_trace_stats(const TracerouteRecord& record, const FeatureConfig& config);

/// Linear-interpolation percentile of an unsorted sample; rank in (0,100).
double percentile(std::span<const double> values, double rank);

/// Time gaps within one path (rows sorted by non-decreasing timestamp).
/// First row gets 0. Throws UnsortedInputError.
std::vector<double> temporal_gaps(std::span<const std::int64_t> timestamps);

/// Absolute and clipped relative change of one tracked scalar along a path.
/// First row gets exact zeros.
struct TemporalColumns {
    std::vector<double> delta;
    std::vector<double> ratio;
};
TemporalColumns temporal_deltas(std::span<const double> values,
                                const FeatureConfig& config);

/// Rolling mean/std over the trailing `window` rows (current row included,
/// min periods 1, population std).
struct RollingColumns {
    std::vector<double> mean;
    std::vector<double> stddev;
};
RollingColumns rolling_stats(std::span<const double> values, int window);

// Tracked per-row scalars used for temporal, rolling, and aggregate context.
inline constexpr std::size_t kTrackedCount = 4;
extern const std::array<std::string, kTrackedCount> kTrackedNames;
using TrackedRow = std::array<double, kTrackedCount>;

struct KeyAggregate {
    std::int64_t row_count = 0;
    std::int64_t distinct_counterparts = 0;
    TrackedRow mean{};
    TrackedRow stddev{};  // population
};

/// Per-source and per-destination aggregate statistics with global
/// fallbacks for unseen keys. Fitted on training rows and frozen.
struct AggregateTables {
    std::map<std::string, KeyAggregate> per_src;
    std::map<std::string, KeyAggregate> per_dst;
    KeyAggregate global;  // distinct_counterparts unused
};

AggregateTables fit_aggregates(std::span<const std::string> src,
                               std::span<const std::string> dst,
                               std::span<const TrackedRow> tracked);

/// Row features derived from the aggregate tables: counts plus clipped
/// z-scores against the row's source and destination statistics.
struct AggregateRowFeatures {
    double src_row_count = 0;
    double src_distinct = 0;
    TrackedRow z_src{};
    double dst_row_count = 0;
    double dst_distinct = 0;
    TrackedRow z_dst{};
};

AggregateRowFeatures apply_aggregates(const std::string& src, const std::string& dst,
                                      const TrackedRow& tracked,
                                      const AggregateTables& tables,
                                      const FeatureConfig& config);

/// Engineered feature matrix; rows are stored row-major.
struct FeatureMatrix {
    std::vector<std::string> schema;
    std::vector<double> data;
    std::size_t n_rows = 0;
    std::vector<int> labels;  // empty when unlabeled

    std::size_t n_cols() const { return schema.size(); }
    double at(std::size_t row, std::size_t col) const {
        return data[row * schema.size() + col];
    }
    std::span<const double> row(std::size_t r) const {
        return {data.data() + r * schema.size(), schema.size()};
    }
    /// Index of a named column; throws MissingColumnError.
    std::size_t column(const std::string& name) const;
    std::uint64_t schema_fingerprint() const { return fingerprint(schema); }

    /// Copy with only the given rows.
    FeatureMatrix select_rows(std::span<const std::size_t> rows) const;

    std::string to_csv() const;  // schema header (+ route_changed when labeled)
};

std::vector<std::string> feature_schema(const FeatureConfig& config);

/// Runs the full engine. When `tables` is provided (inference path) it is
/// applied without refitting; otherwise tables are fitted on this dataset
/// and returned. Every produced value is finite.
std::pair<FeatureMatrix, AggregateTables> build_features(
    const Dataset& dataset, const FeatureConfig& config,
    const std::optional<AggregateTables>& tables = std::nullopt);

// Sidecar (JSON) persistence of the frozen featurization state.
std::string serialize_feature_state(const FeatureConfig& config,
                                    const AggregateTables& tables);
std::pair<FeatureConfig, AggregateTables> deserialize_feature_state(
    std::string_view text);

}  // namespace pathwatch
