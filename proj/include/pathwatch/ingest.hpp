#pragma once

// Loading, validation and splitting of traceroute latency datasets.
//
// Canonical flat-file layout (CSV header / JSONL keys):
//   tr_src, tr_dst, timestamp, all_rtts, total_probes_sent,
//   total_replies_last_hop, route_changed
// `all_rtts` is a pipe-delimited list of millisecond RTTs inside one quoted
// CSV field (a JSON array in JSONL). `route_changed` is optional; labeling is
// all-or-none per file.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "pathwatch/common.hpp"

namespace pathwatch {

/// One raw traceroute measurement row.
struct TracerouteRecord {
    std::string src;
    std::string dst;
    std::int64_t timestamp = 0;  // seconds since epoch
    std::vector<double> rtts;    // last-hop RTTs, milliseconds
    std::int64_t probes_sent = 0;
    std::int64_t replies_last_hop = 0;
    std::optional<int> label;  // 0 = stable, 1 = route changed

    bool operator==(const TracerouteRecord&) const = default;
};

struct Dataset {
    std::vector<TracerouteRecord> records;
    bool labeled = false;

    std::size_t size() const { return records.size(); }
    /// Label vector; requires labeled == true.
    std::vector<int> labels() const;
};

/// Validates record invariants (counters, finite non-negative RTTs, binary
/// label) and throws DataError on violation. `line` is used in messages.
void validate_record(const TracerouteRecord& rec, std::size_t line);

/// Builds a Dataset from records, enforcing all-or-none labeling.
Dataset make_dataset(std::vector<TracerouteRecord> records);

struct DelimiterOptions {
    char field_delimiter = ',';
    char rtt_delimiter = '|';
};

Dataset parse_csv(const std::filesystem::path& path, const DelimiterOptions& options = {});
Dataset parse_jsonl(const std::filesystem::path& path);

/// Serializes to the canonical CSV layout; parse_csv(write_csv(ds)) gives
/// field-equal records.
std::string to_csv(const Dataset& dataset, const DelimiterOptions& options = {});
void write_csv(const Dataset& dataset, const std::filesystem::path& path,
               const DelimiterOptions& options = {});

/// Path-grouped train/test split. All rows sharing (src,dst) land on one
/// side; paths are shuffled by seed and assigned to the train side until its
/// row count first reaches train_fraction * N. Throws DegenerateSplitError
/// when either side ends up empty.
std::pair<Dataset, Dataset> split(const Dataset& dataset, double train_fraction,
                                  std::uint64_t seed);

struct ImbalanceReport {
    std::int64_t negatives = 0;
    std::int64_t positives = 0;
    double negative_pct = 0.0;
    double positive_pct = 0.0;
    bool single_class = false;
    double imbalance_ratio = 0.0;  // majority : minority; valid when !single_class
};

ImbalanceReport class_distribution(const Dataset& dataset);

/// Same report computed straight from class counts.
ImbalanceReport make_imbalance_report(std::int64_t negatives, std::int64_t positives);

}  // namespace pathwatch
