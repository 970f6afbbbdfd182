#include "pathwatch/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <iostream>
#include <random>
#include <sstream>
#include <unordered_map>

#include <nlohmann/json.hpp>

namespace pathwatch {

namespace {

constexpr const char* kColumns[] = {
    "tr_src", "tr_dst", "timestamp", "all_rtts",
    "total_probes_sent", "total_replies_last_hop", "route_changed"};

// Splits one CSV line into fields, honouring double quotes with "" escapes.
std::vector<std::string> split_csv_line(const std::string& line, char delim,
                                        std::size_t line_no) {
    std::vector<std::string> fields;
    std::string field;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == delim) {
            fields.push_back(std::move(field));
            field.clear();
        } else {
            field += c;
        }
    }
    if (quoted) throw MalformedRowError(line_no, "unterminated quote");
    fields.push_back(std::move(field));
    return fields;
}

double parse_finite(const std::string& text, std::size_t line_no, const char* what) {
    double value = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc() || ptr != text.data() + text.size() || !std::isfinite(value)) {
        throw MalformedRowError(line_no, std::string("bad ") + what + ": '" + text + "'");
    }
    return value;
}

std::int64_t parse_count(const std::string& text, std::size_t line_no, const char* what) {
    std::int64_t value = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc() || ptr != text.data() + text.size() || value < 0) {
        throw MalformedRowError(line_no, std::string("bad ") + what + ": '" + text + "'");
    }
    return value;
}

// Timestamps are whole seconds; fractional inputs are truncated (warned once
// per file by the caller).
std::int64_t parse_timestamp(const std::string& text, std::size_t line_no,
                             bool& truncated) {
    double raw = parse_finite(text, line_no, "timestamp");
    if (raw < 0) throw MalformedRowError(line_no, "negative timestamp");
    double whole = std::trunc(raw);
    if (whole != raw) truncated = true;
    return static_cast<std::int64_t>(whole);
}

}  // namespace

std::vector<int> Dataset::labels() const {
    if (!labeled) throw DataError("dataset is unlabeled");
    std::vector<int> out;
    out.reserve(records.size());
    for (const auto& rec : records) out.push_back(*rec.label);
    return out;
}

void validate_record(const TracerouteRecord& rec, std::size_t line) {
    if (rec.timestamp < 0) throw MalformedRowError(line, "negative timestamp");
    if (rec.probes_sent < 0 || rec.replies_last_hop < 0) {
        throw MalformedRowError(line, "negative probe counter");
    }
    if (rec.replies_last_hop > rec.probes_sent) {
        throw InvalidCountError("line " + std::to_string(line) +
                                ": replies_last_hop exceeds probes_sent");
    }
    for (double rtt : rec.rtts) {
        if (!std::isfinite(rtt) || rtt < 0) {
            throw MalformedRowError(line, "rtt values must be finite and >= 0");
        }
    }
    if (rec.label && *rec.label != 0 && *rec.label != 1) {
        throw MalformedRowError(line, "label must be 0 or 1");
    }
}

Dataset make_dataset(std::vector<TracerouteRecord> records) {
    Dataset ds;
    ds.records = std::move(records);
    std::size_t with_label = 0;
    for (std::size_t i = 0; i < ds.records.size(); ++i) {
        validate_record(ds.records[i], i + 1);
        if (ds.records[i].label) ++with_label;
    }
    if (with_label != 0 && with_label != ds.records.size()) {
        throw DataError("labeling must be all-or-none");
    }
    ds.labeled = !ds.records.empty() && with_label == ds.records.size();
    return ds;
}

Dataset parse_csv(const std::filesystem::path& path, const DelimiterOptions& options) {
    std::istringstream in(read_file(path));
    std::string line;
    if (!std::getline(in, line)) throw DataError("empty file: " + path.string());
    if (!line.empty() && line.back() == '\r') line.pop_back();

    auto header = split_csv_line(line, options.field_delimiter, 1);
    std::unordered_map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < header.size(); ++i) index[header[i]] = i;

    for (int i = 0; i < 6; ++i) {  // route_changed optional
        if (!index.count(kColumns[i])) throw MissingColumnError(kColumns[i]);
    }
    const bool has_label = index.count("route_changed") > 0;

    std::vector<TracerouteRecord> records;
    bool truncated_timestamps = false;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto fields = split_csv_line(line, options.field_delimiter, line_no);
        if (fields.size() < header.size()) {
            throw MalformedRowError(line_no, "expected " + std::to_string(header.size()) +
                                                 " fields, got " +
                                                 std::to_string(fields.size()));
        }
        TracerouteRecord rec;
        rec.src = fields[index["tr_src"]];
        rec.dst = fields[index["tr_dst"]];
        rec.timestamp =
            parse_timestamp(fields[index["timestamp"]], line_no, truncated_timestamps);
        const std::string& rtts_field = fields[index["all_rtts"]];
        if (!rtts_field.empty()) {
            std::size_t start = 0;
            while (start <= rtts_field.size()) {
                std::size_t end = rtts_field.find(options.rtt_delimiter, start);
                if (end == std::string::npos) end = rtts_field.size();
                rec.rtts.push_back(
                    parse_finite(rtts_field.substr(start, end - start), line_no, "rtt"));
                if (end == rtts_field.size()) break;
                start = end + 1;
            }
        }
        rec.probes_sent =
            parse_count(fields[index["total_probes_sent"]], line_no, "total_probes_sent");
        rec.replies_last_hop = parse_count(fields[index["total_replies_last_hop"]],
                                           line_no, "total_replies_last_hop");
        if (has_label) {
            const std::string& lab = fields[index["route_changed"]];
            if (lab == "0") {
                rec.label = 0;
            } else if (lab == "1") {
                rec.label = 1;
            } else {
                throw MalformedRowError(line_no, "route_changed must be 0 or 1, got '" +
                                                     lab + "'");
            }
        }
        validate_record(rec, line_no);
        records.push_back(std::move(rec));
    }
    if (truncated_timestamps) {
        std::cerr << "warning: " << path.string()
                  << ": sub-second timestamps truncated to whole seconds\n";
    }
    return make_dataset(std::move(records));
}

Dataset parse_jsonl(const std::filesystem::path& path) {
    std::istringstream in(read_file(path));
    std::string line;
    std::vector<TracerouteRecord> records;
    bool truncated_timestamps = false;
    std::size_t line_no = 0;
    std::optional<bool> file_labeled;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;

        nlohmann::json obj;
        try {
            obj = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw MalformedRowError(line_no, std::string("invalid JSON: ") + e.what());
        }
        if (!obj.is_object()) throw MalformedRowError(line_no, "expected a JSON object");

        TracerouteRecord rec;
        try {
            if (!obj.contains("tr_src") || !obj.contains("tr_dst") ||
                !obj.contains("timestamp") || !obj.contains("all_rtts") ||
                !obj.contains("total_probes_sent") ||
                !obj.contains("total_replies_last_hop")) {
                throw MalformedRowError(line_no, "missing required field");
            }
            rec.src = obj.at("tr_src").get<std::string>();
            rec.dst = obj.at("tr_dst").get<std::string>();
            double ts = obj.at("timestamp").get<double>();
            if (!std::isfinite(ts) || ts < 0) {
                throw MalformedRowError(line_no, "bad timestamp");
            }
            if (std::trunc(ts) != ts) truncated_timestamps = true;
            rec.timestamp = static_cast<std::int64_t>(std::trunc(ts));
            for (const auto& v : obj.at("all_rtts")) {
                rec.rtts.push_back(v.get<double>());
            }
            rec.probes_sent = obj.at("total_probes_sent").get<std::int64_t>();
            rec.replies_last_hop = obj.at("total_replies_last_hop").get<std::int64_t>();
            if (obj.contains("route_changed")) {
                rec.label = obj.at("route_changed").get<int>();
            }
        } catch (const nlohmann::json::exception& e) {
            throw MalformedRowError(line_no, std::string("bad field: ") + e.what());
        }

        bool labeled = rec.label.has_value();
        if (!file_labeled) {
            file_labeled = labeled;
        } else if (*file_labeled != labeled) {
            throw MalformedRowError(line_no, "labeling must be all-or-none");
        }
        validate_record(rec, line_no);
        records.push_back(std::move(rec));
    }
    if (truncated_timestamps) {
        std::cerr << "warning: " << path.string()
                  << ": sub-second timestamps truncated to whole seconds\n";
    }
    return make_dataset(std::move(records));
}

std::string to_csv(const Dataset& dataset, const DelimiterOptions& options) {
    const char d = options.field_delimiter;
    std::string out = "tr_src";
    out += d;
    out += "tr_dst";
    out += d;
    out += "timestamp";
    out += d;
    out += "all_rtts";
    out += d;
    out += "total_probes_sent";
    out += d;
    out += "total_replies_last_hop";
    if (dataset.labeled) {
        out += d;
        out += "route_changed";
    }
    out += '\n';

    auto quote = [](const std::string& s) {
        std::string q = "\"";
        for (char c : s) {
            if (c == '"') q += "\"\"";
            else q += c;
        }
        q += '"';
        return q;
    };

    for (const auto& rec : dataset.records) {
        out += quote(rec.src);
        out += d;
        out += quote(rec.dst);
        out += d;
        out += std::to_string(rec.timestamp);
        out += d;
        out += '"';
        for (std::size_t i = 0; i < rec.rtts.size(); ++i) {
            if (i) out += options.rtt_delimiter;
            out += format_double(rec.rtts[i]);
        }
        out += '"';
        out += d;
        out += std::to_string(rec.probes_sent);
        out += d;
        out += std::to_string(rec.replies_last_hop);
        if (dataset.labeled) {
            out += d;
            out += std::to_string(*rec.label);
        }
        out += '\n';
    }
    return out;
}

void write_csv(const Dataset& dataset, const std::filesystem::path& path,
               const DelimiterOptions& options) {
    atomic_write_file(path, to_csv(dataset, options));
}

std::pair<Dataset, Dataset> split(const Dataset& dataset, double train_fraction,
                                  std::uint64_t seed) {
    if (!dataset.labeled) throw DataError("split requires a labeled dataset");
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
        throw DataError("train_fraction must lie in (0,1)");
    }

    // Group rows by path in first-appearance order.
    std::unordered_map<std::string, std::size_t> path_index;
    std::vector<std::vector<std::size_t>> path_rows;
    for (std::size_t i = 0; i < dataset.records.size(); ++i) {
        const auto& rec = dataset.records[i];
        std::string key = rec.src + '\x1f' + rec.dst;
        auto [it, inserted] = path_index.emplace(std::move(key), path_rows.size());
        if (inserted) path_rows.emplace_back();
        path_rows[it->second].push_back(i);
    }

    std::vector<std::size_t> order(path_rows.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);

    // Fill the train side until its row count first reaches fraction * N.
    const double target = train_fraction * static_cast<double>(dataset.records.size());
    std::vector<char> in_train(dataset.records.size(), 0);
    double train_rows = 0;
    for (std::size_t p : order) {
        if (train_rows >= target) break;
        for (std::size_t row : path_rows[p]) in_train[row] = 1;
        train_rows += static_cast<double>(path_rows[p].size());
    }

    Dataset train, test;
    train.labeled = test.labeled = dataset.labeled;
    for (std::size_t i = 0; i < dataset.records.size(); ++i) {
        (in_train[i] ? train : test).records.push_back(dataset.records[i]);
    }
    if (train.records.empty() || test.records.empty()) {
        throw DegenerateSplitError("split leaves one side empty (fraction " +
                                   format_double(train_fraction) + ", " +
                                   std::to_string(path_rows.size()) + " paths)");
    }
    return {std::move(train), std::move(test)};
}

ImbalanceReport make_imbalance_report(std::int64_t negatives, std::int64_t positives) {
    if (negatives < 0 || positives < 0 || negatives + positives == 0) {
        throw DataError("imbalance report needs non-negative counts, at least one row");
    }
    ImbalanceReport report;
    report.negatives = negatives;
    report.positives = positives;
    const double n = static_cast<double>(negatives + positives);
    report.negative_pct = 100.0 * static_cast<double>(negatives) / n;
    report.positive_pct = 100.0 * static_cast<double>(positives) / n;
    report.single_class = negatives == 0 || positives == 0;
    if (!report.single_class) {
        auto major = std::max(negatives, positives);
        auto minor = std::min(negatives, positives);
        report.imbalance_ratio = static_cast<double>(major) / static_cast<double>(minor);
    }
    return report;
}

ImbalanceReport class_distribution(const Dataset& dataset) {
    if (!dataset.labeled) throw DataError("class_distribution requires labels");
    std::int64_t negatives = 0, positives = 0;
    for (const auto& rec : dataset.records) {
        (*rec.label == 1 ? positives : negatives)++;
    }
    return make_imbalance_report(negatives, positives);
}

}  // namespace pathwatch
