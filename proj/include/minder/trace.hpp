// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "minder/error.hpp"
#include "minder/metric.hpp"

#include <json.hpp>

namespace minder {

struct Sample {
    double timestamp = 0.0;  // seconds since epoch
    double value = 0.0;
};

/// Key for one per-machine metric stream.
struct StreamKey {
    std::string machine_id;
    MetricKind metric;

    bool operator<(const StreamKey& o) const {
        if (machine_id != o.machine_id) return machine_id < o.machine_id;
        return metric < o.metric;
    }
    bool operator==(const StreamKey& o) const {
        return machine_id == o.machine_id && metric == o.metric;
    }
};

/// Raw telemetry for one task: per (machine, metric) sample streams,
/// timestamps strictly increasing within a stream, all values finite.
struct RawTraceSet {
    std::string task_id;
    std::map<StreamKey, std::vector<Sample>> samples;

    std::vector<std::string> machine_ids() const {
        std::vector<std::string> ids;
        for (const auto& [key, _] : samples) {
            if (ids.empty() || ids.back() != key.machine_id) ids.push_back(key.machine_id);
        }
        ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
        return ids;
    }

    std::vector<std::string> machines_with(MetricKind metric) const {
        std::vector<std::string> ids;
        for (const auto& [key, _] : samples) {
            if (key.metric == metric) ids.push_back(key.machine_id);
        }
        return ids;
    }
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            fields.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(ch);
        }
    }
    fields.push_back(cur);
    return fields;
}

inline std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline bool parse_finite_double(const std::string& text, double& out) {
    const std::string t = trim(text);
    if (t.empty()) return false;
    std::size_t pos = 0;
    double v;
    try {
        v = std::stod(t, &pos);
    } catch (const std::exception&) {
        return false;
    }
    if (pos != t.size()) return false;
    if (!std::isfinite(v)) return false;
    out = v;
    return true;
}

inline void insert_row(RawTraceSet& out, std::size_t line_no, const std::string& machine,
                       const std::string& metric_text, double ts, double value) {
    auto metric = parse_metric(detail::trim(metric_text));
    if (!metric)
        throw UnknownMetric("line " + std::to_string(line_no) + ": unknown metric '" +
                            metric_text + "'");
    out.samples[{machine, *metric}].push_back({ts, value});
}

}  // namespace detail

/// Trace file format. Csv expects a `timestamp,machine_id,metric,value`
/// header; JsonLines expects one object per line with the same four keys.
enum class TraceFormat { Csv, JsonLines };

inline TraceFormat trace_format_for_path(const std::filesystem::path& path) {
    return path.extension() == ".csv" ? TraceFormat::Csv : TraceFormat::JsonLines;
}

/// Ingest a trace file. Rows may arrive in any order; each stream is sorted
/// ascending afterwards. Duplicate (machine, metric, timestamp) rows are an
/// error: they indicate an upstream collection bug worth surfacing.
inline RawTraceSet parse_trace(const std::filesystem::path& path, TraceFormat format,
                               std::string task_id = "") {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open trace file: " + path.string());

    RawTraceSet out;
    out.task_id = task_id.empty() ? path.stem().string() : std::move(task_id);

    std::string line;
    std::size_t line_no = 0;
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string trimmed = detail::trim(line);
        if (trimmed.empty()) continue;

        if (format == TraceFormat::Csv) {
            if (!header_seen) {
                header_seen = true;
                if (trimmed != "timestamp,machine_id,metric,value")
                    throw MalformedRow("line 1: expected header "
                                       "'timestamp,machine_id,metric,value'");
                continue;
            }
            auto fields = detail::split_csv_line(trimmed);
            if (fields.size() != 4)
                throw MalformedRow("line " + std::to_string(line_no) + ": expected 4 fields, got " +
                                   std::to_string(fields.size()));
            double ts, value;
            if (!detail::parse_finite_double(fields[0], ts))
                throw MalformedRow("line " + std::to_string(line_no) + ": bad timestamp '" +
                                   fields[0] + "'");
            if (!detail::parse_finite_double(fields[3], value))
                throw MalformedRow("line " + std::to_string(line_no) + ": bad value '" +
                                   fields[3] + "'");
            const std::string machine = detail::trim(fields[1]);
            if (machine.empty())
                throw MalformedRow("line " + std::to_string(line_no) + ": empty machine_id");
            detail::insert_row(out, line_no, machine, fields[2], ts, value);
        } else {
            nlohmann::json j = nlohmann::json::parse(trimmed, nullptr, false);
            if (j.is_discarded() || !j.is_object())
                throw MalformedRow("line " + std::to_string(line_no) + ": not a JSON object");
            if (!j.contains("timestamp") || !j.contains("machine_id") || !j.contains("metric") ||
                !j.contains("value"))
                throw MalformedRow("line " + std::to_string(line_no) +
                                   ": missing one of timestamp/machine_id/metric/value");
            if (!j["timestamp"].is_number() || !j["value"].is_number() ||
                !j["machine_id"].is_string() || !j["metric"].is_string())
                throw MalformedRow("line " + std::to_string(line_no) + ": bad field types");
            const double ts = j["timestamp"].get<double>();
            const double value = j["value"].get<double>();
            if (!std::isfinite(ts) || !std::isfinite(value))
                throw MalformedRow("line " + std::to_string(line_no) + ": non-finite number");
            detail::insert_row(out, line_no, j["machine_id"].get<std::string>(),
                               j["metric"].get<std::string>(), ts, value);
        }
    }

    for (auto& [key, stream] : out.samples) {
        std::sort(stream.begin(), stream.end(),
                  [](const Sample& a, const Sample& b) { return a.timestamp < b.timestamp; });
        for (std::size_t i = 1; i < stream.size(); ++i) {
            if (stream[i].timestamp == stream[i - 1].timestamp)
                throw DuplicateSample("duplicate sample for machine '" + key.machine_id +
                                      "' metric " + std::string(metric_name(key.metric)) +
                                      " at t=" + std::to_string(stream[i].timestamp));
        }
    }
    return out;
}

/// Write a trace set in the CSV exchange format. Row order is
/// (machine, metric, timestamp), so output is byte-stable.
inline void write_trace_csv(const RawTraceSet& traces, const std::filesystem::path& path) {
    std::ofstream outf(path);
    if (!outf) throw IoError("cannot write trace file: " + path.string());
    outf << "timestamp,machine_id,metric,value\n";
    char buf[64];
    for (const auto& [key, stream] : traces.samples) {
        for (const Sample& s : stream) {
            if (s.timestamp == std::floor(s.timestamp) && std::abs(s.timestamp) < 1e15) {
                std::snprintf(buf, sizeof(buf), "%.0f", s.timestamp);
            } else {
                std::snprintf(buf, sizeof(buf), "%.9g", s.timestamp);
            }
            outf << buf << ',' << key.machine_id << ',' << metric_name(key.metric) << ',';
            std::snprintf(buf, sizeof(buf), "%.10g", s.value);
            outf << buf << '\n';
        }
    }
    if (!outf) throw IoError("short write to " + path.string());
}

}  // namespace minder
