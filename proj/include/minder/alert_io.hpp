// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "minder/detect.hpp"
#include "minder/error.hpp"

#include <json.hpp>

namespace minder {

/// Alert exchange format: one JSON object per line. Window positions are
/// reported in epoch seconds of the task grid.
inline nlohmann::json alert_to_json(const Alert& alert, double grid_start, double grid_interval) {
    return {{"task_id", alert.task_id},
            {"machine_id", alert.machine_id},
            {"metric", std::string(metric_name(alert.metric))},
            {"first_window_start",
             grid_start + static_cast<double>(alert.first_window_start) * grid_interval},
            {"last_window_start",
             grid_start + static_cast<double>(alert.last_window_start) * grid_interval},
            {"consecutive_hits", alert.consecutive_hits},
            {"peak_normal_score", alert.peak_normal_score}};
}

inline void write_alerts_jsonl(const std::vector<nlohmann::json>& alerts,
                               const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write alerts file: " + path.string());
    for (const auto& a : alerts) out << a.dump() << '\n';
}

struct LoadedAlert {
    Alert alert;
    double first_window_start_s = 0.0;
    double last_window_start_s = 0.0;
};

inline std::map<std::string, std::vector<Alert>> read_alerts_jsonl(
    const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open alerts file: " + path.string());
    std::map<std::string, std::vector<Alert>> by_task;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded())
            throw MalformedRow("alerts line " + std::to_string(line_no) + ": bad JSON");
        Alert alert;
        alert.task_id = j.at("task_id").get<std::string>();
        alert.machine_id = j.at("machine_id").get<std::string>();
        const std::string metric_text = j.at("metric").get<std::string>();
        auto metric = parse_metric(metric_text);
        if (!metric)
            throw UnknownMetric("alerts line " + std::to_string(line_no) + ": " + metric_text);
        alert.metric = *metric;
        alert.consecutive_hits = j.at("consecutive_hits").get<std::size_t>();
        alert.peak_normal_score = j.at("peak_normal_score").get<double>();
        by_task[alert.task_id].push_back(std::move(alert));
    }
    return by_task;
}

}  // namespace minder
