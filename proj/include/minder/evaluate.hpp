// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "minder/detect.hpp"
#include "minder/error.hpp"
#include "minder/simulate.hpp"

#include <json.hpp>

namespace minder {

struct ConfusionCounts {
    std::size_t tp = 0;
    std::size_t fn = 0;
    std::size_t tn = 0;
    std::size_t fp = 0;

    /// Undefined ratios (zero denominators) come back as nullopt and render
    /// as a dash; they are not zero.
    std::optional<double> precision() const {
        const std::size_t d = tp + fp;
        if (d == 0) return std::nullopt;
        return static_cast<double>(tp) / static_cast<double>(d);
    }
    std::optional<double> recall() const {
        const std::size_t d = tp + fn;
        if (d == 0) return std::nullopt;
        return static_cast<double>(tp) / static_cast<double>(d);
    }
    std::optional<double> f1() const {
        auto p = precision();
        auto r = recall();
        if (!p || !r || *p + *r == 0.0) return std::nullopt;
        return 2.0 * *p * *r / (*p + *r);
    }
};

struct EvalReport {
    std::string pipeline;
    ConfusionCounts overall;
    std::map<FaultType, ConfusionCounts> per_fault_type;
    std::size_t n_tasks = 0;
};

/// Score per-task alert lists against ground truth. A faulty task counts as
/// a true positive when any alert names the faulty machine and as a false
/// negative otherwise (wrong machine or silence); a fault-free task counts
/// as a true negative when silent and a false positive otherwise. The alert
/// metric field is ignored: machine identity is what is scored.
inline EvalReport evaluate(const std::map<std::string, std::vector<Alert>>& alerts_by_task,
                           const std::map<std::string, GroundTruth>& truth_by_task,
                           std::string pipeline = "") {
    for (const auto& [task_id, _] : alerts_by_task) {
        if (truth_by_task.find(task_id) == truth_by_task.end())
            throw TaskSetMismatch("alerts reference unknown task " + task_id);
    }

    EvalReport report;
    report.pipeline = std::move(pipeline);
    report.n_tasks = truth_by_task.size();
    for (const auto& [task_id, truth] : truth_by_task) {
        const auto it = alerts_by_task.find(task_id);
        const std::vector<Alert>* alerts = it == alerts_by_task.end() ? nullptr : &it->second;
        const bool any_alert = alerts != nullptr && !alerts->empty();

        if (truth.faults.empty()) {
            if (any_alert) {
                ++report.overall.fp;
            } else {
                ++report.overall.tn;
            }
            continue;
        }

        bool hit = false;
        if (any_alert) {
            for (const Alert& a : *alerts) {
                for (const auto& f : truth.faults) {
                    if (a.machine_id == f.machine_id) {
                        hit = true;
                        break;
                    }
                }
                if (hit) break;
            }
        }
        ConfusionCounts& type_counts = report.per_fault_type[truth.faults.front().fault_type];
        if (hit) {
            ++report.overall.tp;
            ++type_counts.tp;
        } else {
            ++report.overall.fn;
            ++type_counts.fn;
        }
    }
    return report;
}

inline nlohmann::json counts_to_json(const ConfusionCounts& c) {
    auto opt = [](std::optional<double> v) {
        return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
    };
    return {{"tp", c.tp},        {"fn", c.fn},
            {"tn", c.tn},        {"fp", c.fp},
            {"precision", opt(c.precision())}, {"recall", opt(c.recall())},
            {"f1", opt(c.f1())}};
}

inline nlohmann::json report_to_json(const EvalReport& report) {
    nlohmann::json per_type;
    for (const auto& [type, counts] : report.per_fault_type) {
        per_type[std::string(fault_type_name(type))] = counts_to_json(counts);
    }
    return {{"pipeline", report.pipeline},
            {"n_tasks", report.n_tasks},
            {"overall", counts_to_json(report.overall)},
            {"per_fault_type", per_type}};
}

inline EvalReport report_from_json(const nlohmann::json& j) {
    EvalReport report;
    report.pipeline = j.at("pipeline").get<std::string>();
    report.n_tasks = j.at("n_tasks").get<std::size_t>();
    auto counts = [](const nlohmann::json& c) {
        ConfusionCounts out;
        out.tp = c.at("tp").get<std::size_t>();
        out.fn = c.at("fn").get<std::size_t>();
        out.tn = c.at("tn").get<std::size_t>();
        out.fp = c.at("fp").get<std::size_t>();
        return out;
    };
    report.overall = counts(j.at("overall"));
    if (j.contains("per_fault_type")) {
        for (const auto& [name, c] : j.at("per_fault_type").items()) {
            auto type = parse_fault_type(name);
            if (!type) throw ConfigError("unknown fault type in report: " + name);
            report.per_fault_type[*type] = counts(c);
        }
    }
    return report;
}

inline std::string format_ratio(std::optional<double> v) {
    if (!v) return "-";
    std::ostringstream out;
    out << std::fixed << std::setprecision(3) << *v;
    return out.str();
}

/// Fixed-width summary table for terminals and the markdown report.
inline std::string render_report_table(const std::vector<EvalReport>& reports, bool markdown) {
    std::ostringstream out;
    const char* sep = markdown ? " | " : "  ";
    if (markdown) {
        out << "| pipeline | tasks | TP | FN | TN | FP | precision | recall | F1 |\n";
        out << "|---|---|---|---|---|---|---|---|---|\n";
    } else {
        out << std::left << std::setw(10) << "pipeline" << sep << std::setw(5) << "tasks" << sep
            << std::setw(4) << "TP" << sep << std::setw(4) << "FN" << sep << std::setw(4) << "TN"
            << sep << std::setw(4) << "FP" << sep << std::setw(9) << "precision" << sep
            << std::setw(6) << "recall" << sep << "F1\n";
    }
    for (const EvalReport& r : reports) {
        if (markdown) out << "| ";
        out << std::left << std::setw(markdown ? 0 : 10) << r.pipeline << sep
            << std::setw(markdown ? 0 : 5) << r.n_tasks << sep << std::setw(markdown ? 0 : 4)
            << r.overall.tp << sep << std::setw(markdown ? 0 : 4) << r.overall.fn << sep
            << std::setw(markdown ? 0 : 4) << r.overall.tn << sep << std::setw(markdown ? 0 : 4)
            << r.overall.fp << sep << std::setw(markdown ? 0 : 9)
            << format_ratio(r.overall.precision()) << sep << std::setw(markdown ? 0 : 6)
            << format_ratio(r.overall.recall()) << sep << format_ratio(r.overall.f1());
        if (markdown) out << " |";
        out << '\n';
    }
    return out.str();
}

/// Per-fault-type breakdown for one pipeline.
inline std::string render_fault_type_table(const EvalReport& report, bool markdown) {
    std::ostringstream out;
    if (markdown) {
        out << "| fault type | TP | FN | recall |\n|---|---|---|---|\n";
    } else {
        out << std::left << std::setw(20) << "fault type" << "  TP  FN  recall\n";
    }
    for (const auto& [type, c] : report.per_fault_type) {
        if (markdown) {
            out << "| " << fault_type_name(type) << " | " << c.tp << " | " << c.fn << " | "
                << format_ratio(c.recall()) << " |\n";
        } else {
            out << std::left << std::setw(20) << fault_type_name(type) << "  " << std::setw(2)
                << c.tp << "  " << std::setw(2) << c.fn << "  " << format_ratio(c.recall())
                << '\n';
        }
    }
    return out.str();
}

}  // namespace minder
