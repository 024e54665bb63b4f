// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "minder/error.hpp"
#include "minder/simulate.hpp"
#include "minder/trace.hpp"

#include <json.hpp>

// Corpus directory layout:
//   <dir>/manifest.json            corpus spec + per-task plan, for replay
//   <dir>/<task_id>.csv            trace in the standard exchange format
//   <dir>/<task_id>.truth.json     ground-truth labels

namespace minder {

inline nlohmann::json truth_to_json(const GroundTruth& truth) {
    nlohmann::json faults = nlohmann::json::array();
    for (const auto& f : truth.faults) {
        faults.push_back({{"machine_id", f.machine_id},
                          {"fault_type", std::string(fault_type_name(f.fault_type))},
                          {"onset_s", f.onset_s},
                          {"duration_s", f.duration_s}});
    }
    return {{"task_id", truth.task_id}, {"faults", faults}};
}

inline GroundTruth truth_from_json(const nlohmann::json& j) {
    GroundTruth truth;
    truth.task_id = j.at("task_id").get<std::string>();
    for (const auto& f : j.at("faults")) {
        GroundTruthFault fault;
        fault.machine_id = f.at("machine_id").get<std::string>();
        const std::string type_name = f.at("fault_type").get<std::string>();
        auto type = parse_fault_type(type_name);
        if (!type) throw ConfigError("unknown fault type in truth file: " + type_name);
        fault.fault_type = *type;
        fault.onset_s = f.at("onset_s").get<double>();
        fault.duration_s = f.at("duration_s").get<double>();
        truth.faults.push_back(fault);
    }
    return truth;
}

inline void write_truth(const GroundTruth& truth, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write truth file: " + path.string());
    out << truth_to_json(truth).dump(2) << '\n';
}

inline GroundTruth read_truth(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open truth file: " + path.string());
    nlohmann::json j;
    in >> j;
    return truth_from_json(j);
}

inline nlohmann::json corpus_manifest(const CorpusSpec& spec, const CorpusPlan& plan) {
    nlohmann::json mix;
    for (const auto& [type, p] : spec.fault_mix) mix[std::string(fault_type_name(type))] = p;
    nlohmann::json tasks = nlohmann::json::array();
    for (const TaskPlan& t : plan.tasks) {
        nlohmann::json jt = {{"task_id", t.task_id},
                             {"seed", t.seed},
                             {"machines", t.machines}};
        if (t.fault) {
            jt["fault"] = {{"type", std::string(fault_type_name(t.fault->type))},
                           {"target_machine", t.fault->target_machine},
                           {"onset_s", t.fault->onset_s},
                           {"duration_s", t.fault->duration_s}};
        }
        tasks.push_back(jt);
    }
    return {{"n_tasks", spec.n_tasks},
            {"machine_choices", spec.machine_choices},
            {"duration_s", spec.duration_s},
            {"grid_interval_s", spec.grid_interval_s},
            {"noise_sigma_norm", spec.noise_sigma_norm},
            {"seed", spec.seed},
            {"fault_mix", mix},
            {"tasks", tasks}};
}

/// Generate and persist a whole corpus; returns the plan that was written.
inline CorpusPlan write_corpus(const CorpusSpec& spec, const std::vector<MetricGen>& waveforms,
                               const std::map<FaultType, FaultProfile>& profiles,
                               const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    const CorpusPlan plan = plan_corpus(spec, profiles);
    for (const TaskPlan& task : plan.tasks) {
        auto [traces, truth] = materialize_task(spec, task, waveforms, profiles);
        write_trace_csv(traces, dir / (task.task_id + ".csv"));
        write_truth(truth, dir / (task.task_id + ".truth.json"));
    }
    std::ofstream manifest(dir / "manifest.json");
    if (!manifest) throw IoError("cannot write manifest in " + dir.string());
    manifest << corpus_manifest(spec, plan).dump(2) << '\n';
    return plan;
}

/// Task ids present in a corpus directory, sorted.
inline std::vector<std::string> list_corpus_tasks(const std::filesystem::path& dir) {
    std::vector<std::string> ids;
    if (!std::filesystem::is_directory(dir)) throw IoError("not a corpus directory: " + dir.string());
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (entry.path().extension() == ".csv") ids.push_back(entry.path().stem().string());
    }
    std::sort(ids.begin(), ids.end());
    return ids;
}

inline RawTraceSet read_corpus_task(const std::filesystem::path& dir, const std::string& task_id) {
    return parse_trace(dir / (task_id + ".csv"), TraceFormat::Csv, task_id);
}

inline GroundTruth read_corpus_truth(const std::filesystem::path& dir, const std::string& task_id) {
    return read_truth(dir / (task_id + ".truth.json"));
}

inline bool corpus_has_truth(const std::filesystem::path& dir, const std::string& task_id) {
    return std::filesystem::exists(dir / (task_id + ".truth.json"));
}

}  // namespace minder
