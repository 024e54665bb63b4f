// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <atomic>
#include <chrono>
#include <exception>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "minder/alert_io.hpp"
#include "minder/baselines.hpp"
#include "minder/config.hpp"
#include "minder/corpus_io.hpp"
#include "minder/decision_tree.hpp"
#include "minder/detect.hpp"
#include "minder/evaluate.hpp"
#include "minder/model_io.hpp"
#include "minder/simulate.hpp"
#include "minder/tensor.hpp"
#include "minder/vae_train.hpp"

namespace minder {

enum class PipelineKind { Minder, Md, Raw, Con, Int };

inline std::string pipeline_name(PipelineKind kind) {
    switch (kind) {
        case PipelineKind::Minder: return "minder";
        case PipelineKind::Md: return "md";
        case PipelineKind::Raw: return "raw";
        case PipelineKind::Con: return "con";
        case PipelineKind::Int: return "int";
    }
    return "minder";
}

inline PipelineKind parse_pipeline(const std::string& text) {
    if (text == "minder") return PipelineKind::Minder;
    if (text == "md") return PipelineKind::Md;
    if (text == "raw") return PipelineKind::Raw;
    if (text == "con") return PipelineKind::Con;
    if (text == "int") return PipelineKind::Int;
    throw ConfigError("unknown pipeline: " + text);
}

/// Bounded worker pool over an index range. Tasks must be independent; the
/// first exception is rethrown on the caller thread.
inline void parallel_for(std::size_t n, std::size_t max_workers,
                         const std::function<void(std::size_t)>& fn) {
    if (n == 0) return;
    const std::size_t workers =
        std::max<std::size_t>(1, std::min({max_workers, n,
                                           static_cast<std::size_t>(
                                               std::thread::hardware_concurrency() == 0
                                                   ? 2
                                                   : std::thread::hardware_concurrency())}));
    if (workers == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::mutex error_mutex;
    std::exception_ptr error;
    std::vector<std::thread> threads;
    threads.reserve(workers);
    for (std::size_t t = 0; t < workers; ++t) {
        threads.emplace_back([&] {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= n) return;
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!error) error = std::current_exception();
                    return;
                }
            }
        });
    }
    for (auto& th : threads) th.join();
    if (error) std::rethrow_exception(error);
}

/// Align and normalize every active metric of one task.
inline std::vector<AlignedTensor> preprocess_task(const RawTraceSet& raw, const Config& config) {
    std::vector<AlignedTensor> tensors;
    for (MetricKind metric : config.active_metrics) {
        if (raw.machines_with(metric).size() < 2) continue;
        AlignedTensor t = align(raw, metric, config.corpus.grid_interval_s);
        tensors.push_back(normalize_minmax(t, config.catalog));
    }
    return tensors;
}

/// Windows overlapping any labeled fault span are excluded so models learn
/// the healthy regime (the corpus contains its own labels at desk scale).
inline bool window_overlaps_fault(const AlignedTensor& tensor, std::size_t start, std::size_t w,
                                  const GroundTruth& truth, const std::string& machine_id) {
    const double t0 = tensor.time_of(start);
    const double t1 = tensor.time_of(start + w - 1) + tensor.grid_interval;
    for (const auto& fault : truth.faults) {
        if (fault.machine_id != machine_id) continue;
        const double f0 = fault.onset_s;
        const double f1 = fault.onset_s + fault.duration_s;
        if (t0 < f1 && f0 < t1) return true;
    }
    return false;
}

struct TrainingSet {
    std::vector<Vec> windows;
    std::size_t windows_seen = 0;
};

/// Pool healthy windows for one metric across the corpus, subsampled
/// deterministically to at most `max_windows` (evenly strided).
inline TrainingSet collect_training_windows(const std::filesystem::path& corpus_dir,
                                            const Config& config, MetricKind metric,
                                            std::size_t max_windows) {
    const std::size_t w = config.vae.w;
    std::vector<Vec> all;
    for (const std::string& task_id : list_corpus_tasks(corpus_dir)) {
        RawTraceSet raw = read_corpus_task(corpus_dir, task_id);
        if (raw.machines_with(metric).size() < 2) continue;
        AlignedTensor tensor = normalize_minmax(align(raw, metric, config.corpus.grid_interval_s),
                                                config.catalog);
        GroundTruth truth;
        if (corpus_has_truth(corpus_dir, task_id)) truth = read_corpus_truth(corpus_dir, task_id);
        if (tensor.steps() < w) continue;
        for (std::size_t m = 0; m < tensor.machines(); ++m) {
            for (std::size_t start = 0; start + w <= tensor.steps(); start += config.detector.stride) {
                if (window_overlaps_fault(tensor, start, w, truth, tensor.machine_ids[m])) continue;
                const double* begin = tensor.values.data() + m * tensor.steps() + start;
                all.emplace_back(begin, begin + w);
            }
        }
    }
    TrainingSet set;
    set.windows_seen = all.size();
    if (all.size() <= max_windows) {
        set.windows = std::move(all);
        return set;
    }
    const std::size_t step = all.size() / max_windows;
    for (std::size_t i = 0; i < max_windows; ++i) set.windows.push_back(std::move(all[i * step]));
    return set;
}

/// Multi-metric training windows for the integrated variant.
inline TrainingSet collect_integrated_windows(const std::filesystem::path& corpus_dir,
                                              const Config& config, std::size_t max_windows) {
    const std::size_t w = config.vae.w;
    std::vector<Vec> all;
    for (const std::string& task_id : list_corpus_tasks(corpus_dir)) {
        RawTraceSet raw = read_corpus_task(corpus_dir, task_id);
        std::vector<AlignedTensor> tensors = preprocess_task(raw, config);
        if (tensors.size() != config.active_metrics.size()) continue;
        GroundTruth truth;
        if (corpus_has_truth(corpus_dir, task_id)) truth = read_corpus_truth(corpus_dir, task_id);
        const AlignedTensor& ref = tensors.front();
        if (ref.steps() < w) continue;
        for (std::size_t m = 0; m < ref.machines(); ++m) {
            for (std::size_t start = 0; start + w <= ref.steps(); start += config.detector.stride) {
                if (window_overlaps_fault(ref, start, w, truth, ref.machine_ids[m])) continue;
                all.push_back(integrated_window(tensors, config.active_metrics, m, start, w));
            }
        }
    }
    TrainingSet set;
    set.windows_seen = all.size();
    if (all.size() <= max_windows) {
        set.windows = std::move(all);
        return set;
    }
    const std::size_t step = all.size() / max_windows;
    for (std::size_t i = 0; i < max_windows; ++i) set.windows.push_back(std::move(all[i * step]));
    return set;
}

inline std::filesystem::path model_path(const std::filesystem::path& models_dir,
                                        MetricKind metric) {
    return models_dir / (std::string(metric_name(metric)) + ".vae");
}

inline std::filesystem::path integrated_model_path(const std::filesystem::path& models_dir) {
    return models_dir / "integrated.vae";
}

struct TrainSummary {
    MetricKind metric = MetricKind::CpuUsage;
    std::size_t windows = 0;
    double best_loss = 0.0;
    std::size_t best_epoch = 0;
    double seconds = 0.0;
};

/// Train one model per active metric (in parallel) and persist them.
/// Each metric trains from its own derived seed, so results do not depend
/// on scheduling. A small number of seeded restarts guards against the
/// occasional run that stays on the predict-the-mean plateau; the restart
/// with the lowest epoch-mean loss wins.
inline std::vector<TrainSummary> train_corpus_models(const std::filesystem::path& corpus_dir,
                                                     const Config& config,
                                                     const std::filesystem::path& models_dir,
                                                     std::size_t max_windows_per_metric = 4096,
                                                     std::size_t max_workers = 8,
                                                     std::size_t restarts = 2) {
    std::filesystem::create_directories(models_dir);
    const auto& metrics = config.active_metrics;
    std::vector<TrainSummary> summaries(metrics.size());
    parallel_for(metrics.size(), max_workers, [&](std::size_t i) {
        const MetricKind metric = metrics[i];
        const auto t0 = std::chrono::steady_clock::now();
        TrainingSet set = collect_training_windows(corpus_dir, config, metric, max_windows_per_metric);
        TrainResult best;
        for (std::size_t r = 0; r < std::max<std::size_t>(1, restarts); ++r) {
            VaeHyperparams hp = config.vae;
            hp.seed = derive_seed(config.vae.seed, static_cast<std::uint64_t>(metric), r);
            TrainResult result = train_model(set.windows, hp, metric);
            if (r == 0 || result.best_loss < best.best_loss) best = std::move(result);
        }
        save_model(best.model, model_path(models_dir, metric));
        const auto t1 = std::chrono::steady_clock::now();
        summaries[i] = {metric, set.windows.size(), best.best_loss, best.best_epoch,
                        std::chrono::duration<double>(t1 - t0).count()};
    });
    return summaries;
}

/// Train the single integrated model used by the INT ablation.
inline TrainSummary train_integrated_model(const std::filesystem::path& corpus_dir,
                                           const Config& config,
                                           const std::filesystem::path& models_dir,
                                           std::size_t max_windows = 4096) {
    std::filesystem::create_directories(models_dir);
    const auto t0 = std::chrono::steady_clock::now();
    TrainingSet set = collect_integrated_windows(corpus_dir, config, max_windows);
    VaeHyperparams hp = config.vae;
    hp.seed = derive_seed(config.vae.seed, 0x1A7);
    TrainResult result = train_model(set.windows, hp, config.active_metrics);
    save_model(result.model, integrated_model_path(models_dir));
    const auto t1 = std::chrono::steady_clock::now();
    return {config.active_metrics.front(), set.windows.size(), result.best_loss, result.best_epoch,
            std::chrono::duration<double>(t1 - t0).count()};
}

inline std::map<MetricKind, VaeModel> load_corpus_models(const std::filesystem::path& models_dir,
                                                         const std::vector<MetricKind>& metrics) {
    std::map<MetricKind, VaeModel> models;
    for (MetricKind metric : metrics) {
        const auto path = model_path(models_dir, metric);
        if (!std::filesystem::exists(path))
            throw MissingModel("model file missing: " + path.string());
        models[metric] = load_model(path);
    }
    return models;
}

// ---------------------------------------------------------------------------
// prioritization over a labeled corpus

struct PrioritizeResult {
    DecisionTree tree;
    PriorityList priority;
    std::size_t n_instances = 0;
    std::size_t n_abnormal = 0;
};

/// Build max-Z instances over non-overlapping spans of length w and induce
/// the metric-priority tree.
inline PrioritizeResult prioritize_corpus(const std::filesystem::path& corpus_dir,
                                          const Config& config, std::size_t max_depth = 7,
                                          std::size_t min_samples_leaf = 1) {
    std::vector<ZScoreFeature> dataset;
    const std::size_t w = config.vae.w;
    for (const std::string& task_id : list_corpus_tasks(corpus_dir)) {
        RawTraceSet raw = read_corpus_task(corpus_dir, task_id);
        std::vector<AlignedTensor> tensors = preprocess_task(raw, config);
        if (tensors.empty()) continue;
        GroundTruth truth;
        if (corpus_has_truth(corpus_dir, task_id)) truth = read_corpus_truth(corpus_dir, task_id);
        const std::size_t steps = tensors.front().steps();
        for (std::size_t start = 0; start + w <= steps; start += w) {
            const double t0 = tensors.front().time_of(start);
            const double t1 = tensors.front().time_of(start + w - 1) +
                              tensors.front().grid_interval;
            SpanLabel label = SpanLabel::Normal;
            for (const auto& fault : truth.faults) {
                if (t0 < fault.onset_s + fault.duration_s && fault.onset_s < t1) {
                    label = SpanLabel::Abnormal;
                    break;
                }
            }
            dataset.push_back(max_z_feature(tensors, start, start + w, label));
        }
    }

    PrioritizeResult result;
    result.n_instances = dataset.size();
    for (const auto& inst : dataset)
        result.n_abnormal += inst.label == SpanLabel::Abnormal ? 1 : 0;

    // Restrict the feature catalog to metrics every instance carries.
    std::vector<MetricKind> catalog;
    for (MetricKind metric : config.active_metrics) {
        bool everywhere = !dataset.empty();
        for (const auto& inst : dataset) {
            if (inst.per_metric_max_z.find(metric) == inst.per_metric_max_z.end()) {
                everywhere = false;
                break;
            }
        }
        if (everywhere) catalog.push_back(metric);
    }
    result.tree = train_tree(dataset, catalog, max_depth, min_samples_leaf);
    result.priority = extract_priority(result.tree, config.active_metrics);
    return result;
}

// ---------------------------------------------------------------------------
// corpus-level detection

struct CorpusDetection {
    std::map<std::string, std::vector<Alert>> alerts_by_task;
    std::map<std::string, SessionStats> stats_by_task;
    std::vector<nlohmann::json> alert_rows;  // jsonl payloads, task-sorted
    double total_seconds = 0.0;
    std::map<std::string, double> seconds_by_task;
};

/// Run one pipeline over every task of a corpus (tasks in parallel).
inline CorpusDetection detect_corpus(const std::filesystem::path& corpus_dir, const Config& config,
                                     const std::map<MetricKind, VaeModel>& models,
                                     const VaeModel* integrated_model,
                                     const PriorityList& priority, PipelineKind kind,
                                     std::size_t max_workers = 8) {
    const std::vector<std::string> task_ids = list_corpus_tasks(corpus_dir);
    CorpusDetection out;
    std::vector<SessionResult> results(task_ids.size());
    std::vector<double> grid_starts(task_ids.size(), 0.0);
    std::vector<double> grid_intervals(task_ids.size(), 1.0);
    std::vector<double> seconds(task_ids.size(), 0.0);

    const auto wall0 = std::chrono::steady_clock::now();
    parallel_for(task_ids.size(), max_workers, [&](std::size_t i) {
        const auto t0 = std::chrono::steady_clock::now();
        RawTraceSet raw = read_corpus_task(corpus_dir, task_ids[i]);
        std::vector<AlignedTensor> tensors = preprocess_task(raw, config);
        if (tensors.empty()) return;
        grid_starts[i] = tensors.front().grid_start;
        grid_intervals[i] = tensors.front().grid_interval;
        switch (kind) {
            case PipelineKind::Minder:
                results[i] = detect_session(tensors, models, priority, config.detector);
                break;
            case PipelineKind::Md:
                results[i] = md_session(tensors, config.detector);
                break;
            case PipelineKind::Raw:
                results[i] = raw_session(tensors, priority, config.detector);
                break;
            case PipelineKind::Con:
                results[i] = con_session(tensors, models, config.detector);
                break;
            case PipelineKind::Int:
                if (integrated_model == nullptr)
                    throw MissingModel("integrated model required for the int pipeline");
                results[i] = int_session(tensors, *integrated_model, config.detector);
                break;
        }
        const auto t1 = std::chrono::steady_clock::now();
        seconds[i] = std::chrono::duration<double>(t1 - t0).count();
    });
    const auto wall1 = std::chrono::steady_clock::now();
    out.total_seconds = std::chrono::duration<double>(wall1 - wall0).count();

    for (std::size_t i = 0; i < task_ids.size(); ++i) {
        out.alerts_by_task[task_ids[i]] = results[i].alerts;
        out.stats_by_task[task_ids[i]] = results[i].stats;
        out.seconds_by_task[task_ids[i]] = seconds[i];
        for (const Alert& alert : results[i].alerts) {
            out.alert_rows.push_back(alert_to_json(alert, grid_starts[i], grid_intervals[i]));
        }
    }
    return out;
}

}  // namespace minder
