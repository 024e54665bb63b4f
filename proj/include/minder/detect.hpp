// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "minder/decision_tree.hpp"
#include "minder/error.hpp"
#include "minder/metric.hpp"
#include "minder/tensor.hpp"
#include "minder/vae.hpp"
#include "minder/zscore.hpp"

namespace minder {

enum class DistanceKind { Euclidean, Manhattan, Chebyshev };
enum class EmbeddingSource { DenoisedVector, LatentMu };

struct DetectorConfig {
    double similarity_threshold = 1.5;
    double continuity_seconds = 240.0;
    std::size_t window_w = 8;
    std::size_t stride = 1;
    double lookback_seconds = 900.0;
    double call_interval_seconds = 480.0;
    DistanceKind distance_kind = DistanceKind::Euclidean;
    EmbeddingSource embedding_source = EmbeddingSource::DenoisedVector;
    /// Keep scanning after the first alerting metric (offline analysis mode).
    bool scan_all_metrics = false;

    void validate(double grid_interval) const {
        if (window_w < 2) throw ConfigError("window_w must be >= 2");
        if (stride < 1) throw ConfigError("stride must be >= 1");
        if (continuity_seconds < 0.0) throw ConfigError("continuity_seconds must be >= 0");
        // continuity 0 is the documented "disabled" mode; a positive value
        // must cover at least one window shift.
        if (continuity_seconds > 0.0 &&
            continuity_seconds < static_cast<double>(stride) * grid_interval)
            throw ConfigError("positive continuity_seconds must be >= stride * grid_interval");
        if (lookback_seconds <
            continuity_seconds + static_cast<double>(window_w) * grid_interval)
            throw ConfigError("lookback must cover continuity_seconds + window");
    }

    /// Consecutive hits required before an alert.
    std::size_t required_hits(double grid_interval) const {
        const double per_hit = static_cast<double>(stride) * grid_interval;
        if (continuity_seconds <= 0.0) return 1;
        return static_cast<std::size_t>(std::ceil(continuity_seconds / per_hit - 1e-9));
    }
};

/// Per-machine sums of pairwise embedding distances; each symmetric pair is
/// computed once.
inline std::vector<double> distance_sums(const std::vector<Vec>& embeddings, DistanceKind kind) {
    const std::size_t m = embeddings.size();
    if (m < 2) throw TooFewMachines("distance_sums needs >= 2 embeddings");
    const std::size_t dim = embeddings.front().size();
    for (const Vec& e : embeddings) {
        if (e.size() != dim) throw LengthMismatch("embedding lengths differ");
    }
    std::vector<double> sums(m, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = i + 1; j < m; ++j) {
            double dist = 0.0;
            switch (kind) {
                case DistanceKind::Euclidean: {
                    double acc = 0.0;
                    for (std::size_t k = 0; k < dim; ++k) {
                        const double d = embeddings[i][k] - embeddings[j][k];
                        acc += d * d;
                    }
                    dist = std::sqrt(acc);
                    break;
                }
                case DistanceKind::Manhattan: {
                    for (std::size_t k = 0; k < dim; ++k)
                        dist += std::abs(embeddings[i][k] - embeddings[j][k]);
                    break;
                }
                case DistanceKind::Chebyshev: {
                    for (std::size_t k = 0; k < dim; ++k)
                        dist = std::max(dist, std::abs(embeddings[i][k] - embeddings[j][k]));
                    break;
                }
            }
            sums[i] += dist;
            sums[j] += dist;
        }
    }
    return sums;
}

/// Standard scores of the distance sums across machines; the outlier
/// criterion. Scale-invariant; degenerate spread yields all zeros.
inline std::vector<double> normal_scores(const std::vector<double>& sums) {
    const std::size_t m = sums.size();
    if (m < 2) throw TooFewMachines("normal_scores needs >= 2 sums");
    double mean = 0.0;
    for (double s : sums) mean += s;
    mean /= static_cast<double>(m);
    double var = 0.0;
    for (double s : sums) {
        const double d = s - mean;
        var += d * d;
    }
    const double std_dev = std::sqrt(var / static_cast<double>(m));
    std::vector<double> scores(m, 0.0);
    if (std_dev < kStdEpsilon) return scores;
    for (std::size_t i = 0; i < m; ++i) scores[i] = (sums[i] - mean) / std_dev;
    return scores;
}

/// Outcome of one sliding-window check.
struct WindowVerdict {
    MetricKind metric = MetricKind::CpuUsage;
    std::size_t window_start = 0;  // grid index
    std::optional<std::size_t> candidate_machine;
    std::vector<double> normal_scores;

    double max_score() const {
        double best = -std::numeric_limits<double>::infinity();
        for (double s : normal_scores) best = std::max(best, s);
        return best;
    }
};

struct Alert {
    std::string task_id;
    std::string machine_id;
    MetricKind metric = MetricKind::CpuUsage;
    std::size_t first_window_start = 0;
    std::size_t last_window_start = 0;
    std::size_t consecutive_hits = 0;
    double peak_normal_score = 0.0;
};

/// Assemble a verdict from scores: the machine with the maximum normal
/// score becomes the candidate iff it clears the threshold. Ties keep the
/// lowest machine index.
inline WindowVerdict make_verdict(MetricKind metric, std::size_t window_start,
                                  std::vector<double> scores, double threshold) {
    WindowVerdict verdict;
    verdict.metric = metric;
    verdict.window_start = window_start;
    verdict.normal_scores = std::move(scores);
    double best = -std::numeric_limits<double>::infinity();
    std::size_t best_machine = 0;
    for (std::size_t i = 0; i < verdict.normal_scores.size(); ++i) {
        if (verdict.normal_scores[i] > best) {
            best = verdict.normal_scores[i];
            best_machine = i;
        }
    }
    if (best > threshold) verdict.candidate_machine = best_machine;
    return verdict;
}

/// Denoise every machine's window, score dissimilarity, and nominate the
/// most distant machine if it clears the similarity threshold.
inline WindowVerdict detect_window(const AlignedTensor& tensor, const VaeModel& model,
                                   std::size_t window_start, const DetectorConfig& cfg,
                                   VaeWorkspace& ws) {
    if (!tensor.normalized) throw ConfigError("detect_window needs a normalized tensor");
    if (tensor.metric != model.metric || model.input_width() != 1)
        throw MetricMismatch("model does not match tensor metric");
    if (window_start + cfg.window_w > tensor.steps())
        throw WindowOutOfRange("window start " + std::to_string(window_start) +
                               " out of range");

    const std::size_t m = tensor.machines();
    std::vector<Vec> embeddings(m);
    for (std::size_t i = 0; i < m; ++i) {
        Reconstruction rec = vae_denoise_raw(model, tensor.values.data() + i * tensor.steps() + window_start, ws);
        embeddings[i] = cfg.embedding_source == EmbeddingSource::LatentMu ? std::move(rec.mu)
                                                                          : std::move(rec.denoised);
    }
    return make_verdict(tensor.metric, window_start,
                        normal_scores(distance_sums(embeddings, cfg.distance_kind)),
                        cfg.similarity_threshold);
}

/// Debounces window verdicts into alerts: the same machine must stay the
/// candidate for `required_hits` consecutive windows. A candidate change
/// starts a fresh run at count 1; each (machine, metric) pair alerts at
/// most once per tracker lifetime.
class ContinuityTracker {
public:
    ContinuityTracker(std::string task_id, const std::vector<std::string>& machine_ids,
                      const DetectorConfig& cfg, double grid_interval)
        : task_id_(std::move(task_id)),
          machine_ids_(machine_ids),
          required_hits_(cfg.required_hits(grid_interval)) {}

    std::optional<Alert> update(const WindowVerdict& verdict) {
        if (last_start_ && verdict.window_start <= *last_start_)
            throw OutOfOrderVerdict("verdict for window " + std::to_string(verdict.window_start) +
                                    " arrived after " + std::to_string(*last_start_));
        last_start_ = verdict.window_start;

        if (!verdict.candidate_machine) {
            run_length_ = 0;
            return std::nullopt;
        }
        const std::size_t machine = *verdict.candidate_machine;
        if (run_length_ == 0 || machine != run_machine_) {
            run_machine_ = machine;
            run_length_ = 1;
            run_first_start_ = verdict.window_start;
            run_peak_ = verdict.normal_scores[machine];
        } else {
            ++run_length_;
            run_peak_ = std::max(run_peak_, verdict.normal_scores[machine]);
        }

        if (run_length_ < required_hits_) return std::nullopt;
        if (alerted_.count(machine) != 0) return std::nullopt;
        alerted_.insert(machine);

        Alert alert;
        alert.task_id = task_id_;
        alert.machine_id = machine_ids_[machine];
        alert.metric = verdict.metric;
        alert.first_window_start = run_first_start_;
        alert.last_window_start = verdict.window_start;
        alert.consecutive_hits = run_length_;
        alert.peak_normal_score = run_peak_;
        return alert;
    }

private:
    std::string task_id_;
    std::vector<std::string> machine_ids_;
    std::size_t required_hits_;
    std::optional<std::size_t> last_start_;
    std::size_t run_machine_ = 0;
    std::size_t run_length_ = 0;
    std::size_t run_first_start_ = 0;
    double run_peak_ = 0.0;
    std::set<std::size_t> alerted_;
};

/// Per-session instrumentation (fall-through behavior is test surface).
struct SessionStats {
    std::vector<MetricKind> metrics_scanned;
    std::size_t window_evaluations = 0;
};

struct SessionResult {
    std::vector<Alert> alerts;
    SessionStats stats;
};

namespace detail {

/// First window start index covered by the lookback range.
inline std::size_t lookback_first_start(const AlignedTensor& tensor, const DetectorConfig& cfg) {
    const std::size_t steps = tensor.steps();
    const auto lookback_steps =
        static_cast<std::size_t>(std::floor(cfg.lookback_seconds / tensor.grid_interval + 1e-9));
    if (lookback_steps >= steps) return 0;
    return steps - lookback_steps;
}

}  // namespace detail

/// Scan one metric's tensor over the lookback range, feeding the continuity
/// tracker in window order.
template <typename WindowFn>
inline std::vector<Alert> scan_metric(const AlignedTensor& tensor, const DetectorConfig& cfg,
                                      WindowFn window_verdict, SessionStats& stats) {
    cfg.validate(tensor.grid_interval);
    const std::size_t steps = tensor.steps();
    if (steps < cfg.window_w)
        throw WindowTooLong("tensor too short for the configured window");
    ContinuityTracker tracker(tensor.task_id, tensor.machine_ids, cfg, tensor.grid_interval);
    std::vector<Alert> alerts;
    const std::size_t first = detail::lookback_first_start(tensor, cfg);
    for (std::size_t start = first; start + cfg.window_w <= steps; start += cfg.stride) {
        ++stats.window_evaluations;
        if (auto alert = tracker.update(window_verdict(start))) {
            alerts.push_back(std::move(*alert));
        }
    }
    return alerts;
}

/// Online detection for one task: walk metrics in priority order, scan each
/// with the per-metric model, and stop at the first metric that alerts
/// (unless configured to scan everything). An empty result means the task
/// looks healthy.
inline SessionResult detect_session(const std::vector<AlignedTensor>& tensors,
                                    const std::map<MetricKind, VaeModel>& models,
                                    const PriorityList& priority, const DetectorConfig& cfg) {
    SessionResult result;
    if (tensors.empty()) return result;

    const auto& ref = tensors.front();
    std::map<MetricKind, const AlignedTensor*> by_metric;
    for (const AlignedTensor& t : tensors) {
        if (t.machine_ids != ref.machine_ids || t.steps() != ref.steps() ||
            t.grid_start != ref.grid_start || t.grid_interval != ref.grid_interval)
            throw GridMismatch("tensors disagree on machine set or grid for task " + t.task_id);
        by_metric[t.metric] = &t;
    }

    VaeWorkspace ws;
    for (const auto& entry : priority.ordered) {
        const auto tensor_it = by_metric.find(entry.metric);
        if (tensor_it == by_metric.end()) continue;  // metric not collected for this task
        const auto model_it = models.find(entry.metric);
        if (model_it == models.end())
            throw MissingModel("no model for metric " + std::string(metric_name(entry.metric)));
        const AlignedTensor& tensor = *tensor_it->second;
        result.stats.metrics_scanned.push_back(entry.metric);
        auto alerts = scan_metric(
            tensor, cfg,
            [&](std::size_t start) {
                return detect_window(tensor, model_it->second, start, cfg, ws);
            },
            result.stats);
        result.alerts.insert(result.alerts.end(), alerts.begin(), alerts.end());
        if (!result.alerts.empty() && !cfg.scan_all_metrics) break;
    }
    return result;
}

}  // namespace minder
