// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "minder/detect.hpp"
#include "minder/moments.hpp"
#include "minder/pca.hpp"
#include "minder/tensor.hpp"
#include "minder/vae.hpp"

namespace minder {

struct MdConfig {
    std::size_t max_components = 4;       // k = min(max_components, M - 1)
    double covariance_ridge = 1e-6;       // lambda added to the projected covariance
};

/// Pairwise Mahalanobis distance sums over PCA-projected moment features.
/// The covariance of the projected scores is estimated from the same window
/// and ridge-regularized so near-singular spreads stay defined.
inline std::vector<double> mahalanobis_distance_sums(const PcaResult& pca, double ridge) {
    const std::size_t m = pca.rows;
    const std::size_t k = pca.components;

    // Sample covariance of the scores is diagonal by construction (PCA), but
    // estimate it explicitly so the reduction to Euclidean under identity
    // covariance is an algebraic fact rather than an assumption.
    Vec mean(k, 0.0);
    for (std::size_t r = 0; r < m; ++r)
        for (std::size_t j = 0; j < k; ++j) mean[j] += pca.score_at(r, j);
    for (double& v : mean) v /= static_cast<double>(m);
    Vec var(k, 0.0);
    for (std::size_t r = 0; r < m; ++r) {
        for (std::size_t j = 0; j < k; ++j) {
            const double d = pca.score_at(r, j) - mean[j];
            var[j] += d * d;
        }
    }
    for (double& v : var) v = v / static_cast<double>(m - 1) + ridge;

    std::vector<double> sums(m, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = i + 1; j < m; ++j) {
            double acc = 0.0;
            for (std::size_t c = 0; c < k; ++c) {
                const double d = pca.score_at(i, c) - pca.score_at(j, c);
                acc += d * d / var[c];
            }
            const double dist = std::sqrt(acc);
            sums[i] += dist;
            sums[j] += dist;
        }
    }
    return sums;
}

/// The statistical-outlier reference detector: per machine, moment features
/// of every metric's window, PCA across machines, Mahalanobis distance sums,
/// then the same normal-score threshold as the primary pipeline.
inline WindowVerdict md_detect(const std::vector<AlignedTensor>& tensors, std::size_t window_start,
                               const DetectorConfig& cfg, const MdConfig& md) {
    if (tensors.empty()) throw ConfigError("md_detect needs tensors");
    const std::size_t m = tensors.front().machines();
    const std::size_t w = cfg.window_w;
    const std::size_t n_features = tensors.size() * 4;

    Vec features(m * n_features, 0.0);
    for (std::size_t ti = 0; ti < tensors.size(); ++ti) {
        const AlignedTensor& tensor = tensors[ti];
        if (!tensor.normalized) throw ConfigError("md_detect needs normalized tensors");
        if (window_start + w > tensor.steps()) throw WindowOutOfRange("window out of range");
        for (std::size_t i = 0; i < m; ++i) {
            const MomentFeatures f = stat_features(
                std::span<const double>(tensor.values.data() + i * tensor.steps() + window_start, w));
            double* row = features.data() + i * n_features + ti * 4;
            row[0] = f.mean;
            row[1] = f.variance;
            row[2] = f.skewness;
            row[3] = f.kurtosis;
        }
    }

    const std::size_t k = std::min(md.max_components, m - 1);
    PcaResult pca = pca_project(features, m, n_features, std::max<std::size_t>(1, k));
    const auto sums = mahalanobis_distance_sums(pca, md.covariance_ridge);

    return make_verdict(tensors.front().metric, window_start, normal_scores(sums),
                        cfg.similarity_threshold);
}

enum class AblationMode { Raw, Concat, Integrated };

/// RAW ablation: the untouched (preprocessed but not denoised) window is the
/// embedding; everything downstream matches detect_window.
inline WindowVerdict raw_detect_window(const AlignedTensor& tensor, std::size_t window_start,
                                       const DetectorConfig& cfg) {
    if (!tensor.normalized) throw ConfigError("raw_detect_window needs a normalized tensor");
    if (window_start + cfg.window_w > tensor.steps())
        throw WindowOutOfRange("window out of range");
    const std::size_t m = tensor.machines();
    std::vector<Vec> embeddings(m);
    for (std::size_t i = 0; i < m; ++i) {
        const double* begin = tensor.values.data() + i * tensor.steps() + window_start;
        embeddings[i].assign(begin, begin + cfg.window_w);
    }
    return make_verdict(tensor.metric, window_start,
                        normal_scores(distance_sums(embeddings, cfg.distance_kind)),
                        cfg.similarity_threshold);
}

/// CON ablation: per-metric embeddings from every model concatenated into
/// one vector per machine, then a single distance pass.
inline WindowVerdict concat_detect_window(const std::vector<AlignedTensor>& tensors,
                                          const std::map<MetricKind, VaeModel>& models,
                                          std::size_t window_start, const DetectorConfig& cfg,
                                          VaeWorkspace& ws) {
    if (tensors.empty()) throw ConfigError("concat_detect_window needs tensors");
    const std::size_t m = tensors.front().machines();
    std::vector<Vec> embeddings(m);
    for (const AlignedTensor& tensor : tensors) {
        const auto it = models.find(tensor.metric);
        if (it == models.end())
            throw MissingModel("no model for metric " + std::string(metric_name(tensor.metric)));
        for (std::size_t i = 0; i < m; ++i) {
            Reconstruction rec = vae_denoise_raw(
                it->second, tensor.values.data() + i * tensor.steps() + window_start, ws);
            const Vec& part =
                cfg.embedding_source == EmbeddingSource::LatentMu ? rec.mu : rec.denoised;
            embeddings[i].insert(embeddings[i].end(), part.begin(), part.end());
        }
    }
    return make_verdict(tensors.front().metric, window_start,
                        normal_scores(distance_sums(embeddings, cfg.distance_kind)),
                        cfg.similarity_threshold);
}

/// Assemble one machine's multi-metric window (step-major) for the
/// integrated model: column order is the model's input metric order.
inline Vec integrated_window(const std::vector<AlignedTensor>& tensors,
                             const std::vector<MetricKind>& metric_order, std::size_t machine,
                             std::size_t window_start, std::size_t w) {
    Vec out(w * metric_order.size(), 0.0);
    for (std::size_t j = 0; j < metric_order.size(); ++j) {
        const AlignedTensor* tensor = nullptr;
        for (const AlignedTensor& t : tensors) {
            if (t.metric == metric_order[j]) {
                tensor = &t;
                break;
            }
        }
        if (tensor == nullptr)
            throw GridMismatch("integrated model input metric missing: " +
                               std::string(metric_name(metric_order[j])));
        for (std::size_t t = 0; t < w; ++t) {
            out[t * metric_order.size() + j] = tensor->at(machine, window_start + t);
        }
    }
    return out;
}

/// INT ablation: one model consumes all metrics at once; its reconstruction
/// (or latent mean) is the embedding.
inline WindowVerdict integrated_detect_window(const std::vector<AlignedTensor>& tensors,
                                              const VaeModel& model, std::size_t window_start,
                                              const DetectorConfig& cfg, VaeWorkspace& ws) {
    if (tensors.empty()) throw ConfigError("integrated_detect_window needs tensors");
    const std::size_t m = tensors.front().machines();
    std::vector<Vec> embeddings(m);
    for (std::size_t i = 0; i < m; ++i) {
        const Vec x = integrated_window(tensors, model.input_metrics, i, window_start, cfg.window_w);
        Reconstruction rec;
        rec = vae_denoise_raw(model, x.data(), ws);
        embeddings[i] =
            cfg.embedding_source == EmbeddingSource::LatentMu ? std::move(rec.mu)
                                                              : std::move(rec.denoised);
    }
    return make_verdict(tensors.front().metric, window_start,
                        normal_scores(distance_sums(embeddings, cfg.distance_kind)),
                        cfg.similarity_threshold);
}

// ---------------------------------------------------------------------------
// whole-task sessions for the baselines; they reuse the primary pipeline's
// continuity machinery so every pipeline emits the same Alert type

namespace detail {

inline void check_shared_grid(const std::vector<AlignedTensor>& tensors) {
    const auto& ref = tensors.front();
    for (const AlignedTensor& t : tensors) {
        if (t.machine_ids != ref.machine_ids || t.steps() != ref.steps() ||
            t.grid_start != ref.grid_start || t.grid_interval != ref.grid_interval)
            throw GridMismatch("tensors disagree on machine set or grid for task " + t.task_id);
    }
}

}  // namespace detail

inline SessionResult md_session(const std::vector<AlignedTensor>& tensors,
                                const DetectorConfig& cfg, const MdConfig& md = MdConfig{}) {
    SessionResult result;
    if (tensors.empty()) return result;
    detail::check_shared_grid(tensors);
    result.stats.metrics_scanned.push_back(tensors.front().metric);
    result.alerts = scan_metric(
        tensors.front(), cfg,
        [&](std::size_t start) { return md_detect(tensors, start, cfg, md); }, result.stats);
    return result;
}

/// RAW keeps the per-metric fall-through of the primary pipeline, only the
/// denoising step is skipped.
inline SessionResult raw_session(const std::vector<AlignedTensor>& tensors,
                                 const PriorityList& priority, const DetectorConfig& cfg) {
    SessionResult result;
    if (tensors.empty()) return result;
    detail::check_shared_grid(tensors);
    std::map<MetricKind, const AlignedTensor*> by_metric;
    for (const AlignedTensor& t : tensors) by_metric[t.metric] = &t;
    for (const auto& entry : priority.ordered) {
        const auto it = by_metric.find(entry.metric);
        if (it == by_metric.end()) continue;
        const AlignedTensor& tensor = *it->second;
        result.stats.metrics_scanned.push_back(entry.metric);
        auto alerts = scan_metric(
            tensor, cfg,
            [&](std::size_t start) { return raw_detect_window(tensor, start, cfg); },
            result.stats);
        result.alerts.insert(result.alerts.end(), alerts.begin(), alerts.end());
        if (!result.alerts.empty() && !cfg.scan_all_metrics) break;
    }
    return result;
}

inline SessionResult con_session(const std::vector<AlignedTensor>& tensors,
                                 const std::map<MetricKind, VaeModel>& models,
                                 const DetectorConfig& cfg) {
    SessionResult result;
    if (tensors.empty()) return result;
    detail::check_shared_grid(tensors);
    VaeWorkspace ws;
    result.stats.metrics_scanned.push_back(tensors.front().metric);
    result.alerts = scan_metric(
        tensors.front(), cfg,
        [&](std::size_t start) { return concat_detect_window(tensors, models, start, cfg, ws); },
        result.stats);
    return result;
}

inline SessionResult int_session(const std::vector<AlignedTensor>& tensors, const VaeModel& model,
                                 const DetectorConfig& cfg) {
    SessionResult result;
    if (tensors.empty()) return result;
    detail::check_shared_grid(tensors);
    VaeWorkspace ws;
    result.stats.metrics_scanned.push_back(tensors.front().metric);
    result.alerts = scan_metric(
        tensors.front(), cfg,
        [&](std::size_t start) {
            return integrated_detect_window(tensors, model, start, cfg, ws);
        },
        result.stats);
    return result;
}

}  // namespace minder
