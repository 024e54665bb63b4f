// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "minder/error.hpp"
#include "minder/metric.hpp"
#include "minder/tensor.hpp"

namespace minder {

inline constexpr double kStdEpsilon = 1e-9;

/// Cross-machine standard scores at one grid index. Degenerate dispersion
/// (population std below epsilon) yields all zeros.
inline std::vector<double> zscore_per_machine(const AlignedTensor& tensor, std::size_t time_index) {
    const std::size_t m = tensor.machines();
    if (m < 2) throw TooFewMachines("z-scores need >= 2 machines");
    if (time_index >= tensor.steps()) throw IndexOutOfRange("time index out of range");

    double mean = 0.0;
    for (std::size_t i = 0; i < m; ++i) mean += tensor.at(i, time_index);
    mean /= static_cast<double>(m);
    double var = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        const double d = tensor.at(i, time_index) - mean;
        var += d * d;
    }
    const double std_dev = std::sqrt(var / static_cast<double>(m));

    std::vector<double> z(m, 0.0);
    if (std_dev < kStdEpsilon) return z;
    for (std::size_t i = 0; i < m; ++i) {
        z[i] = (tensor.at(i, time_index) - mean) / std_dev;
    }
    return z;
}

enum class SpanLabel { Normal, Abnormal };

/// One prioritization instance: per metric, the worst cross-machine
/// dispersion (max |Z| over machines and over the span's grid indices).
struct ZScoreFeature {
    std::string task_id;
    std::size_t span_start = 0;  // grid indices, [start, end)
    std::size_t span_end = 0;
    std::map<MetricKind, double> per_metric_max_z;
    SpanLabel label = SpanLabel::Normal;
};

/// Build the feature for one span from all of a task's metric tensors.
inline ZScoreFeature max_z_feature(const std::vector<AlignedTensor>& tensors,
                                   std::size_t span_start, std::size_t span_end, SpanLabel label) {
    if (tensors.empty()) throw SpanUncovered("no tensors supplied");
    if (span_end <= span_start) throw SpanUncovered("empty span");
    ZScoreFeature feature;
    feature.task_id = tensors.front().task_id;
    feature.span_start = span_start;
    feature.span_end = span_end;
    feature.label = label;
    for (const AlignedTensor& tensor : tensors) {
        if (span_end > tensor.steps())
            throw SpanUncovered("span [" + std::to_string(span_start) + ", " +
                                std::to_string(span_end) + ") exceeds tensor for metric " +
                                std::string(metric_name(tensor.metric)));
        double max_abs = 0.0;
        for (std::size_t t = span_start; t < span_end; ++t) {
            const auto z = zscore_per_machine(tensor, t);
            for (double v : z) max_abs = std::max(max_abs, std::abs(v));
        }
        feature.per_metric_max_z[tensor.metric] = max_abs;
    }
    return feature;
}

}  // namespace minder
