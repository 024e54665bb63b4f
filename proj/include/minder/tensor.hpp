// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "minder/error.hpp"
#include "minder/metric.hpp"
#include "minder/trace.hpp"

namespace minder {

/// One metric of one task on a common time grid: M machines x T steps,
/// no gaps. Row i is machine_ids[i]'s series.
struct AlignedTensor {
    std::string task_id;
    MetricKind metric = MetricKind::CpuUsage;
    std::vector<std::string> machine_ids;
    double grid_start = 0.0;
    double grid_interval = 1.0;
    std::vector<double> values;  // row-major M x T
    bool normalized = false;

    std::size_t machines() const { return machine_ids.size(); }
    std::size_t steps() const {
        return machine_ids.empty() ? 0 : values.size() / machine_ids.size();
    }

    double at(std::size_t machine, std::size_t t) const { return values[machine * steps() + t]; }
    double& at(std::size_t machine, std::size_t t) { return values[machine * steps() + t]; }

    std::span<const double> row(std::size_t machine) const {
        return {values.data() + machine * steps(), steps()};
    }

    double time_of(std::size_t t) const { return grid_start + static_cast<double>(t) * grid_interval; }
};

/// Contiguous slice of one machine's series; the model input unit.
struct Window {
    std::size_t machine_index = 0;
    MetricKind metric = MetricKind::CpuUsage;
    std::size_t start_index = 0;
    std::span<const double> data;
};

/// Pad every machine's stream onto a shared grid. The grid covers the
/// intersection of the machines' time ranges, anchored at multiples of
/// `grid_interval`; each cell takes the sample nearest in time, earlier
/// sample winning ties.
inline AlignedTensor align(const RawTraceSet& raw, MetricKind metric, double grid_interval = 1.0) {
    if (grid_interval <= 0.0) throw ConfigError("grid_interval must be positive");

    std::vector<const std::vector<Sample>*> streams;
    AlignedTensor out;
    out.task_id = raw.task_id;
    out.metric = metric;
    out.grid_interval = grid_interval;

    for (const auto& [key, stream] : raw.samples) {
        if (key.metric != metric || stream.empty()) continue;
        out.machine_ids.push_back(key.machine_id);
        streams.push_back(&stream);
    }
    if (out.machine_ids.size() < 2)
        throw TooFewMachines("align needs >= 2 machines with metric " +
                             std::string(metric_name(metric)) + ", got " +
                             std::to_string(out.machine_ids.size()));

    double first = -std::numeric_limits<double>::infinity();
    double last = std::numeric_limits<double>::infinity();
    for (const auto* s : streams) {
        first = std::max(first, s->front().timestamp);
        last = std::min(last, s->back().timestamp);
    }
    // Snap to grid multiples; the 1e-9 slack absorbs representation error of
    // decimal timestamps.
    const double start = std::ceil(first / grid_interval - 1e-9) * grid_interval;
    const double end = std::floor(last / grid_interval + 1e-9) * grid_interval;
    if (end < start - 1e-9)
        throw EmptyOverlap("machine streams share no common grid range for metric " +
                           std::string(metric_name(metric)));

    const auto steps = static_cast<std::size_t>(std::floor((end - start) / grid_interval + 1e-9)) + 1;
    out.grid_start = start;
    out.values.resize(out.machine_ids.size() * steps);

    for (std::size_t m = 0; m < streams.size(); ++m) {
        const std::vector<Sample>& stream = *streams[m];
        std::size_t cursor = 0;
        for (std::size_t t = 0; t < steps; ++t) {
            const double g = start + static_cast<double>(t) * grid_interval;
            // Advance while the next sample is strictly nearer (ties keep the
            // earlier sample).
            while (cursor + 1 < stream.size() &&
                   std::abs(stream[cursor + 1].timestamp - g) <
                       std::abs(stream[cursor].timestamp - g)) {
                ++cursor;
            }
            out.values[m * steps + t] = stream[cursor].value;
        }
    }
    out.normalized = false;
    return out;
}

/// Min-max normalize against the metric's physical bounds, clamping to
/// [0, 1] so sensor overshoot cannot leave the model input domain.
inline AlignedTensor normalize_minmax(const AlignedTensor& tensor, MetricBounds bounds) {
    if (tensor.normalized) throw AlreadyNormalized("tensor already normalized");
    if (!(bounds.min < bounds.max)) throw ConfigError("invalid bounds for normalization");
    AlignedTensor out = tensor;
    const double span = bounds.max - bounds.min;
    for (double& v : out.values) {
        v = std::clamp((v - bounds.min) / span, 0.0, 1.0);
    }
    out.normalized = true;
    return out;
}

inline AlignedTensor normalize_minmax(const AlignedTensor& tensor, const MetricCatalog& catalog) {
    return normalize_minmax(tensor, catalog.bounds(tensor.metric));
}

/// Number of windows of length `w` at stride `stride` over a series of
/// length `steps`.
inline std::size_t window_count(std::size_t steps, std::size_t w, std::size_t stride) {
    if (w < 2) throw ConfigError("window length must be >= 2");
    if (stride < 1) throw ConfigError("stride must be >= 1");
    if (w > steps)
        throw WindowTooLong("window of " + std::to_string(w) + " exceeds series of " +
                            std::to_string(steps));
    return (steps - w) / stride + 1;
}

/// One machine's window starting at a given grid index.
inline Window window_at(const AlignedTensor& tensor, std::size_t machine, std::size_t start,
                        std::size_t w) {
    if (machine >= tensor.machines()) throw IndexOutOfRange("machine index out of range");
    if (start + w > tensor.steps()) throw WindowOutOfRange("window exceeds tensor extent");
    return Window{machine, tensor.metric, start,
                  std::span<const double>(tensor.values.data() + machine * tensor.steps() + start, w)};
}

/// All windows for one machine, in time order.
inline std::vector<Window> window_iter(const AlignedTensor& tensor, std::size_t machine,
                                       std::size_t w, std::size_t stride) {
    const std::size_t n = window_count(tensor.steps(), w, stride);
    std::vector<Window> out;
    out.reserve(n);
    for (std::size_t k = 0; k < n; ++k) {
        out.push_back(window_at(tensor, machine, k * stride, w));
    }
    return out;
}

/// Round-trip an aligned tensor back into raw streams (used when feeding
/// simulator output through the same ingestion path as real traces).
inline RawTraceSet tensor_to_traces(const AlignedTensor& tensor) {
    RawTraceSet out;
    out.task_id = tensor.task_id;
    for (std::size_t m = 0; m < tensor.machines(); ++m) {
        auto& stream = out.samples[{tensor.machine_ids[m], tensor.metric}];
        stream.reserve(tensor.steps());
        for (std::size_t t = 0; t < tensor.steps(); ++t) {
            stream.push_back({tensor.time_of(t), tensor.at(m, t)});
        }
    }
    return out;
}

}  // namespace minder
