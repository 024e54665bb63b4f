// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "minder/error.hpp"

namespace minder {

/// Host telemetry channels understood by the toolkit.
enum class MetricKind : std::uint8_t {
    CpuUsage,
    PfcTxPacketRate,
    MemoryUsage,
    DiskUsage,
    TcpThroughput,
    TcpRdmaThroughput,
    GpuMemoryUsed,
    GpuDutyCycle,
    GpuPowerDraw,
    GpuTemperature,
    GpuSmActivity,
    GpuClocks,
    GpuTensorCoreActivity,
    GpuGraphicsEngineActivity,
    GpuFpEngineActivity,
    GpuMemoryBandwidthUtil,
    PcieBandwidth,
    PcieUsage,
    NvlinkBandwidth,
    EcnPacketRate,
    CnpPacketRate,
};

inline constexpr std::size_t kMetricCount = 21;

inline constexpr std::array<std::string_view, kMetricCount> kMetricNames = {
    "CpuUsage",
    "PfcTxPacketRate",
    "MemoryUsage",
    "DiskUsage",
    "TcpThroughput",
    "TcpRdmaThroughput",
    "GpuMemoryUsed",
    "GpuDutyCycle",
    "GpuPowerDraw",
    "GpuTemperature",
    "GpuSmActivity",
    "GpuClocks",
    "GpuTensorCoreActivity",
    "GpuGraphicsEngineActivity",
    "GpuFpEngineActivity",
    "GpuMemoryBandwidthUtil",
    "PcieBandwidth",
    "PcieUsage",
    "NvlinkBandwidth",
    "EcnPacketRate",
    "CnpPacketRate",
};

inline std::string_view metric_name(MetricKind m) {
    return kMetricNames[static_cast<std::size_t>(m)];
}

inline std::optional<MetricKind> parse_metric(std::string_view name) {
    for (std::size_t i = 0; i < kMetricCount; ++i) {
        if (kMetricNames[i] == name) return static_cast<MetricKind>(i);
    }
    return std::nullopt;
}

/// Physical limits used for min-max normalization.
struct MetricBounds {
    double min = 0.0;
    double max = 1.0;
};

/// Catalog of active metrics, in priority-tie-break order, with bounds.
class MetricCatalog {
public:
    MetricCatalog() = default;

    void add(MetricKind metric, MetricBounds bounds) {
        if (!(bounds.min < bounds.max))
            throw ConfigError("bounds.min must be < bounds.max for " +
                              std::string(metric_name(metric)));
        if (contains(metric))
            throw ConfigError("duplicate metric in catalog: " + std::string(metric_name(metric)));
        entries_.push_back({metric, bounds});
    }

    bool contains(MetricKind metric) const { return find_index(metric).has_value(); }

    MetricBounds bounds(MetricKind metric) const {
        auto idx = find_index(metric);
        if (!idx) throw UnknownMetric("metric not in catalog: " + std::string(metric_name(metric)));
        return entries_[*idx].bounds;
    }

    /// Position in catalog order; used for deterministic tie-breaking.
    std::optional<std::size_t> find_index(MetricKind metric) const {
        for (std::size_t i = 0; i < entries_.size(); ++i) {
            if (entries_[i].metric == metric) return i;
        }
        return std::nullopt;
    }

    std::vector<MetricKind> metrics() const {
        std::vector<MetricKind> out;
        out.reserve(entries_.size());
        for (const auto& e : entries_) out.push_back(e.metric);
        return out;
    }

    std::size_t size() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }

private:
    struct Entry {
        MetricKind metric;
        MetricBounds bounds;
    };
    std::vector<Entry> entries_;
};

/// Full 21-metric catalog with built-in physical limits.
inline MetricCatalog default_catalog() {
    MetricCatalog c;
    c.add(MetricKind::CpuUsage, {0.0, 100.0});                 // percent
    c.add(MetricKind::PfcTxPacketRate, {0.0, 20000.0});        // packets/s
    c.add(MetricKind::MemoryUsage, {0.0, 100.0});              // percent
    c.add(MetricKind::DiskUsage, {0.0, 100.0});                // percent
    c.add(MetricKind::TcpThroughput, {0.0, 25.0});             // Gbit/s
    c.add(MetricKind::TcpRdmaThroughput, {0.0, 400.0});        // Gbit/s
    c.add(MetricKind::GpuMemoryUsed, {0.0, 80.0});             // GiB
    c.add(MetricKind::GpuDutyCycle, {0.0, 100.0});             // percent
    c.add(MetricKind::GpuPowerDraw, {0.0, 700.0});             // W
    c.add(MetricKind::GpuTemperature, {0.0, 100.0});           // deg C
    c.add(MetricKind::GpuSmActivity, {0.0, 100.0});            // percent
    c.add(MetricKind::GpuClocks, {0.0, 2100.0});               // MHz
    c.add(MetricKind::GpuTensorCoreActivity, {0.0, 100.0});    // percent
    c.add(MetricKind::GpuGraphicsEngineActivity, {0.0, 100.0});
    c.add(MetricKind::GpuFpEngineActivity, {0.0, 100.0});
    c.add(MetricKind::GpuMemoryBandwidthUtil, {0.0, 100.0});
    c.add(MetricKind::PcieBandwidth, {0.0, 64.0});             // GB/s
    c.add(MetricKind::PcieUsage, {0.0, 100.0});                // percent
    c.add(MetricKind::NvlinkBandwidth, {0.0, 600.0});          // GB/s
    c.add(MetricKind::EcnPacketRate, {0.0, 100000.0});         // packets/s
    c.add(MetricKind::CnpPacketRate, {0.0, 100000.0});         // packets/s
    return c;
}

}  // namespace minder
