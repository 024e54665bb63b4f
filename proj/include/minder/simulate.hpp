// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "minder/error.hpp"
#include "minder/metric.hpp"
#include "minder/rng.hpp"
#include "minder/trace.hpp"

#include <json.hpp>

namespace minder {

// ---------------------------------------------------------------------------
// waveforms

enum class WaveformKind { Constant, Sine, Square, Composite };

/// Deterministic base signal, in the metric's raw units. All machines of a
/// task share the same waveform; only the additive noise differs per
/// machine. That shared shape is what makes cross-machine similarity hold
/// for healthy tasks.
struct Waveform {
    WaveformKind kind = WaveformKind::Constant;
    double level = 0.0;      // constant / sine midline
    double amplitude = 0.0;  // sine
    double period = 1.0;     // sine / square
    double phase = 0.0;      // sine / square, seconds
    double low = 0.0;        // square
    double high = 0.0;       // square
    std::vector<Waveform> parts;  // composite: sum of parts

    double value(double t) const {
        switch (kind) {
            case WaveformKind::Constant:
                return level;
            case WaveformKind::Sine:
                return level +
                       amplitude * std::sin(2.0 * 3.14159265358979323846 * (t + phase) / period);
            case WaveformKind::Square: {
                const double u = std::fmod(t + phase, period);
                const double frac = (u < 0.0 ? u + period : u) / period;
                return frac < 0.5 ? low : high;
            }
            case WaveformKind::Composite: {
                double acc = level;
                for (const Waveform& p : parts) acc += p.value(t);
                return acc;
            }
        }
        return level;
    }

    static Waveform constant(double level) {
        Waveform w;
        w.kind = WaveformKind::Constant;
        w.level = level;
        return w;
    }
    static Waveform sine(double level, double amplitude, double period, double phase = 0.0) {
        Waveform w;
        w.kind = WaveformKind::Sine;
        w.level = level;
        w.amplitude = amplitude;
        w.period = period;
        w.phase = phase;
        return w;
    }
    static Waveform square(double low, double high, double period, double phase = 0.0) {
        Waveform w;
        w.kind = WaveformKind::Square;
        w.low = low;
        w.high = high;
        w.period = period;
        w.phase = phase;
        return w;
    }
};

struct MetricGen {
    MetricKind metric = MetricKind::CpuUsage;
    Waveform base;
    double noise_sigma = 0.0;  // raw units
};

struct ClusterSpec {
    int machines = 4;
    double duration_s = 600.0;
    double grid_interval_s = 1.0;
    std::vector<MetricGen> waveforms;
    std::uint64_t seed = 1;

    void validate() const {
        if (machines < 2) throw ConfigError("cluster needs >= 2 machines");
        if (duration_s < 16.0 * grid_interval_s)
            throw ConfigError("duration must cover at least 16 grid intervals");
        for (const MetricGen& g : waveforms) {
            if (g.noise_sigma < 0.0) throw ConfigError("noise sigma must be >= 0");
        }
    }
};

// ---------------------------------------------------------------------------
// faults

enum class FaultType : std::uint8_t {
    EccError,
    PcieDowngrading,
    NicDropout,
    GpuCardDrop,
    NvlinkError,
    AocError,
    CudaExecError,
    GpuExecError,
    HdfsError,
    MachineUnreachable,
};

inline constexpr std::size_t kFaultTypeCount = 10;

inline constexpr std::array<std::string_view, kFaultTypeCount> kFaultTypeNames = {
    "EccError",      "PcieDowngrading", "NicDropout", "GpuCardDrop",  "NvlinkError",
    "AocError",      "CudaExecError",   "GpuExecError", "HdfsError", "MachineUnreachable",
};

inline std::string_view fault_type_name(FaultType t) {
    return kFaultTypeNames[static_cast<std::size_t>(t)];
}

inline std::optional<FaultType> parse_fault_type(std::string_view name) {
    for (std::size_t i = 0; i < kFaultTypeCount; ++i) {
        if (kFaultTypeNames[i] == name) return static_cast<FaultType>(i);
    }
    return std::nullopt;
}

enum class EffectKind { DropTo, SurgeTo, Ramp, Flatline };

struct FaultEffect {
    MetricKind metric = MetricKind::CpuUsage;
    EffectKind kind = EffectKind::DropTo;
    double value = 0.0;  // target level for DropTo/SurgeTo, slope/s for Ramp
};

struct FaultProfile {
    FaultType fault_type = FaultType::EccError;
    int target_machine = 0;
    double onset_s = 0.0;
    double duration_s = 0.0;
    std::vector<FaultEffect> perturbations;
};

struct GroundTruthFault {
    std::string machine_id;
    FaultType fault_type = FaultType::EccError;
    double onset_s = 0.0;
    double duration_s = 0.0;
};

struct GroundTruth {
    std::string task_id;
    std::vector<GroundTruthFault> faults;
};

// ---------------------------------------------------------------------------
// generation

inline std::string machine_name(int index) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "m%03d", index);
    return buf;
}

/// Materialize one healthy task: per (machine, metric), the shared waveform
/// plus per-sample Gaussian noise from a stream seeded by (machine, metric).
inline RawTraceSet gen_cluster(const ClusterSpec& spec, const std::string& task_id) {
    spec.validate();
    RawTraceSet out;
    out.task_id = task_id;
    const auto steps = static_cast<std::size_t>(std::floor(spec.duration_s / spec.grid_interval_s));
    for (int m = 0; m < spec.machines; ++m) {
        const std::string machine = machine_name(m);
        for (std::size_t j = 0; j < spec.waveforms.size(); ++j) {
            const MetricGen& gen = spec.waveforms[j];
            Rng rng(derive_seed(spec.seed, static_cast<std::uint64_t>(m),
                                static_cast<std::uint64_t>(gen.metric)));
            auto& stream = out.samples[{machine, gen.metric}];
            stream.reserve(steps);
            for (std::size_t k = 0; k < steps; ++k) {
                const double t = static_cast<double>(k) * spec.grid_interval_s;
                double v = gen.base.value(t);
                if (gen.noise_sigma > 0.0) v += rng.normal() * gen.noise_sigma;
                stream.push_back({t, v});
            }
        }
    }
    return out;
}

/// Overwrite the target machine's listed metrics over [onset, onset +
/// duration) and record the ground truth. Every sample outside the target
/// machine, listed metrics, or time span is left bit-identical.
inline GroundTruth inject_fault(RawTraceSet& traces, const FaultProfile& profile,
                                double duration_limit_s) {
    if (profile.onset_s < 0.0 || profile.onset_s + profile.duration_s > duration_limit_s + 1e-9)
        throw ProfileOutOfBounds("fault span exceeds trace duration");
    if (profile.perturbations.empty())
        throw ProfileOutOfBounds("fault profile has no perturbations");

    const std::string machine = machine_name(profile.target_machine);
    const double end_s = profile.onset_s + profile.duration_s;

    for (const FaultEffect& effect : profile.perturbations) {
        const auto it = traces.samples.find({machine, effect.metric});
        if (it == traces.samples.end())
            throw ProfileOutOfBounds("target machine lacks metric " +
                                     std::string(metric_name(effect.metric)));
        std::vector<Sample>& stream = it->second;
        std::optional<double> hold;  // flatline value
        for (Sample& s : stream) {
            if (s.timestamp < profile.onset_s || s.timestamp >= end_s) continue;
            switch (effect.kind) {
                case EffectKind::DropTo:
                case EffectKind::SurgeTo:
                    s.value = effect.value;
                    break;
                case EffectKind::Ramp:
                    s.value += effect.value * (s.timestamp - profile.onset_s);
                    break;
                case EffectKind::Flatline:
                    if (!hold) hold = s.value;
                    s.value = *hold;
                    break;
            }
        }
    }

    GroundTruth truth;
    truth.task_id = traces.task_id;
    truth.faults.push_back(
        {machine, profile.fault_type, profile.onset_s, profile.duration_s});
    return truth;
}

/// Fault-signature templates. Perturbation sets follow each fault type's
/// strongest metric indications: ECC-class faults kill the CPU process and
/// GPU activity on the afflicted machine; PCIe downgrading fills the NIC
/// buffer and makes PFC transmit counts surge; an unreachable machine's
/// throughput freezes. Levels are raw units for the default catalog bounds.
inline std::map<FaultType, FaultProfile> default_profiles() {
    using K = MetricKind;
    using E = EffectKind;
    std::map<FaultType, FaultProfile> profiles;
    auto add = [&](FaultType type, double duration, std::vector<FaultEffect> effects) {
        FaultProfile p;
        p.fault_type = type;
        p.duration_s = duration;
        p.perturbations = std::move(effects);
        profiles[type] = std::move(p);
    };

    add(FaultType::EccError, 360.0,
        {{K::CpuUsage, E::DropTo, 2.0},
         {K::GpuDutyCycle, E::DropTo, 2.0},
         {K::MemoryUsage, E::DropTo, 35.0}});
    add(FaultType::PcieDowngrading, 420.0,
        {{K::PfcTxPacketRate, E::SurgeTo, 15000.0},
         {K::TcpThroughput, E::DropTo, 4.0}});
    add(FaultType::NicDropout, 360.0,
        {{K::CpuUsage, E::DropTo, 4.0},
         {K::GpuDutyCycle, E::DropTo, 4.0},
         {K::TcpThroughput, E::DropTo, 0.3},
         {K::MemoryUsage, E::DropTo, 30.0}});
    add(FaultType::GpuCardDrop, 360.0,
        {{K::GpuDutyCycle, E::DropTo, 2.0},
         {K::CpuUsage, E::DropTo, 18.0},
         {K::MemoryUsage, E::DropTo, 40.0}});
    add(FaultType::NvlinkError, 330.0,
        {{K::NvlinkBandwidth, E::DropTo, 25.0},
         {K::CpuUsage, E::DropTo, 15.0},
         {K::MemoryUsage, E::DropTo, 42.0}});
    add(FaultType::AocError, 300.0,
        {{K::TcpThroughput, E::DropTo, 6.5},
         {K::CpuUsage, E::DropTo, 38.0}});
    add(FaultType::CudaExecError, 330.0,
        {{K::CpuUsage, E::DropTo, 6.0},
         {K::MemoryUsage, E::DropTo, 38.0}});
    add(FaultType::GpuExecError, 360.0,
        {{K::GpuDutyCycle, E::DropTo, 55.0}});
    add(FaultType::HdfsError, 330.0,
        {{K::CpuUsage, E::DropTo, 30.0},
         {K::GpuDutyCycle, E::DropTo, 35.0}});
    add(FaultType::MachineUnreachable, 390.0,
        {{K::TcpThroughput, E::Flatline, 0.0},
         {K::CpuUsage, E::DropTo, 8.0},
         {K::GpuDutyCycle, E::DropTo, 12.0}});
    return profiles;
}

/// Fault-type frequencies used as the default sampling mix; the remainder
/// (about a tenth) stays fault-free.
inline std::map<FaultType, double> default_fault_mix() {
    return {
        {FaultType::EccError, 0.389},
        {FaultType::PcieDowngrading, 0.066},
        {FaultType::NicDropout, 0.057},
        {FaultType::GpuCardDrop, 0.020},
        {FaultType::NvlinkError, 0.017},
        {FaultType::AocError, 0.009},
        {FaultType::CudaExecError, 0.146},
        {FaultType::GpuExecError, 0.077},
        {FaultType::HdfsError, 0.057},
        {FaultType::MachineUnreachable, 0.060},
    };
}

/// Default per-metric base waveforms at a given noise level (normalized
/// units, scaled by each metric's bounds).
inline std::vector<MetricGen> default_waveforms(const MetricCatalog& catalog,
                                                double noise_sigma_norm) {
    using K = MetricKind;
    std::vector<MetricGen> gens;
    auto add = [&](MetricKind metric, Waveform base) {
        const MetricBounds b = catalog.bounds(metric);
        gens.push_back({metric, base, noise_sigma_norm * (b.max - b.min)});
    };
    add(K::CpuUsage, Waveform::sine(55.0, 8.0, 64.0));
    add(K::PfcTxPacketRate, Waveform::sine(2500.0, 900.0, 48.0));
    add(K::MemoryUsage, Waveform::sine(62.0, 5.0, 120.0));
    add(K::DiskUsage, Waveform::sine(40.0, 2.0, 200.0));
    add(K::TcpThroughput, Waveform::sine(11.0, 2.5, 32.0));
    add(K::GpuDutyCycle, Waveform::sine(88.0, 5.0, 48.0));
    add(K::GpuMemoryUsed, Waveform::sine(66.0, 5.0, 90.0));
    add(K::NvlinkBandwidth, Waveform::sine(240.0, 60.0, 24.0));
    return gens;
}

/// Metrics covered by the default simulator template.
inline std::vector<MetricKind> default_active_metrics() {
    return {MetricKind::CpuUsage,      MetricKind::PfcTxPacketRate, MetricKind::MemoryUsage,
            MetricKind::DiskUsage,     MetricKind::TcpThroughput,   MetricKind::GpuDutyCycle,
            MetricKind::GpuMemoryUsed, MetricKind::NvlinkBandwidth};
}

/// Restrict a waveform template to the configured metric set.
inline std::vector<MetricGen> filter_waveforms(const std::vector<MetricGen>& gens,
                                               const std::vector<MetricKind>& metrics) {
    std::vector<MetricGen> out;
    for (const MetricGen& g : gens) {
        if (std::find(metrics.begin(), metrics.end(), g.metric) != metrics.end())
            out.push_back(g);
    }
    return out;
}

/// Restrict fault profiles to perturbations on configured metrics. Fault
/// types whose signature vanishes entirely are dropped (their mix share
/// falls back to fault-free tasks).
inline std::map<FaultType, FaultProfile> filter_profiles(
    const std::map<FaultType, FaultProfile>& profiles, const std::vector<MetricKind>& metrics) {
    std::map<FaultType, FaultProfile> out;
    for (const auto& [type, profile] : profiles) {
        FaultProfile filtered = profile;
        filtered.perturbations.clear();
        for (const FaultEffect& e : profile.perturbations) {
            if (std::find(metrics.begin(), metrics.end(), e.metric) != metrics.end())
                filtered.perturbations.push_back(e);
        }
        if (!filtered.perturbations.empty()) out[type] = std::move(filtered);
    }
    return out;
}

// ---------------------------------------------------------------------------
// corpus planning

struct PlannedFault {
    FaultType type = FaultType::EccError;
    int target_machine = 0;
    double onset_s = 0.0;
    double duration_s = 0.0;
};

struct TaskPlan {
    std::string task_id;
    std::uint64_t seed = 0;
    int machines = 0;
    std::optional<PlannedFault> fault;
};

struct CorpusPlan {
    std::vector<TaskPlan> tasks;
};

struct CorpusSpec {
    std::size_t n_tasks = 20;
    std::vector<int> machine_choices = {4, 8, 16};  // cycled per task
    double duration_s = 600.0;
    double grid_interval_s = 1.0;
    double noise_sigma_norm = 0.005;
    std::map<FaultType, double> fault_mix = default_fault_mix();
    std::uint64_t seed = 1;

    void validate() const {
        if (n_tasks == 0) throw ConfigError("corpus needs at least one task");
        if (machine_choices.empty()) throw ConfigError("corpus needs machine counts");
        double total = 0.0;
        for (const auto& [_, p] : fault_mix) {
            if (p < 0.0) throw ConfigError("fault mix proportions must be >= 0");
            total += p;
        }
        if (total > 1.0 + 1e-9) throw ConfigError("fault mix proportions must sum to <= 1");
    }
};

/// Decide per-task machine counts and fault assignments. Fault-type counts
/// follow the mix by largest-remainder apportionment, so the empirical
/// proportions track the requested ones tightly even for small corpora;
/// assignment order, targets and onsets are then drawn from the seed.
inline CorpusPlan plan_corpus(const CorpusSpec& spec,
                              const std::map<FaultType, FaultProfile>& profiles) {
    spec.validate();
    CorpusPlan plan;
    Rng rng(derive_seed(spec.seed, 0xC0));

    // Apportion fault counts.
    std::vector<std::pair<FaultType, double>> mix(spec.fault_mix.begin(), spec.fault_mix.end());
    std::vector<std::size_t> counts(mix.size(), 0);
    std::vector<std::pair<double, std::size_t>> remainders;
    std::size_t assigned = 0;
    double total_p = 0.0;
    for (const auto& [_, p] : mix) total_p += p;
    for (std::size_t i = 0; i < mix.size(); ++i) {
        const double exact = mix[i].second * static_cast<double>(spec.n_tasks);
        counts[i] = static_cast<std::size_t>(std::floor(exact + 1e-9));
        assigned += counts[i];
        remainders.emplace_back(exact - std::floor(exact + 1e-9), i);
    }
    const auto target_faulty =
        static_cast<std::size_t>(std::floor(total_p * static_cast<double>(spec.n_tasks) + 1e-9));
    std::sort(remainders.begin(), remainders.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    for (std::size_t i = 0; assigned < target_faulty && i < remainders.size(); ++i) {
        ++counts[remainders[i].second];
        ++assigned;
    }

    // Expand to a per-task fault-type list (nullopt means fault-free), then
    // shuffle so fault types are spread over machine sizes.
    std::vector<std::optional<FaultType>> draw(spec.n_tasks, std::nullopt);
    std::size_t cursor = 0;
    for (std::size_t i = 0; i < mix.size(); ++i) {
        for (std::size_t k = 0; k < counts[i]; ++k) draw[cursor++] = mix[i].first;
    }
    rng.shuffle(draw);

    for (std::size_t i = 0; i < spec.n_tasks; ++i) {
        TaskPlan task;
        char buf[32];
        std::snprintf(buf, sizeof(buf), "task_%04zu", i);
        task.task_id = buf;
        task.seed = derive_seed(spec.seed, 0x7A5C, i);
        task.machines = spec.machine_choices[i % spec.machine_choices.size()];
        if (draw[i]) {
            const auto it = profiles.find(*draw[i]);
            if (it == profiles.end())
                throw ConfigError("no profile for fault type " +
                                  std::string(fault_type_name(*draw[i])));
            PlannedFault fault;
            fault.type = *draw[i];
            fault.duration_s = it->second.duration_s;
            fault.target_machine = static_cast<int>(
                rng.uniform_index(static_cast<std::uint64_t>(task.machines)));
            const double latest = spec.duration_s - fault.duration_s;
            if (latest < 0.0)
                throw ProfileOutOfBounds("fault duration exceeds task duration");
            fault.onset_s =
                std::floor(rng.uniform(0.0, latest + 1.0) / spec.grid_interval_s) *
                spec.grid_interval_s;
            fault.onset_s = std::min(fault.onset_s, latest);
            task.fault = fault;
        }
        plan.tasks.push_back(std::move(task));
    }
    return plan;
}

/// Materialize one planned task: the template waveforms get task-specific
/// phases (so tasks are not carbon copies), then the planned fault, if any,
/// is injected.
inline std::pair<RawTraceSet, GroundTruth> materialize_task(
    const CorpusSpec& spec, const TaskPlan& task, const std::vector<MetricGen>& template_waveforms,
    const std::map<FaultType, FaultProfile>& profiles) {
    ClusterSpec cluster;
    cluster.machines = task.machines;
    cluster.duration_s = spec.duration_s;
    cluster.grid_interval_s = spec.grid_interval_s;
    cluster.seed = task.seed;
    cluster.waveforms = template_waveforms;
    Rng phase_rng(derive_seed(task.seed, 0xFA5E));
    for (MetricGen& gen : cluster.waveforms) {
        if (gen.base.kind == WaveformKind::Sine || gen.base.kind == WaveformKind::Square) {
            gen.base.phase += phase_rng.uniform(0.0, gen.base.period);
        }
    }

    RawTraceSet traces = gen_cluster(cluster, task.task_id);
    GroundTruth truth;
    truth.task_id = task.task_id;
    if (task.fault) {
        const auto it = profiles.find(task.fault->type);
        if (it == profiles.end())
            throw ConfigError("no profile for fault type " +
                              std::string(fault_type_name(task.fault->type)));
        FaultProfile profile = it->second;
        profile.target_machine = task.fault->target_machine;
        profile.onset_s = task.fault->onset_s;
        profile.duration_s = task.fault->duration_s;
        truth = inject_fault(traces, profile, spec.duration_s);
    }
    return {std::move(traces), std::move(truth)};
}

}  // namespace minder
