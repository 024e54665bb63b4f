// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <vector>

#include "minder/error.hpp"
#include "minder/model_io.hpp"  // byte helpers
#include "minder/tensor.hpp"

// Preprocessed tensor cache (one file per task, little-endian):
//   magic "MNDRTNS\x01", u32 version, task id string,
//   f64 grid_start, f64 grid_interval,
//   u32 machine count, machine id strings,
//   u32 tensor count, per tensor: metric name string, u8 normalized,
//   u64 step count, f64 data (machines x steps)

namespace minder {

namespace detail {
inline constexpr char kTensorMagic[8] = {'M', 'N', 'D', 'R', 'T', 'N', 'S', '\x01'};
}

inline void save_tensors(const std::vector<AlignedTensor>& tensors,
                         const std::filesystem::path& path) {
    if (tensors.empty()) throw ConfigError("no tensors to save");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write tensor cache: " + path.string());
    const AlignedTensor& ref = tensors.front();

    out.write(detail::kTensorMagic, sizeof detail::kTensorMagic);
    detail::put_u32(out, 1);
    detail::put_str(out, ref.task_id);
    detail::put_f64(out, ref.grid_start);
    detail::put_f64(out, ref.grid_interval);
    detail::put_u32(out, static_cast<std::uint32_t>(ref.machine_ids.size()));
    for (const auto& id : ref.machine_ids) detail::put_str(out, id);
    detail::put_u32(out, static_cast<std::uint32_t>(tensors.size()));
    for (const AlignedTensor& t : tensors) {
        if (t.machine_ids != ref.machine_ids || t.grid_start != ref.grid_start ||
            t.grid_interval != ref.grid_interval)
            throw GridMismatch("tensor cache requires a shared grid");
        detail::put_str(out, std::string(metric_name(t.metric)));
        const char normalized = t.normalized ? 1 : 0;
        out.write(&normalized, 1);
        detail::put_u64(out, t.steps());
        out.write(reinterpret_cast<const char*>(t.values.data()),
                  static_cast<std::streamsize>(t.values.size() * sizeof(double)));
    }
    if (!out) throw IoError("short write to tensor cache: " + path.string());
}

inline std::vector<AlignedTensor> load_tensors(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open tensor cache: " + path.string());
    char magic[8];
    in.read(magic, sizeof magic);
    if (!in || std::memcmp(magic, detail::kTensorMagic, sizeof magic) != 0)
        throw IoError("bad magic in tensor cache: " + path.string());
    if (detail::get_u32(in) != 1) throw IoError("unsupported tensor cache version");

    const std::string task_id = detail::get_str(in);
    const double grid_start = detail::get_f64(in);
    const double grid_interval = detail::get_f64(in);
    const std::uint32_t machines = detail::get_u32(in);
    std::vector<std::string> machine_ids;
    for (std::uint32_t i = 0; i < machines; ++i) machine_ids.push_back(detail::get_str(in));

    const std::uint32_t count = detail::get_u32(in);
    std::vector<AlignedTensor> tensors;
    for (std::uint32_t i = 0; i < count; ++i) {
        AlignedTensor t;
        t.task_id = task_id;
        t.grid_start = grid_start;
        t.grid_interval = grid_interval;
        t.machine_ids = machine_ids;
        const std::string name = detail::get_str(in);
        auto metric = parse_metric(name);
        if (!metric) throw IoError("unknown metric in tensor cache: " + name);
        t.metric = *metric;
        char normalized = 0;
        in.read(&normalized, 1);
        t.normalized = normalized != 0;
        const std::uint64_t steps = detail::get_u64(in);
        t.values.resize(machines * steps);
        in.read(reinterpret_cast<char*>(t.values.data()),
                static_cast<std::streamsize>(t.values.size() * sizeof(double)));
        if (!in) throw IoError("truncated tensor cache: " + path.string());
        tensors.push_back(std::move(t));
    }
    return tensors;
}

}  // namespace minder
