// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "minder/error.hpp"
#include "minder/vae.hpp"

// Model container format (version 1, little-endian throughout):
//
//   offset  size  field
//   0       8     magic "MNDRVAE\x01"
//   8       4     u32 format version (1)
//   12      4     u32 metric name length, then that many bytes
//   ...     4     u32 input metric count, then per metric: u32 len + bytes
//   ...     hyperparams, fixed order:
//             u32 w, u32 hidden_size, u32 latent_size, u32 lstm_layers,
//             f64 learning_rate, u32 epochs, u32 batch_size, f64 kl_weight,
//             u64 seed
//   ...     4     u32 tensor count, then per tensor:
//             u32 name length + bytes, u32 rows, u32 cols (0 for vectors),
//             f64 data (rows * max(cols,1) values)
//
// Tensor order is the parameter registry order, so a file written from a
// model and read back reproduces bit-identical reconstructions.

namespace minder {

namespace detail {

static_assert(std::endian::native == std::endian::little,
              "model container assumes a little-endian host");

inline void put_u32(std::ostream& out, std::uint32_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}
inline void put_u64(std::ostream& out, std::uint64_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}
inline void put_f64(std::ostream& out, double v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}
inline void put_str(std::ostream& out, const std::string& s) {
    put_u32(out, static_cast<std::uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::uint32_t get_u32(std::istream& in) {
    std::uint32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!in) throw ModelFormatError("truncated model file (u32)");
    return v;
}
inline std::uint64_t get_u64(std::istream& in) {
    std::uint64_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!in) throw ModelFormatError("truncated model file (u64)");
    return v;
}
inline double get_f64(std::istream& in) {
    double v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!in) throw ModelFormatError("truncated model file (f64)");
    return v;
}
inline std::string get_str(std::istream& in) {
    const std::uint32_t n = get_u32(in);
    if (n > (1u << 20)) throw ModelFormatError("implausible string length in model file");
    std::string s(n, '\0');
    in.read(s.data(), n);
    if (!in) throw ModelFormatError("truncated model file (string)");
    return s;
}

inline constexpr char kModelMagic[8] = {'M', 'N', 'D', 'R', 'V', 'A', 'E', '\x01'};

}  // namespace detail

inline void save_model(const VaeModel& model, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write model file: " + path.string());

    out.write(detail::kModelMagic, sizeof detail::kModelMagic);
    detail::put_u32(out, VaeModel::kFormatVersion);
    detail::put_str(out, std::string(metric_name(model.metric)));
    detail::put_u32(out, static_cast<std::uint32_t>(model.input_metrics.size()));
    for (MetricKind m : model.input_metrics) detail::put_str(out, std::string(metric_name(m)));

    const VaeHyperparams& hp = model.hp;
    detail::put_u32(out, static_cast<std::uint32_t>(hp.w));
    detail::put_u32(out, static_cast<std::uint32_t>(hp.hidden_size));
    detail::put_u32(out, static_cast<std::uint32_t>(hp.latent_size));
    detail::put_u32(out, static_cast<std::uint32_t>(hp.lstm_layers));
    detail::put_f64(out, hp.learning_rate);
    detail::put_u32(out, static_cast<std::uint32_t>(hp.epochs));
    detail::put_u32(out, static_cast<std::uint32_t>(hp.batch_size));
    detail::put_f64(out, hp.kl_weight);
    detail::put_u64(out, hp.seed);

    auto views = param_views(const_cast<VaeModel&>(model));
    detail::put_u32(out, static_cast<std::uint32_t>(views.tensors.size()));
    for (std::size_t i = 0; i < views.tensors.size(); ++i) {
        detail::put_str(out, views.names[i]);
        detail::put_u32(out, static_cast<std::uint32_t>(views.shapes[i].first));
        detail::put_u32(out, static_cast<std::uint32_t>(views.shapes[i].second));
        const Vec& t = *views.tensors[i];
        out.write(reinterpret_cast<const char*>(t.data()),
                  static_cast<std::streamsize>(t.size() * sizeof(double)));
    }
    if (!out) throw IoError("short write to model file: " + path.string());
}

inline VaeModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open model file: " + path.string());

    char magic[8];
    in.read(magic, sizeof magic);
    if (!in || std::memcmp(magic, detail::kModelMagic, sizeof magic) != 0)
        throw ModelFormatError("bad magic in model file: " + path.string());
    const std::uint32_t version = detail::get_u32(in);
    if (version != VaeModel::kFormatVersion)
        throw ModelFormatError("unsupported model format version " + std::to_string(version));

    VaeModel model;
    model.version = version;
    const std::string metric_text = detail::get_str(in);
    auto metric = parse_metric(metric_text);
    if (!metric) throw ModelFormatError("unknown metric in model file: " + metric_text);
    model.metric = *metric;

    const std::uint32_t n_inputs = detail::get_u32(in);
    if (n_inputs == 0 || n_inputs > kMetricCount)
        throw ModelFormatError("implausible input metric count");
    model.input_metrics.clear();
    for (std::uint32_t i = 0; i < n_inputs; ++i) {
        const std::string name = detail::get_str(in);
        auto m = parse_metric(name);
        if (!m) throw ModelFormatError("unknown input metric in model file: " + name);
        model.input_metrics.push_back(*m);
    }

    VaeHyperparams hp;
    hp.w = detail::get_u32(in);
    hp.hidden_size = detail::get_u32(in);
    hp.latent_size = detail::get_u32(in);
    hp.lstm_layers = detail::get_u32(in);
    hp.learning_rate = detail::get_f64(in);
    hp.epochs = detail::get_u32(in);
    hp.batch_size = detail::get_u32(in);
    hp.kl_weight = detail::get_f64(in);
    hp.seed = detail::get_u64(in);
    hp.validate();
    model.resize_for(hp, model.input_metrics.size());

    auto views = param_views(model);
    const std::uint32_t n_tensors = detail::get_u32(in);
    if (n_tensors != views.tensors.size())
        throw ModelFormatError("tensor count mismatch: file has " + std::to_string(n_tensors) +
                               ", architecture needs " + std::to_string(views.tensors.size()));
    for (std::size_t i = 0; i < views.tensors.size(); ++i) {
        const std::string name = detail::get_str(in);
        if (name != views.names[i])
            throw ModelFormatError("tensor order mismatch: expected " + views.names[i] +
                                   ", found " + name);
        const std::uint32_t rows = detail::get_u32(in);
        const std::uint32_t cols = detail::get_u32(in);
        if (rows != views.shapes[i].first || cols != views.shapes[i].second)
            throw ModelFormatError("tensor shape mismatch for " + name);
        Vec& t = *views.tensors[i];
        in.read(reinterpret_cast<char*>(t.data()),
                static_cast<std::streamsize>(t.size() * sizeof(double)));
        if (!in) throw ModelFormatError("truncated tensor data for " + name);
        for (double v : t) {
            if (!std::isfinite(v)) throw ModelFormatError("non-finite weight in " + name);
        }
    }
    return model;
}

}  // namespace minder
