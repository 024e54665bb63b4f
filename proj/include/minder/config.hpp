// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "minder/detect.hpp"
#include "minder/error.hpp"
#include "minder/metric.hpp"
#include "minder/simulate.hpp"
#include "minder/vae.hpp"

// Toolkit configuration file: INI-style sections.
//
//   [metrics]            active metrics with normalization bounds
//   CpuUsage = 0,100
//
//   [vae]                training hyperparameters
//   window = 8
//   hidden_size = 4
//   latent_size = 8
//   lstm_layers = 1
//   learning_rate = 0.001
//   epochs = 50
//   batch_size = 64
//   kl_weight = 0.001
//   seed = 1
//
//   [detector]
//   similarity_threshold = 1.5
//   continuity_seconds = 240
//   stride = 1
//   lookback_seconds = 900
//   call_interval_seconds = 480
//   distance = euclidean | manhattan | chebyshev
//   embedding = denoised | latent_mu
//   scan_all_metrics = false
//
//   [simulator]
//   machines = 4,8,16
//   duration_s = 600
//   grid_interval_s = 1
//   noise_sigma = 0.005
//   fault_mix = table | none
//
// Precedence: command-line flag > config file > built-in default.

namespace minder {

struct Config {
    MetricCatalog catalog;
    std::vector<MetricKind> active_metrics;
    VaeHyperparams vae;
    DetectorConfig detector;
    CorpusSpec corpus;

    static Config defaults() {
        Config c;
        c.catalog = default_catalog();
        c.active_metrics = default_active_metrics();
        return c;
    }
};

namespace detail {

inline bool parse_bool_text(const std::string& text, bool& out) {
    if (text == "true" || text == "1" || text == "yes") {
        out = true;
        return true;
    }
    if (text == "false" || text == "0" || text == "no") {
        out = false;
        return true;
    }
    return false;
}

}  // namespace detail

inline DistanceKind parse_distance_kind(const std::string& text) {
    if (text == "euclidean") return DistanceKind::Euclidean;
    if (text == "manhattan") return DistanceKind::Manhattan;
    if (text == "chebyshev") return DistanceKind::Chebyshev;
    throw ConfigError("unknown distance kind: " + text);
}

inline EmbeddingSource parse_embedding_source(const std::string& text) {
    if (text == "denoised" || text == "denoised_vector") return EmbeddingSource::DenoisedVector;
    if (text == "latent_mu" || text == "mu") return EmbeddingSource::LatentMu;
    throw ConfigError("unknown embedding source: " + text);
}

/// Apply a config file on top of the given config (typically defaults).
inline void apply_config_file(Config& config, const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path.string());

    std::string section;
    std::string line;
    std::size_t line_no = 0;
    bool metrics_section_seen = false;

    auto fail = [&](const std::string& msg) {
        throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": " + msg);
    };

    while (std::getline(in, line)) {
        ++line_no;
        std::string text = detail::trim(line);
        if (text.empty() || text[0] == '#' || text[0] == ';') continue;
        if (text.front() == '[' && text.back() == ']') {
            section = text.substr(1, text.size() - 2);
            if (section == "metrics") {
                // a metrics section replaces the built-in active set
                metrics_section_seen = true;
                config.active_metrics.clear();
                config.catalog = MetricCatalog{};
            }
            continue;
        }
        const auto eq = text.find('=');
        if (eq == std::string::npos) fail("expected key = value");
        const std::string key = detail::trim(text.substr(0, eq));
        const std::string value = detail::trim(text.substr(eq + 1));

        auto as_double = [&](const std::string& v) {
            double out;
            if (!detail::parse_finite_double(v, out)) fail("bad number: " + v);
            return out;
        };
        auto as_size = [&](const std::string& v) {
            const double d = as_double(v);
            if (d < 0 || d != std::floor(d)) fail("expected a non-negative integer: " + v);
            return static_cast<std::size_t>(d);
        };

        if (section == "metrics") {
            auto metric = parse_metric(key);
            if (!metric) fail("unknown metric: " + key);
            std::istringstream bounds_text(value);
            std::string lo, hi;
            if (!std::getline(bounds_text, lo, ',') || !std::getline(bounds_text, hi))
                fail("bounds must be `min,max`");
            MetricBounds b{as_double(detail::trim(lo)), as_double(detail::trim(hi))};
            config.catalog.add(*metric, b);
            config.active_metrics.push_back(*metric);
        } else if (section == "vae") {
            if (key == "window") config.vae.w = as_size(value);
            else if (key == "hidden_size") config.vae.hidden_size = as_size(value);
            else if (key == "latent_size") config.vae.latent_size = as_size(value);
            else if (key == "lstm_layers") config.vae.lstm_layers = as_size(value);
            else if (key == "learning_rate") config.vae.learning_rate = as_double(value);
            else if (key == "epochs") config.vae.epochs = as_size(value);
            else if (key == "batch_size") config.vae.batch_size = as_size(value);
            else if (key == "kl_weight") config.vae.kl_weight = as_double(value);
            else if (key == "seed") config.vae.seed = static_cast<std::uint64_t>(as_size(value));
            else fail("unknown key in [vae]: " + key);
        } else if (section == "detector") {
            if (key == "similarity_threshold") config.detector.similarity_threshold = as_double(value);
            else if (key == "continuity_seconds") config.detector.continuity_seconds = as_double(value);
            else if (key == "window_w") config.detector.window_w = as_size(value);
            else if (key == "stride") config.detector.stride = as_size(value);
            else if (key == "lookback_seconds") config.detector.lookback_seconds = as_double(value);
            else if (key == "call_interval_seconds")
                config.detector.call_interval_seconds = as_double(value);
            else if (key == "distance") config.detector.distance_kind = parse_distance_kind(value);
            else if (key == "embedding")
                config.detector.embedding_source = parse_embedding_source(value);
            else if (key == "scan_all_metrics") {
                if (!detail::parse_bool_text(value, config.detector.scan_all_metrics))
                    fail("expected a boolean: " + value);
            } else fail("unknown key in [detector]: " + key);
        } else if (section == "simulator") {
            if (key == "machines") {
                config.corpus.machine_choices.clear();
                std::istringstream list(value);
                std::string item;
                while (std::getline(list, item, ',')) {
                    config.corpus.machine_choices.push_back(
                        static_cast<int>(as_size(detail::trim(item))));
                }
                if (config.corpus.machine_choices.empty()) fail("machines list is empty");
            } else if (key == "duration_s") config.corpus.duration_s = as_double(value);
            else if (key == "grid_interval_s") config.corpus.grid_interval_s = as_double(value);
            else if (key == "noise_sigma") config.corpus.noise_sigma_norm = as_double(value);
            else if (key == "n_tasks") config.corpus.n_tasks = as_size(value);
            else if (key == "seed") config.corpus.seed = static_cast<std::uint64_t>(as_size(value));
            else if (key == "fault_mix") {
                if (value == "table") config.corpus.fault_mix = default_fault_mix();
                else if (value == "none") config.corpus.fault_mix.clear();
                else fail("fault_mix must be `table` or `none`");
            } else fail("unknown key in [simulator]: " + key);
        } else {
            fail("unknown section [" + section + "]");
        }
    }
    if (metrics_section_seen && config.active_metrics.empty())
        throw ConfigError("config [metrics] section is empty");
}

}  // namespace minder
