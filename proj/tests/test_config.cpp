// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "minder/config.hpp"

using namespace minder;

namespace {

class ConfigFile {
public:
    explicit ConfigFile(const std::string& contents) {
        static int counter = 0;
        path_ = std::filesystem::temp_directory_path() /
                ("minder_cfg_" + std::to_string(::getpid()) + "_" + std::to_string(counter++) +
                 ".ini");
        std::ofstream out(path_);
        out << contents;
    }
    ~ConfigFile() { std::filesystem::remove(path_); }
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

}  // namespace

TEST(Config, DefaultsAreSane) {
    Config c = Config::defaults();
    EXPECT_EQ(c.active_metrics.size(), 8u);
    EXPECT_EQ(c.vae.w, 8u);
    EXPECT_EQ(c.vae.hidden_size, 4u);
    EXPECT_EQ(c.vae.latent_size, 8u);
    EXPECT_EQ(c.vae.lstm_layers, 1u);
    EXPECT_DOUBLE_EQ(c.detector.continuity_seconds, 240.0);
    EXPECT_DOUBLE_EQ(c.detector.lookback_seconds, 900.0);
    EXPECT_DOUBLE_EQ(c.detector.call_interval_seconds, 480.0);
    EXPECT_EQ(c.detector.stride, 1u);
    EXPECT_EQ(c.catalog.size(), kMetricCount);
}

TEST(Config, FileOverridesDefaults) {
    ConfigFile f(
        "[detector]\n"
        "similarity_threshold = 2.25\n"
        "continuity_seconds = 120\n"
        "distance = manhattan\n"
        "embedding = latent_mu\n"
        "scan_all_metrics = true\n"
        "\n"
        "[vae]\n"
        "epochs = 12\n"
        "kl_weight = 0.5\n"
        "\n"
        "[simulator]\n"
        "machines = 4,6\n"
        "noise_sigma = 0.02\n");
    Config c = Config::defaults();
    apply_config_file(c, f.path());
    EXPECT_DOUBLE_EQ(c.detector.similarity_threshold, 2.25);
    EXPECT_DOUBLE_EQ(c.detector.continuity_seconds, 120.0);
    EXPECT_EQ(c.detector.distance_kind, DistanceKind::Manhattan);
    EXPECT_EQ(c.detector.embedding_source, EmbeddingSource::LatentMu);
    EXPECT_TRUE(c.detector.scan_all_metrics);
    EXPECT_EQ(c.vae.epochs, 12u);
    EXPECT_DOUBLE_EQ(c.vae.kl_weight, 0.5);
    ASSERT_EQ(c.corpus.machine_choices.size(), 2u);
    EXPECT_EQ(c.corpus.machine_choices[1], 6);
    EXPECT_DOUBLE_EQ(c.corpus.noise_sigma_norm, 0.02);
    // untouched keys keep their defaults
    EXPECT_EQ(c.vae.hidden_size, 4u);
    EXPECT_DOUBLE_EQ(c.detector.lookback_seconds, 900.0);
}

TEST(Config, MetricsSectionReplacesActiveSet) {
    ConfigFile f(
        "[metrics]\n"
        "CpuUsage = 0,100\n"
        "GpuDutyCycle = 0,100\n");
    Config c = Config::defaults();
    apply_config_file(c, f.path());
    ASSERT_EQ(c.active_metrics.size(), 2u);
    EXPECT_EQ(c.active_metrics[0], MetricKind::CpuUsage);
    EXPECT_EQ(c.active_metrics[1], MetricKind::GpuDutyCycle);
    EXPECT_DOUBLE_EQ(c.catalog.bounds(MetricKind::CpuUsage).max, 100.0);
    EXPECT_THROW(c.catalog.bounds(MetricKind::MemoryUsage), UnknownMetric);
}

TEST(Config, BadKeysReportLocation) {
    ConfigFile f("[detector]\nnope = 1\n");
    Config c = Config::defaults();
    try {
        apply_config_file(c, f.path());
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find(":2:"), std::string::npos) << e.what();
    }
}

TEST(Config, BadBoundsRejected) {
    ConfigFile f("[metrics]\nCpuUsage = 100,0\n");
    Config c = Config::defaults();
    EXPECT_THROW(apply_config_file(c, f.path()), ConfigError);
}

TEST(Config, UnknownSectionRejected) {
    ConfigFile f("[warp_drive]\nspeed = 9\n");
    Config c = Config::defaults();
    EXPECT_THROW(apply_config_file(c, f.path()), ConfigError);
}

TEST(Config, CommentsAndBlanksIgnored) {
    ConfigFile f(
        "# top comment\n"
        "\n"
        "[vae]\n"
        "; another comment style\n"
        "epochs = 3\n");
    Config c = Config::defaults();
    apply_config_file(c, f.path());
    EXPECT_EQ(c.vae.epochs, 3u);
}

TEST(Config, FaultMixKeywords) {
    ConfigFile f("[simulator]\nfault_mix = none\n");
    Config c = Config::defaults();
    apply_config_file(c, f.path());
    EXPECT_TRUE(c.corpus.fault_mix.empty());

    ConfigFile g("[simulator]\nfault_mix = table\n");
    Config d = Config::defaults();
    apply_config_file(d, g.path());
    EXPECT_EQ(d.corpus.fault_mix.size(), kFaultTypeCount);
}
