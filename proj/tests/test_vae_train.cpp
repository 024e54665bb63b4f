// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>

#include "minder/model_io.hpp"
#include "minder/rng.hpp"
#include "minder/vae_train.hpp"

using namespace minder;

namespace {

/// Windows cut from a noisy shared sine, the shape the denoisers see in
/// production-like input.
std::vector<Vec> sine_windows(std::size_t count, std::size_t w, double sigma, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<Vec> windows;
    windows.reserve(count);
    for (std::size_t k = 0; k < count; ++k) {
        const double phase = rng.uniform(0.0, 64.0);
        Vec win(w);
        for (std::size_t t = 0; t < w; ++t) {
            const double signal =
                0.55 + 0.08 * std::sin(2.0 * 3.14159265358979323846 *
                                       (static_cast<double>(t) + phase) / 64.0);
            win[t] = signal + sigma * rng.normal();
        }
        windows.push_back(std::move(win));
    }
    return windows;
}

double mean_denoise_mse(const VaeModel& m, const std::vector<Vec>& windows) {
    VaeWorkspace ws;
    double total = 0.0;
    for (const Vec& win : windows) {
        total += vae_denoise_raw(m, win.data(), ws).mse;
    }
    return total / static_cast<double>(windows.size());
}

}  // namespace

TEST(TrainModel, NoWindowsRejected) {
    VaeHyperparams hp;
    EXPECT_THROW(train_model({}, hp, MetricKind::CpuUsage), NoTrainingData);
}

TEST(TrainModel, ZeroEpochsReturnsInitializedModelUnchanged) {
    VaeHyperparams hp;
    hp.epochs = 0;
    hp.seed = 9;
    std::vector<Vec> windows(4, Vec(hp.w, 0.5));
    TrainResult r = train_model(windows, hp, MetricKind::CpuUsage);
    EXPECT_EQ(r.best_epoch, 0u);
    EXPECT_TRUE(r.epoch_losses.empty());

    // must equal a freshly initialized model with the same seed
    VaeModel fresh;
    fresh.metric = MetricKind::CpuUsage;
    fresh.input_metrics = {MetricKind::CpuUsage};
    fresh.resize_for(hp, 1);
    Rng rng(derive_seed(hp.seed, 0xA11));
    init_weights(fresh, rng);
    auto a = param_views(r.model);
    auto b = param_views(fresh);
    for (std::size_t i = 0; i < a.tensors.size(); ++i) EXPECT_EQ(*a.tensors[i], *b.tensors[i]);
}

TEST(TrainModel, ConstantWindowsReachTinyMse) {
    VaeHyperparams hp;
    hp.epochs = 40;
    hp.batch_size = 16;
    hp.learning_rate = 5e-3;
    hp.kl_weight = 1e-3;
    hp.seed = 4;
    std::vector<Vec> windows(128, Vec(hp.w, 0.5));
    TrainResult r = train_model(windows, hp, MetricKind::CpuUsage);
    const double mse = mean_denoise_mse(r.model, windows);
    EXPECT_LT(mse, 1e-5) << "constant signal is the easiest fixed point";
}

TEST(TrainModel, DeterministicGivenSeed) {
    VaeHyperparams hp;
    hp.epochs = 3;
    hp.seed = 1234;
    auto windows = sine_windows(200, hp.w, 0.01, 55);
    TrainResult a = train_model(windows, hp, MetricKind::CpuUsage);
    TrainResult b = train_model(windows, hp, MetricKind::CpuUsage);
    auto va = param_views(a.model);
    auto vb = param_views(b.model);
    for (std::size_t i = 0; i < va.tensors.size(); ++i) {
        ASSERT_EQ(*va.tensors[i], *vb.tensors[i]) << va.names[i];
    }
    EXPECT_EQ(a.epoch_losses, b.epoch_losses);
}

TEST(TrainModel, DifferentSeedsDiffer) {
    VaeHyperparams hp;
    hp.epochs = 1;
    hp.seed = 1;
    auto windows = sine_windows(64, hp.w, 0.01, 3);
    VaeHyperparams hp2 = hp;
    hp2.seed = 2;
    TrainResult a = train_model(windows, hp, MetricKind::CpuUsage);
    TrainResult b = train_model(windows, hp2, MetricKind::CpuUsage);
    EXPECT_NE(*param_views(a.model).tensors[0], *param_views(b.model).tensors[0]);
}

TEST(TrainModel, SineCorpusHitsReconstructionTarget) {
    // the denoising-quality bar on held-out windows from the same regime
    VaeHyperparams hp;
    hp.seed = 7;
    auto train_windows = sine_windows(4096, hp.w, 0.005, 101);
    auto heldout = sine_windows(512, hp.w, 0.005, 202);
    TrainResult r = train_model(train_windows, hp, MetricKind::CpuUsage);
    const double mse = mean_denoise_mse(r.model, heldout);
    RecordProperty("heldout_mse", mse);
    std::printf("held-out denoise mse = %.3e (best epoch %zu, loss %.3e)\n", mse, r.best_epoch,
                r.best_loss);
    EXPECT_LT(mse, 1e-4);
}

TEST(TrainModel, BestEpochSnapshotIsKept) {
    VaeHyperparams hp;
    hp.epochs = 6;
    hp.seed = 31;
    auto windows = sine_windows(256, hp.w, 0.01, 77);
    TrainResult r = train_model(windows, hp, MetricKind::CpuUsage);
    ASSERT_EQ(r.epoch_losses.size(), 6u);
    double best = r.epoch_losses[0];
    for (double l : r.epoch_losses) best = std::min(best, l);
    EXPECT_DOUBLE_EQ(r.best_loss, best);
}
