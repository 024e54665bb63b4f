// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>

#include "minder/rng.hpp"
#include "minder/vae.hpp"

using namespace minder;

namespace {

VaeModel zero_model(std::size_t w = 8, std::size_t hidden = 4, std::size_t latent = 8) {
    VaeModel m;
    VaeHyperparams hp;
    hp.w = w;
    hp.hidden_size = hidden;
    hp.latent_size = latent;
    m.metric = MetricKind::CpuUsage;
    m.input_metrics = {MetricKind::CpuUsage};
    m.resize_for(hp, 1);
    return m;
}

VaeModel random_model(Rng& rng, std::size_t w = 8, std::size_t hidden = 4, std::size_t latent = 8,
                      std::size_t layers = 1) {
    VaeModel m = zero_model(w, hidden, latent);
    VaeHyperparams hp = m.hp;
    hp.lstm_layers = layers;
    m.resize_for(hp, 1);
    init_weights(m, rng);
    return m;
}

}  // namespace

TEST(Encode, ZeroWeightsYieldHeadBiases) {
    VaeModel m = zero_model();
    for (std::size_t i = 0; i < m.hp.latent_size; ++i) {
        m.mu_head.b[i] = 0.25 * static_cast<double>(i);
        m.logvar_head.b[i] = -0.5;
    }
    Vec x(8, 0.7);
    VaeWorkspace ws;
    vae_encode(m, x.data(), ws);
    for (std::size_t i = 0; i < m.hp.latent_size; ++i) {
        EXPECT_DOUBLE_EQ(ws.mu[i], 0.25 * static_cast<double>(i));
        EXPECT_DOUBLE_EQ(ws.logvar[i], -0.5);
    }
}

TEST(Encode, DeterministicForIdenticalWindows) {
    Rng rng(1);
    VaeModel m = random_model(rng);
    Vec x = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8};
    VaeWorkspace ws1, ws2;
    vae_encode(m, x.data(), ws1);
    vae_encode(m, x.data(), ws2);
    EXPECT_EQ(ws1.mu, ws2.mu);
    EXPECT_EQ(ws1.logvar, ws2.logvar);
}

TEST(Reparameterize, InferenceModeReturnsMuExactly) {
    Vec mu = {1.0, -2.0, 0.5};
    Vec logvar = {0.0, 1.0, -1.0};
    Vec eps(3, 0.0);
    EXPECT_EQ(reparameterize(mu, logvar, eps), mu);
}

TEST(Reparameterize, VanishingVarianceCollapsesToMu) {
    Vec mu = {1.0, -2.0};
    Vec logvar = {-50.0, -50.0};
    Vec eps = {3.0, -4.0};
    Vec z = reparameterize(mu, logvar, eps);
    EXPECT_NEAR(z[0], mu[0], 1e-10);
    EXPECT_NEAR(z[1], mu[1], 1e-10);
}

TEST(Reparameterize, FixedSeedIsReproducible) {
    Vec mu(4, 0.0), logvar(4, 0.0);
    Rng rng_a(123), rng_b(123);
    Vec eps_a(4), eps_b(4);
    for (auto& e : eps_a) e = rng_a.normal();
    for (auto& e : eps_b) e = rng_b.normal();
    EXPECT_EQ(eps_a, eps_b);
    EXPECT_EQ(reparameterize(mu, logvar, eps_a), reparameterize(mu, logvar, eps_b));
}

TEST(Reparameterize, ShapeMismatchRejected) {
    Vec mu(4, 0.0), logvar(3, 0.0), eps(4, 0.0);
    EXPECT_THROW(reparameterize(mu, logvar, eps), ShapeMismatch);
}

TEST(Decode, ZeroWeightsGiveOutputHeadBias) {
    VaeModel m = zero_model();
    m.output_head.b[0] = 0.42;
    Vec z(m.hp.latent_size, 1.5);
    VaeWorkspace ws;
    vae_decode(m, z, ws);
    for (std::size_t t = 0; t < m.hp.w; ++t) EXPECT_DOUBLE_EQ(ws.y[t][0], 0.42);
}

TEST(Decode, SameLatentTwiceIsIdentical) {
    Rng rng(2);
    VaeModel m = random_model(rng);
    Vec z(m.hp.latent_size);
    for (auto& v : z) v = rng.uniform(-1.0, 1.0);
    VaeWorkspace ws1, ws2;
    vae_decode(m, z, ws1);
    vae_decode(m, z, ws2);
    for (std::size_t t = 0; t < m.hp.w; ++t) EXPECT_EQ(ws1.y[t], ws2.y[t]);
}

TEST(VaeLoss, PerfectReconstructionZeroPriorGivesZero) {
    Vec x = {0.1, 0.9, 0.4};
    Vec mu(4, 0.0), logvar(4, 0.0);
    EXPECT_DOUBLE_EQ(vae_loss(x, x, mu, logvar, 1.0), 0.0);
}

TEST(VaeLoss, KlTermVanishesAtStandardNormal) {
    // mse 0.5 with mu = 0, logvar = 0: loss is exactly the mse
    Vec x = {0.0, 0.0};
    Vec y = {1.0, 0.0};  // mse = (1 + 0) / 2 = 0.5
    Vec mu(4, 0.0), logvar(4, 0.0);
    EXPECT_DOUBLE_EQ(vae_loss(x, y, mu, logvar, 1.0), 0.5);
}

TEST(VaeLoss, KlMatchesClosedForm) {
    Vec x = {0.0};
    Vec mu = {1.0, -1.0};
    Vec logvar = {0.5, -0.5};
    // KL = -0.5 * sum(1 + lv - mu^2 - e^lv) / L
    double kl = 0.0;
    for (std::size_t i = 0; i < 2; ++i)
        kl += 1.0 + logvar[i] - mu[i] * mu[i] - std::exp(logvar[i]);
    kl *= -0.5 / 2.0;
    EXPECT_NEAR(vae_loss(x, x, mu, logvar, 0.7), 0.7 * kl, 1e-15);
}

TEST(Denoise, InferenceIsDeterministic) {
    Rng rng(3);
    VaeModel m = random_model(rng);
    Vec data = {0.2, 0.4, 0.6, 0.8, 0.7, 0.5, 0.3, 0.1};
    Window window{0, MetricKind::CpuUsage, 0, std::span<const double>(data.data(), 8)};
    Reconstruction a = denoise(m, window);
    Reconstruction b = denoise(m, window);
    EXPECT_EQ(a.denoised, b.denoised);
    EXPECT_EQ(a.mu, b.mu);
    EXPECT_DOUBLE_EQ(a.mse, b.mse);
}

TEST(Denoise, MetricMismatchRejected) {
    Rng rng(4);
    VaeModel m = random_model(rng);
    Vec data(8, 0.5);
    Window window{0, MetricKind::GpuDutyCycle, 0, std::span<const double>(data.data(), 8)};
    EXPECT_THROW(denoise(m, window), MetricMismatch);
}

TEST(Denoise, WrongWindowLengthRejected) {
    Rng rng(5);
    VaeModel m = random_model(rng);
    Vec data(5, 0.5);
    Window window{0, MetricKind::CpuUsage, 0, std::span<const double>(data.data(), 5)};
    EXPECT_THROW(denoise(m, window), ShapeMismatch);
}

TEST(VaeForward, LossAssemblesMseAndKl) {
    Rng rng(6);
    VaeModel m = random_model(rng);
    m.hp.kl_weight = 0.3;
    Vec x = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8};
    Vec eps(m.hp.latent_size, 0.0);
    VaeWorkspace ws;
    vae_forward(m, x.data(), eps, ws);
    Vec y_flat;
    for (const auto& y : ws.y) y_flat.push_back(y[0]);
    EXPECT_NEAR(ws.loss, vae_loss(x, y_flat, ws.mu, ws.logvar, 0.3), 1e-14);
}
