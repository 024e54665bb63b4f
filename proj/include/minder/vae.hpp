// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "minder/error.hpp"
#include "minder/lstm.hpp"
#include "minder/metric.hpp"
#include "minder/rng.hpp"
#include "minder/tensor.hpp"

namespace minder {

struct VaeHyperparams {
    std::size_t w = 8;            // window length
    std::size_t hidden_size = 4;  // LSTM width
    std::size_t latent_size = 8;
    std::size_t lstm_layers = 1;
    double learning_rate = 1e-2;
    std::size_t epochs = 300;
    std::size_t batch_size = 32;
    double kl_weight = 1e-4;
    std::uint64_t seed = 1;

    void validate() const {
        if (w < 2 || hidden_size < 1 || latent_size < 1 || lstm_layers < 1)
            throw ConfigError("vae sizes must be >= 1 (w >= 2)");
        if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
        if (kl_weight < 0.0) throw ConfigError("kl_weight must be >= 0");
        if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    }
};

struct Affine {
    std::size_t rows = 0, cols = 0;
    Vec w;  // rows x cols
    Vec b;  // rows

    void resize(std::size_t r, std::size_t c) {
        rows = r;
        cols = c;
        w.assign(r * c, 0.0);
        b.assign(r, 0.0);
    }

    void apply(const double* x, double* y) const {
        for (std::size_t r = 0; r < rows; ++r) y[r] = b[r];
        matvec_acc(w, rows, cols, x, y);
    }
};

/// One trained denoiser. Primary models consume a single metric
/// (input_metrics has one entry); the integrated variant consumes all
/// configured metrics at once, one column per metric per step.
struct VaeModel {
    static constexpr std::uint32_t kFormatVersion = 1;

    MetricKind metric = MetricKind::CpuUsage;
    std::vector<MetricKind> input_metrics{MetricKind::CpuUsage};
    VaeHyperparams hp;
    LstmStack encoder;
    Affine mu_head;       // latent x hidden
    Affine logvar_head;   // latent x hidden
    Affine decoder_init;  // (2 * hidden * layers) x latent
    LstmStack decoder;
    Affine output_head;   // input_width x hidden
    std::uint32_t version = kFormatVersion;

    std::size_t input_width() const { return input_metrics.size(); }

    void resize_for(const VaeHyperparams& p, std::size_t input_width) {
        hp = p;
        encoder.resize(input_width, p.hidden_size, p.lstm_layers);
        decoder.resize(input_width, p.hidden_size, p.lstm_layers);
        mu_head.resize(p.latent_size, p.hidden_size);
        logvar_head.resize(p.latent_size, p.hidden_size);
        decoder_init.resize(2 * p.hidden_size * p.lstm_layers, p.latent_size);
        output_head.resize(input_width, p.hidden_size);
    }
};

/// Named view over every parameter tensor of a model, in a fixed order.
/// Weight init, the optimizer, serialization, and the gradient checker all
/// walk this list so they agree on layout.
struct ParamViews {
    std::vector<std::string> names;
    std::vector<Vec*> tensors;
    std::vector<std::pair<std::size_t, std::size_t>> shapes;  // rows, cols (cols 0 => vector)

    void add(std::string name, Vec& v, std::size_t rows, std::size_t cols) {
        names.push_back(std::move(name));
        tensors.push_back(&v);
        shapes.emplace_back(rows, cols);
    }

    std::size_t total_size() const {
        std::size_t n = 0;
        for (const Vec* v : tensors) n += v->size();
        return n;
    }
};

inline ParamViews param_views(VaeModel& m) {
    ParamViews views;
    auto add_stack = [&](const char* prefix, LstmStack& s) {
        for (std::size_t l = 0; l < s.layers.size(); ++l) {
            LstmLayerParams& p = s.layers[l];
            const std::string base = std::string(prefix) + ".l" + std::to_string(l) + ".";
            views.add(base + "wi", p.wi, p.hidden_size, p.input_size);
            views.add(base + "wf", p.wf, p.hidden_size, p.input_size);
            views.add(base + "wg", p.wg, p.hidden_size, p.input_size);
            views.add(base + "wo", p.wo, p.hidden_size, p.input_size);
            views.add(base + "ui", p.ui, p.hidden_size, p.hidden_size);
            views.add(base + "uf", p.uf, p.hidden_size, p.hidden_size);
            views.add(base + "ug", p.ug, p.hidden_size, p.hidden_size);
            views.add(base + "uo", p.uo, p.hidden_size, p.hidden_size);
            views.add(base + "bi", p.bi, p.hidden_size, 0);
            views.add(base + "bf", p.bf, p.hidden_size, 0);
            views.add(base + "bg", p.bg, p.hidden_size, 0);
            views.add(base + "bo", p.bo, p.hidden_size, 0);
        }
    };
    auto add_affine = [&](const char* name, Affine& a) {
        views.add(std::string(name) + ".w", a.w, a.rows, a.cols);
        views.add(std::string(name) + ".b", a.b, a.rows, 0);
    };
    add_stack("encoder", m.encoder);
    add_affine("mu", m.mu_head);
    add_affine("logvar", m.logvar_head);
    add_affine("dec_init", m.decoder_init);
    add_stack("decoder", m.decoder);
    add_affine("out", m.output_head);
    return views;
}

/// Initialize every parameter tensor uniform(-k, k), k = 1/sqrt(hidden).
inline void init_weights(VaeModel& m, Rng& rng) {
    const double k = 1.0 / std::sqrt(static_cast<double>(m.hp.hidden_size));
    auto views = param_views(m);
    for (Vec* t : views.tensors) {
        for (double& x : *t) x = rng.uniform(-k, k);
    }
}

/// Result of denoising one window.
struct Reconstruction {
    Vec denoised;  // length w * input_width
    Vec mu;        // length latent
    Vec logvar;    // length latent
    double mse = 0.0;
};

/// z = mu + exp(logvar / 2) * eps. Inference passes eps = 0 so z == mu.
inline Vec reparameterize(const Vec& mu, const Vec& logvar, const Vec& eps) {
    if (mu.size() != logvar.size() || mu.size() != eps.size())
        throw ShapeMismatch("reparameterize: mu/logvar/eps length mismatch");
    Vec z(mu.size());
    for (std::size_t i = 0; i < z.size(); ++i) {
        z[i] = mu[i] + std::exp(0.5 * logvar[i]) * eps[i];
    }
    return z;
}

/// ELBO surrogate: mean squared reconstruction error plus weighted Gaussian
/// KL, the KL averaged over latent dimensions.
inline double vae_loss(const Vec& input, const Vec& denoised, const Vec& mu, const Vec& logvar,
                       double kl_weight) {
    if (input.size() != denoised.size()) throw ShapeMismatch("vae_loss: input/denoised mismatch");
    if (mu.size() != logvar.size()) throw ShapeMismatch("vae_loss: mu/logvar mismatch");
    double mse = 0.0;
    for (std::size_t i = 0; i < input.size(); ++i) {
        const double d = denoised[i] - input[i];
        mse += d * d;
    }
    mse /= static_cast<double>(input.size());
    double kl = 0.0;
    for (std::size_t i = 0; i < mu.size(); ++i) {
        kl += 1.0 + logvar[i] - mu[i] * mu[i] - std::exp(logvar[i]);
    }
    kl *= -0.5 / static_cast<double>(mu.size());
    return mse + kl_weight * kl;
}

/// Scratch space for a forward/backward pass; reused across samples.
struct VaeWorkspace {
    LstmSequenceCache enc;
    LstmSequenceCache dec;
    Vec mu, logvar, eps, z;
    Vec dec_state;            // decoder_init output: [h0 per layer | c0 per layer]
    std::vector<Vec> dec_in;  // decoder step inputs, w of length D
    std::vector<Vec> y;       // decoder step outputs, w of length D
    double mse = 0.0, kl = 0.0, loss = 0.0;
};

/// Encoder half: returns (mu, logvar) for a window laid out step-major,
/// length w * input_width.
inline void vae_encode(const VaeModel& m, const double* x, VaeWorkspace& ws) {
    const std::size_t w = m.hp.w;
    const std::size_t d = m.input_width();
    ws.enc.reset(m.encoder, w);
    lstm_forward(m.encoder, w, [&](std::size_t t) { return x + t * d; }, ws.enc);
    const Vec& h_final = ws.enc.steps.back()[w - 1].h;
    ws.mu.assign(m.hp.latent_size, 0.0);
    ws.logvar.assign(m.hp.latent_size, 0.0);
    m.mu_head.apply(h_final.data(), ws.mu.data());
    m.logvar_head.apply(h_final.data(), ws.logvar.data());
}

/// Decoder half: from latent z, autoregressively emit w steps. The first
/// step input is zero; later steps feed back the previous output.
inline void vae_decode(const VaeModel& m, const Vec& z, VaeWorkspace& ws) {
    if (z.size() != m.hp.latent_size) throw ShapeMismatch("decode: latent size mismatch");
    const std::size_t w = m.hp.w;
    const std::size_t d = m.input_width();
    const std::size_t h = m.hp.hidden_size;
    const std::size_t layers = m.hp.lstm_layers;

    ws.dec_state.assign(2 * h * layers, 0.0);
    m.decoder_init.apply(z.data(), ws.dec_state.data());

    ws.dec.reset(m.decoder, w);
    for (std::size_t l = 0; l < layers; ++l) {
        std::copy_n(ws.dec_state.data() + l * h, h, ws.dec.h0[l].begin());
        std::copy_n(ws.dec_state.data() + (layers + l) * h, h, ws.dec.c0[l].begin());
    }

    ws.dec_in.assign(w, Vec(d, 0.0));
    ws.y.assign(w, Vec(d, 0.0));
    for (std::size_t t = 0; t < w; ++t) {
        if (t > 0) ws.dec_in[t] = ws.y[t - 1];
        const double* x = ws.dec_in[t].data();
        for (std::size_t l = 0; l < layers; ++l) {
            const Vec& h_prev = t == 0 ? ws.dec.h0[l] : ws.dec.steps[l][t - 1].h;
            const Vec& c_prev = t == 0 ? ws.dec.c0[l] : ws.dec.steps[l][t - 1].c;
            lstm_step(m.decoder.layers[l], x, h_prev, c_prev, ws.dec.steps[l][t]);
            x = ws.dec.steps[l][t].h.data();
        }
        m.output_head.apply(ws.dec.steps.back()[t].h.data(), ws.y[t].data());
    }
}

/// Full pass: encode, reparameterize with the given eps, decode, loss.
inline void vae_forward(const VaeModel& m, const double* x, const Vec& eps, VaeWorkspace& ws) {
    const std::size_t w = m.hp.w;
    const std::size_t d = m.input_width();
    vae_encode(m, x, ws);
    ws.eps = eps;
    ws.z = reparameterize(ws.mu, ws.logvar, eps);
    vae_decode(m, ws.z, ws);

    double mse = 0.0;
    for (std::size_t t = 0; t < w; ++t) {
        for (std::size_t j = 0; j < d; ++j) {
            const double diff = ws.y[t][j] - x[t * d + j];
            mse += diff * diff;
        }
    }
    ws.mse = mse / static_cast<double>(w * d);
    double kl = 0.0;
    for (std::size_t i = 0; i < ws.mu.size(); ++i) {
        kl += 1.0 + ws.logvar[i] - ws.mu[i] * ws.mu[i] - std::exp(ws.logvar[i]);
    }
    ws.kl = -0.5 * kl / static_cast<double>(ws.mu.size());
    ws.loss = ws.mse + m.hp.kl_weight * ws.kl;
}

/// Gradient holder shaped like a model (same registry walk order).
struct VaeGrads {
    VaeModel shadow;

    explicit VaeGrads(const VaeModel& m) {
        shadow.input_metrics = m.input_metrics;
        shadow.resize_for(m.hp, m.input_width());
    }

    void zero() {
        auto views = param_views(shadow);
        for (Vec* t : views.tensors) std::fill(t->begin(), t->end(), 0.0);
    }
};

/// Backpropagate through the pass recorded in `ws`; accumulates into
/// `grads` (does not zero it first, so batches can sum).
inline void vae_backward(const VaeModel& m, const double* x, VaeWorkspace& ws, VaeGrads& grads) {
    const std::size_t w = m.hp.w;
    const std::size_t d = m.input_width();
    const std::size_t h = m.hp.hidden_size;
    const std::size_t layers = m.hp.lstm_layers;
    const std::size_t latent = m.hp.latent_size;
    const double inv_wd = 1.0 / static_cast<double>(w * d);

    VaeModel& g = grads.shadow;

    // ---- decoder BPTT (autoregressive: dx of step t+1 feeds dy of step t)
    std::vector<Vec> dh(layers, Vec(h, 0.0)), dc(layers, Vec(h, 0.0));
    Vec du_next;  // gradient w.r.t. the next step's input, i.e. this step's y
    Vec dx_buf(std::max<std::size_t>(d, h), 0.0);
    for (std::size_t ti = w; ti-- > 0;) {
        Vec dy(d, 0.0);
        for (std::size_t j = 0; j < d; ++j) {
            dy[j] = 2.0 * (ws.y[ti][j] - x[ti * d + j]) * inv_wd;
        }
        if (!du_next.empty()) {
            for (std::size_t j = 0; j < d; ++j) dy[j] += du_next[j];
        }
        // output head
        const Vec& h_top = ws.dec.steps[layers - 1][ti].h;
        outer_acc(g.output_head.w, d, h, dy.data(), h_top.data());
        for (std::size_t j = 0; j < d; ++j) g.output_head.b[j] += dy[j];
        matvec_t_acc(m.output_head.w, d, h, dy.data(), dh[layers - 1].data());

        du_next.assign(d, 0.0);
        for (std::size_t l = layers; l-- > 0;) {
            const Vec& h_prev = ti == 0 ? ws.dec.h0[l] : ws.dec.steps[l][ti - 1].h;
            const Vec& c_prev = ti == 0 ? ws.dec.c0[l] : ws.dec.steps[l][ti - 1].c;
            const std::size_t in_size = m.decoder.layers[l].input_size;
            double* dx = l == 0 ? du_next.data() : dx_buf.data();
            if (l > 0) std::fill_n(dx, in_size, 0.0);
            lstm_step_backward(m.decoder.layers[l], ws.dec.steps[l][ti], h_prev, c_prev, dh[l],
                               dc[l], dx, g.decoder.layers[l]);
            if (l > 0) {
                for (std::size_t r = 0; r < in_size; ++r) dh[l - 1][r] += dx[r];
            }
        }
    }

    // dh/dc now hold gradients w.r.t. the decoder's initial states.
    Vec ds(2 * h * layers, 0.0);
    for (std::size_t l = 0; l < layers; ++l) {
        std::copy(dh[l].begin(), dh[l].end(), ds.begin() + l * h);
        std::copy(dc[l].begin(), dc[l].end(), ds.begin() + (layers + l) * h);
    }
    outer_acc(g.decoder_init.w, 2 * h * layers, latent, ds.data(), ws.z.data());
    for (std::size_t r = 0; r < ds.size(); ++r) g.decoder_init.b[r] += ds[r];
    Vec dz(latent, 0.0);
    matvec_t_acc(m.decoder_init.w, 2 * h * layers, latent, ds.data(), dz.data());

    // ---- latent heads (reparameterization plus KL term)
    const double beta = m.hp.kl_weight / static_cast<double>(latent);
    Vec dmu(latent), dlv(latent);
    for (std::size_t i = 0; i < latent; ++i) {
        dmu[i] = dz[i] + beta * ws.mu[i];
        dlv[i] = dz[i] * 0.5 * std::exp(0.5 * ws.logvar[i]) * ws.eps[i] +
                 beta * 0.5 * (std::exp(ws.logvar[i]) - 1.0);
    }
    const Vec& h_final = ws.enc.steps[layers - 1][w - 1].h;
    outer_acc(g.mu_head.w, latent, h, dmu.data(), h_final.data());
    outer_acc(g.logvar_head.w, latent, h, dlv.data(), h_final.data());
    for (std::size_t i = 0; i < latent; ++i) {
        g.mu_head.b[i] += dmu[i];
        g.logvar_head.b[i] += dlv[i];
    }

    // ---- encoder BPTT
    for (std::size_t l = 0; l < layers; ++l) {
        std::fill(dh[l].begin(), dh[l].end(), 0.0);
        std::fill(dc[l].begin(), dc[l].end(), 0.0);
    }
    matvec_t_acc(m.mu_head.w, latent, h, dmu.data(), dh[layers - 1].data());
    matvec_t_acc(m.logvar_head.w, latent, h, dlv.data(), dh[layers - 1].data());

    for (std::size_t ti = w; ti-- > 0;) {
        for (std::size_t l = layers; l-- > 0;) {
            const Vec& h_prev = ti == 0 ? ws.enc.h0[l] : ws.enc.steps[l][ti - 1].h;
            const Vec& c_prev = ti == 0 ? ws.enc.c0[l] : ws.enc.steps[l][ti - 1].c;
            const std::size_t in_size = m.encoder.layers[l].input_size;
            double* dx = l == 0 ? nullptr : dx_buf.data();
            if (dx != nullptr) std::fill_n(dx, in_size, 0.0);
            lstm_step_backward(m.encoder.layers[l], ws.enc.steps[l][ti], h_prev, c_prev, dh[l],
                               dc[l], dx, g.encoder.layers[l]);
            if (l > 0) {
                for (std::size_t r = 0; r < in_size; ++r) dh[l - 1][r] += dx[r];
            }
        }
    }
}

/// Inference-mode reconstruction: z = mu exactly, so identical windows give
/// identical results.
inline Reconstruction vae_denoise_raw(const VaeModel& m, const double* x, VaeWorkspace& ws) {
    vae_encode(m, x, ws);
    vae_decode(m, ws.mu, ws);
    const std::size_t w = m.hp.w;
    const std::size_t d = m.input_width();
    Reconstruction rec;
    rec.denoised.resize(w * d);
    double mse = 0.0;
    for (std::size_t t = 0; t < w; ++t) {
        for (std::size_t j = 0; j < d; ++j) {
            rec.denoised[t * d + j] = ws.y[t][j];
            const double diff = ws.y[t][j] - x[t * d + j];
            mse += diff * diff;
        }
    }
    rec.mse = mse / static_cast<double>(w * d);
    rec.mu = ws.mu;
    rec.logvar = ws.logvar;
    return rec;
}

inline Reconstruction denoise(const VaeModel& m, const Window& window, VaeWorkspace& ws) {
    if (m.input_width() != 1)
        throw MetricMismatch("single-metric denoise on an integrated model");
    if (window.metric != m.metric)
        throw MetricMismatch("window metric " + std::string(metric_name(window.metric)) +
                             " does not match model metric " +
                             std::string(metric_name(m.metric)));
    if (window.data.size() != m.hp.w) throw ShapeMismatch("window length != model w");
    return vae_denoise_raw(m, window.data.data(), ws);
}

inline Reconstruction denoise(const VaeModel& m, const Window& window) {
    VaeWorkspace ws;
    return denoise(m, window, ws);
}

}  // namespace minder
