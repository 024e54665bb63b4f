// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "minder/error.hpp"

namespace minder {

using Vec = std::vector<double>;

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

/// y += W x  with W stored row-major (rows x cols).
inline void matvec_acc(const Vec& w, std::size_t rows, std::size_t cols, const double* x,
                       double* y) {
    for (std::size_t r = 0; r < rows; ++r) {
        double acc = 0.0;
        const double* wr = w.data() + r * cols;
        for (std::size_t c = 0; c < cols; ++c) acc += wr[c] * x[c];
        y[r] += acc;
    }
}

/// y += W^T g  (back-propagating through y = W x).
inline void matvec_t_acc(const Vec& w, std::size_t rows, std::size_t cols, const double* g,
                         double* y) {
    for (std::size_t r = 0; r < rows; ++r) {
        const double* wr = w.data() + r * cols;
        const double gr = g[r];
        for (std::size_t c = 0; c < cols; ++c) y[c] += wr[c] * gr;
    }
}

/// dW += g x^T.
inline void outer_acc(Vec& dw, std::size_t rows, std::size_t cols, const double* g,
                      const double* x) {
    for (std::size_t r = 0; r < rows; ++r) {
        double* dr = dw.data() + r * cols;
        const double gr = g[r];
        for (std::size_t c = 0; c < cols; ++c) dr[c] += gr * x[c];
    }
}

/// Parameters of one LSTM layer. Gate order is input, forget, cell
/// candidate, output; `w` maps the step input, `u` the previous hidden
/// state.
struct LstmLayerParams {
    std::size_t input_size = 0;
    std::size_t hidden_size = 0;
    Vec wi, wf, wg, wo;  // hidden x input
    Vec ui, uf, ug, uo;  // hidden x hidden
    Vec bi, bf, bg, bo;  // hidden

    void resize(std::size_t input, std::size_t hidden) {
        input_size = input;
        hidden_size = hidden;
        for (Vec* v : {&wi, &wf, &wg, &wo}) v->assign(hidden * input, 0.0);
        for (Vec* v : {&ui, &uf, &ug, &uo}) v->assign(hidden * hidden, 0.0);
        for (Vec* v : {&bi, &bf, &bg, &bo}) v->assign(hidden, 0.0);
    }
};

/// Per-step activations kept for backpropagation through time.
struct LstmStepCache {
    Vec x;       // step input
    Vec i, f, g, o;
    Vec c;       // cell state after the step
    Vec tanh_c;
    Vec h;       // hidden state after the step
};

/// One cell update: standard gates
///   i,f,o = sigmoid(Wx + Uh + b), g = tanh(Wx + Uh + b),
///   c' = f.c + i.g, h' = o.tanh(c').
inline void lstm_step(const LstmLayerParams& p, const double* x, const Vec& h_prev,
                      const Vec& c_prev, LstmStepCache& cache) {
    const std::size_t h = p.hidden_size;
    cache.x.assign(x, x + p.input_size);
    cache.i.assign(h, 0.0);
    cache.f.assign(h, 0.0);
    cache.g.assign(h, 0.0);
    cache.o.assign(h, 0.0);

    auto gate = [&](const Vec& w, const Vec& u, const Vec& b, Vec& out) {
        for (std::size_t r = 0; r < h; ++r) out[r] = b[r];
        matvec_acc(w, h, p.input_size, x, out.data());
        matvec_acc(u, h, h, h_prev.data(), out.data());
    };
    gate(p.wi, p.ui, p.bi, cache.i);
    gate(p.wf, p.uf, p.bf, cache.f);
    gate(p.wg, p.ug, p.bg, cache.g);
    gate(p.wo, p.uo, p.bo, cache.o);

    cache.c.resize(h);
    cache.tanh_c.resize(h);
    cache.h.resize(h);
    for (std::size_t r = 0; r < h; ++r) {
        cache.i[r] = sigmoid(cache.i[r]);
        cache.f[r] = sigmoid(cache.f[r]);
        cache.g[r] = std::tanh(cache.g[r]);
        cache.o[r] = sigmoid(cache.o[r]);
        cache.c[r] = cache.f[r] * c_prev[r] + cache.i[r] * cache.g[r];
        cache.tanh_c[r] = std::tanh(cache.c[r]);
        cache.h[r] = cache.o[r] * cache.tanh_c[r];
    }
}

/// Reverse one cell update. `dh` and `dc` carry gradients flowing into this
/// step's outputs and are replaced with the gradients for the previous
/// step; `dx` (len input_size) receives the step-input gradient. `grads` is
/// a same-shaped accumulator.
inline void lstm_step_backward(const LstmLayerParams& p, const LstmStepCache& cache,
                               const Vec& h_prev, const Vec& c_prev, Vec& dh, Vec& dc,
                               double* dx, LstmLayerParams& grads) {
    const std::size_t h = p.hidden_size;
    Vec da_i(h), da_f(h), da_g(h), da_o(h);
    for (std::size_t r = 0; r < h; ++r) {
        const double do_ = dh[r] * cache.tanh_c[r];
        double dc_r = dc[r] + dh[r] * cache.o[r] * (1.0 - cache.tanh_c[r] * cache.tanh_c[r]);
        da_o[r] = do_ * cache.o[r] * (1.0 - cache.o[r]);
        da_i[r] = dc_r * cache.g[r] * cache.i[r] * (1.0 - cache.i[r]);
        da_g[r] = dc_r * cache.i[r] * (1.0 - cache.g[r] * cache.g[r]);
        da_f[r] = dc_r * c_prev[r] * cache.f[r] * (1.0 - cache.f[r]);
        dc[r] = dc_r * cache.f[r];  // gradient for c_{t-1}
    }

    outer_acc(grads.wi, h, p.input_size, da_i.data(), cache.x.data());
    outer_acc(grads.wf, h, p.input_size, da_f.data(), cache.x.data());
    outer_acc(grads.wg, h, p.input_size, da_g.data(), cache.x.data());
    outer_acc(grads.wo, h, p.input_size, da_o.data(), cache.x.data());
    outer_acc(grads.ui, h, h, da_i.data(), h_prev.data());
    outer_acc(grads.uf, h, h, da_f.data(), h_prev.data());
    outer_acc(grads.ug, h, h, da_g.data(), h_prev.data());
    outer_acc(grads.uo, h, h, da_o.data(), h_prev.data());
    for (std::size_t r = 0; r < h; ++r) {
        grads.bi[r] += da_i[r];
        grads.bf[r] += da_f[r];
        grads.bg[r] += da_g[r];
        grads.bo[r] += da_o[r];
    }

    // dh_{t-1} and dx through the four gate pre-activations.
    std::fill(dh.begin(), dh.end(), 0.0);
    matvec_t_acc(p.ui, h, h, da_i.data(), dh.data());
    matvec_t_acc(p.uf, h, h, da_f.data(), dh.data());
    matvec_t_acc(p.ug, h, h, da_g.data(), dh.data());
    matvec_t_acc(p.uo, h, h, da_o.data(), dh.data());
    if (dx != nullptr) {
        matvec_t_acc(p.wi, h, p.input_size, da_i.data(), dx);
        matvec_t_acc(p.wf, h, p.input_size, da_f.data(), dx);
        matvec_t_acc(p.wg, h, p.input_size, da_g.data(), dx);
        matvec_t_acc(p.wo, h, p.input_size, da_o.data(), dx);
    }
}

/// A stack of LSTM layers; layer l > 0 consumes layer l-1's hidden states.
struct LstmStack {
    std::vector<LstmLayerParams> layers;

    std::size_t hidden_size() const { return layers.empty() ? 0 : layers.back().hidden_size; }

    void resize(std::size_t input, std::size_t hidden, std::size_t n_layers) {
        layers.resize(n_layers);
        for (std::size_t l = 0; l < n_layers; ++l) {
            layers[l].resize(l == 0 ? input : hidden, hidden);
        }
    }
};

/// Forward states for a whole sequence through a stack.
struct LstmSequenceCache {
    // cache[layer][step]
    std::vector<std::vector<LstmStepCache>> steps;
    // initial states per layer (h0, c0)
    std::vector<Vec> h0, c0;

    void reset(const LstmStack& stack, std::size_t seq_len) {
        steps.assign(stack.layers.size(), std::vector<LstmStepCache>(seq_len));
        h0.assign(stack.layers.size(), Vec());
        c0.assign(stack.layers.size(), Vec());
        for (std::size_t l = 0; l < stack.layers.size(); ++l) {
            h0[l].assign(stack.layers[l].hidden_size, 0.0);
            c0[l].assign(stack.layers[l].hidden_size, 0.0);
        }
    }
};

/// Run `seq_len` steps of the stack. `input(t)` must return a pointer to the
/// step-t input of width layers[0].input_size. Initial states are taken from
/// `cache.h0/c0` (set them before the call; reset() zeroes them).
template <typename InputFn>
inline void lstm_forward(const LstmStack& stack, std::size_t seq_len, InputFn input,
                         LstmSequenceCache& cache) {
    for (std::size_t t = 0; t < seq_len; ++t) {
        const double* x = input(t);
        for (std::size_t l = 0; l < stack.layers.size(); ++l) {
            const Vec& h_prev = t == 0 ? cache.h0[l] : cache.steps[l][t - 1].h;
            const Vec& c_prev = t == 0 ? cache.c0[l] : cache.steps[l][t - 1].c;
            lstm_step(stack.layers[l], x, h_prev, c_prev, cache.steps[l][t]);
            x = cache.steps[l][t].h.data();
        }
    }
}

}  // namespace minder
