// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>

#include "minder/lstm.hpp"
#include "minder/rng.hpp"

using namespace minder;

namespace {

double sig(double x) { return 1.0 / (1.0 + std::exp(-x)); }

/// Straight-line reference: one cell unrolled with explicit scalar loops and
/// no shared code with the implementation's gate routine.
struct UnrolledRef {
    static void run(const LstmLayerParams& p, const std::vector<Vec>& inputs, Vec& h, Vec& c) {
        const std::size_t hs = p.hidden_size;
        h.assign(hs, 0.0);
        c.assign(hs, 0.0);
        for (const Vec& x : inputs) {
            Vec i(hs), f(hs), g(hs), o(hs), c_new(hs), h_new(hs);
            for (std::size_t r = 0; r < hs; ++r) {
                double ai = p.bi[r], af = p.bf[r], ag = p.bg[r], ao = p.bo[r];
                for (std::size_t k = 0; k < p.input_size; ++k) {
                    ai += p.wi[r * p.input_size + k] * x[k];
                    af += p.wf[r * p.input_size + k] * x[k];
                    ag += p.wg[r * p.input_size + k] * x[k];
                    ao += p.wo[r * p.input_size + k] * x[k];
                }
                for (std::size_t k = 0; k < hs; ++k) {
                    ai += p.ui[r * hs + k] * h[k];
                    af += p.uf[r * hs + k] * h[k];
                    ag += p.ug[r * hs + k] * h[k];
                    ao += p.uo[r * hs + k] * h[k];
                }
                i[r] = sig(ai);
                f[r] = sig(af);
                g[r] = std::tanh(ag);
                o[r] = sig(ao);
                c_new[r] = f[r] * c[r] + i[r] * g[r];
                h_new[r] = o[r] * std::tanh(c_new[r]);
            }
            c = c_new;
            h = h_new;
        }
    }
};

LstmStack random_stack(Rng& rng, std::size_t input, std::size_t hidden, std::size_t layers) {
    LstmStack stack;
    stack.resize(input, hidden, layers);
    for (auto& layer : stack.layers) {
        for (Vec* v : {&layer.wi, &layer.wf, &layer.wg, &layer.wo, &layer.ui, &layer.uf, &layer.ug,
                       &layer.uo, &layer.bi, &layer.bf, &layer.bg, &layer.bo}) {
            for (double& x : *v) x = rng.uniform(-0.7, 0.7);
        }
    }
    return stack;
}

}  // namespace

TEST(Lstm, ZeroWeightsGiveZeroHiddenState) {
    LstmStack stack;
    stack.resize(1, 4, 1);
    LstmSequenceCache cache;
    cache.reset(stack, 8);
    Vec input = {0.3, -1.0, 2.0, 0.0, 5.0, -0.1, 0.9, 1.1};
    lstm_forward(stack, 8, [&](std::size_t t) { return &input[t]; }, cache);
    for (std::size_t t = 0; t < 8; ++t) {
        for (double h : cache.steps[0][t].h) EXPECT_DOUBLE_EQ(h, 0.0);
    }
}

TEST(Lstm, SingleStepMatchesHandComputedGates) {
    // Scalar cell: wi=1, wf=2, wg=0.5, wo=-1, all u=0, bi=0.1, bf=-0.2,
    // bg=0.3, bo=0.4; input x=0.8, starting from h=c=0.
    LstmLayerParams p;
    p.resize(1, 1);
    p.wi = {1.0};
    p.wf = {2.0};
    p.wg = {0.5};
    p.wo = {-1.0};
    p.bi = {0.1};
    p.bf = {-0.2};
    p.bg = {0.3};
    p.bo = {0.4};

    const double x = 0.8;
    const double i = sig(1.0 * x + 0.1);      // sigmoid(0.9)
    const double g = std::tanh(0.5 * x + 0.3);  // tanh(0.7)
    const double o = sig(-1.0 * x + 0.4);     // sigmoid(-0.4)
    const double c = i * g;                   // f*c0 = 0
    const double h = o * std::tanh(c);

    Vec h_prev(1, 0.0), c_prev(1, 0.0);
    LstmStepCache cache;
    lstm_step(p, &x, h_prev, c_prev, cache);
    EXPECT_NEAR(cache.i[0], i, 1e-15);
    EXPECT_NEAR(cache.g[0], g, 1e-15);
    EXPECT_NEAR(cache.o[0], o, 1e-15);
    EXPECT_NEAR(cache.c[0], c, 1e-15);
    EXPECT_NEAR(cache.h[0], h, 1e-15);
    // frozen values from a hand calculation of the same gates
    EXPECT_NEAR(cache.i[0], 0.7109495026250039, 1e-12);
    EXPECT_NEAR(cache.g[0], 0.6043677771171636, 1e-12);
    EXPECT_NEAR(cache.o[0], 0.4013123398875480, 1e-12);
    EXPECT_NEAR(cache.h[0], 0.1625514192145436, 1e-12);
}

TEST(Lstm, SequenceMatchesUnrolledReference) {
    Rng rng(42);
    for (int rep = 0; rep < 30; ++rep) {
        const std::size_t hidden = 2 + rep % 4;
        LstmStack stack = random_stack(rng, 1, hidden, 1);
        std::vector<Vec> inputs;
        const std::size_t len = 3 + rep % 6;
        for (std::size_t t = 0; t < len; ++t) inputs.push_back({rng.uniform(-2.0, 2.0)});

        LstmSequenceCache cache;
        cache.reset(stack, len);
        lstm_forward(stack, len, [&](std::size_t t) { return inputs[t].data(); }, cache);

        Vec h_ref, c_ref;
        UnrolledRef::run(stack.layers[0], inputs, h_ref, c_ref);
        const Vec& h = cache.steps[0][len - 1].h;
        const Vec& c = cache.steps[0][len - 1].c;
        for (std::size_t r = 0; r < hidden; ++r) {
            ASSERT_NEAR(h[r], h_ref[r], 1e-12);
            ASSERT_NEAR(c[r], c_ref[r], 1e-12);
        }
    }
}

TEST(Lstm, TwoLayerStackFeedsHiddenStatesUpward) {
    Rng rng(5);
    LstmStack stack = random_stack(rng, 1, 3, 2);
    std::vector<Vec> inputs;
    for (int t = 0; t < 5; ++t) inputs.push_back({rng.uniform(-1.0, 1.0)});
    LstmSequenceCache cache;
    cache.reset(stack, 5);
    lstm_forward(stack, 5, [&](std::size_t t) { return inputs[t].data(); }, cache);

    // reference: run layer 0 unrolled, then feed its per-step h into layer 1
    Vec h0(3, 0.0), c0(3, 0.0);
    Vec h1(3, 0.0), c1(3, 0.0);
    for (std::size_t t = 0; t < 5; ++t) {
        const std::vector<Vec> prefix(inputs.begin(), inputs.begin() + t + 1);
        UnrolledRef::run(stack.layers[0], prefix, h0, c0);
        ASSERT_NEAR(cache.steps[0][t].h[0], h0[0], 1e-12);
    }
    // layer 1 consumes layer 0's cached outputs
    std::vector<Vec> layer1_inputs;
    for (std::size_t t = 0; t < 5; ++t) layer1_inputs.push_back(cache.steps[0][t].h);
    UnrolledRef::run(stack.layers[1], layer1_inputs, h1, c1);
    for (std::size_t r = 0; r < 3; ++r) {
        ASSERT_NEAR(cache.steps[1][4].h[r], h1[r], 1e-12);
    }
}
