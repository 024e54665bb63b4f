// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <vector>

#include "minder/error.hpp"
#include "minder/vae.hpp"

namespace minder {

/// Adam over a model's parameter registry.
class AdamOptimizer {
public:
    AdamOptimizer(VaeModel& model, double lr, double beta1 = 0.9, double beta2 = 0.999,
                  double eps = 1e-8)
        : views_(param_views(model)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
        m_.resize(views_.tensors.size());
        v_.resize(views_.tensors.size());
        for (std::size_t i = 0; i < views_.tensors.size(); ++i) {
            m_[i].assign(views_.tensors[i]->size(), 0.0);
            v_[i].assign(views_.tensors[i]->size(), 0.0);
        }
    }

    void step(ParamViews& grad_views) {
        ++t_;
        const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
        const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
        for (std::size_t i = 0; i < views_.tensors.size(); ++i) {
            Vec& p = *views_.tensors[i];
            const Vec& g = *grad_views.tensors[i];
            Vec& mi = m_[i];
            Vec& vi = v_[i];
            for (std::size_t j = 0; j < p.size(); ++j) {
                mi[j] = beta1_ * mi[j] + (1.0 - beta1_) * g[j];
                vi[j] = beta2_ * vi[j] + (1.0 - beta2_) * g[j] * g[j];
                const double mhat = mi[j] / bc1;
                const double vhat = vi[j] / bc2;
                p[j] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
            }
        }
    }

private:
    ParamViews views_;
    double lr_, beta1_, beta2_, eps_;
    std::uint64_t t_ = 0;
    std::vector<Vec> m_, v_;
};

struct TrainResult {
    VaeModel model;
    std::vector<double> epoch_losses;  // mean training loss per epoch
    double best_loss = std::numeric_limits<double>::infinity();
    std::size_t best_epoch = 0;  // 1-based; 0 means the initial weights were kept
};

/// Train one denoiser on pooled windows (each entry laid out step-major,
/// length w * input_width). Deterministic given (data, hyperparams, seed):
/// weight init, batch shuffling and reparameterization noise all come from
/// the seed. Keeps the epoch snapshot with the lowest mean training loss.
inline TrainResult train_model(const std::vector<Vec>& windows, const VaeHyperparams& hp,
                               const std::vector<MetricKind>& input_metrics) {
    hp.validate();
    if (windows.empty()) throw NoTrainingData("train_model: no windows");
    const std::size_t d = input_metrics.size();
    for (const Vec& win : windows) {
        if (win.size() != hp.w * d) throw ShapeMismatch("train_model: window length != w * width");
    }

    TrainResult result;
    VaeModel& model = result.model;
    model.metric = input_metrics.front();
    model.input_metrics = input_metrics;
    model.resize_for(hp, d);

    Rng rng(derive_seed(hp.seed, 0xA11));
    init_weights(model, rng);

    if (hp.epochs == 0) {
        result.best_epoch = 0;
        return result;
    }

    AdamOptimizer adam(model, hp.learning_rate);
    VaeGrads grads(model);
    ParamViews grad_views = param_views(grads.shadow);
    VaeWorkspace ws;
    Vec eps(hp.latent_size);

    std::vector<std::size_t> order(windows.size());
    std::iota(order.begin(), order.end(), 0);

    VaeModel best = model;
    double best_loss = std::numeric_limits<double>::infinity();
    std::size_t best_epoch = 0;

    for (std::size_t epoch = 1; epoch <= hp.epochs; ++epoch) {
        rng.shuffle(order);
        double epoch_loss_sum = 0.0;

        for (std::size_t begin = 0; begin < order.size(); begin += hp.batch_size) {
            const std::size_t end = std::min(order.size(), begin + hp.batch_size);
            const double inv_batch = 1.0 / static_cast<double>(end - begin);
            grads.zero();
            double batch_loss = 0.0;
            for (std::size_t k = begin; k < end; ++k) {
                const Vec& x = windows[order[k]];
                for (double& e : eps) e = rng.normal();
                vae_forward(model, x.data(), eps, ws);
                if (!std::isfinite(ws.loss))
                    throw NonFiniteLoss("training diverged at epoch " + std::to_string(epoch));
                batch_loss += ws.loss;
                vae_backward(model, x.data(), ws, grads);
            }
            // average the batch gradient
            for (Vec* t : grad_views.tensors) {
                for (double& gj : *t) gj *= inv_batch;
            }
            adam.step(grad_views);
            epoch_loss_sum += batch_loss;
        }

        const double epoch_loss = epoch_loss_sum / static_cast<double>(order.size());
        result.epoch_losses.push_back(epoch_loss);
        if (epoch_loss < best_loss) {
            best_loss = epoch_loss;
            best_epoch = epoch;
            best = model;
        }
    }

    result.model = best;
    result.best_loss = best_loss;
    result.best_epoch = best_epoch;
    return result;
}

inline TrainResult train_model(const std::vector<Vec>& windows, const VaeHyperparams& hp,
                               MetricKind metric) {
    return train_model(windows, hp, std::vector<MetricKind>{metric});
}

}  // namespace minder
