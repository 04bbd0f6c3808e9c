#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "patclass/loss.hpp"
#include "patclass/params.hpp"

namespace patclass {

struct TrainConfig {
    int batch_size = 32;
    double base_lr = 5e-5;
    int epochs = 3;
    double warmup_fraction = 0.1;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    double grad_clip_norm = 0.0;  // <= 0 disables clipping
    LossReduction reduction = LossReduction::mean_elements;
    std::uint64_t seed = 0;

    void validate() const {
        if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
        if (!(base_lr > 0.0)) throw ConfigError("base_lr must be positive");
        if (epochs < 1) throw ConfigError("epochs must be >= 1");
        if (warmup_fraction < 0.0 || warmup_fraction >= 1.0) {
            throw ConfigError("warmup_fraction must lie in [0,1)");
        }
        if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0) {
            throw ConfigError("adam betas must lie in [0,1)");
        }
        if (!(adam_eps > 0.0)) throw ConfigError("adam_eps must be positive");
    }
};

inline void to_json(nlohmann::json& j, const TrainConfig& c) {
    j = nlohmann::json{{"batch_size", c.batch_size},
                       {"base_lr", c.base_lr},
                       {"epochs", c.epochs},
                       {"warmup_fraction", c.warmup_fraction},
                       {"beta1", c.beta1},
                       {"beta2", c.beta2},
                       {"adam_eps", c.adam_eps},
                       {"grad_clip_norm", c.grad_clip_norm},
                       {"loss_reduction", to_string(c.reduction)},
                       {"seed", c.seed}};
}

inline void from_json(const nlohmann::json& j, TrainConfig& c) {
    TrainConfig defaults;
    c.batch_size = j.value("batch_size", defaults.batch_size);
    c.base_lr = j.value("base_lr", defaults.base_lr);
    c.epochs = j.value("epochs", defaults.epochs);
    c.warmup_fraction = j.value("warmup_fraction", defaults.warmup_fraction);
    c.beta1 = j.value("beta1", defaults.beta1);
    c.beta2 = j.value("beta2", defaults.beta2);
    c.adam_eps = j.value("adam_eps", defaults.adam_eps);
    c.grad_clip_norm = j.value("grad_clip_norm", defaults.grad_clip_norm);
    c.reduction = loss_reduction_from_string(
        j.value("loss_reduction", to_string(defaults.reduction)));
    c.seed = j.value("seed", defaults.seed);
}

// Linear warmup from 0 to base_lr over floor(warmup_fraction*total) steps,
// then linear decay back to 0 at total_steps. step is the 0-based index at
// which the upcoming update is applied.
inline double lr_schedule(std::uint64_t step, std::uint64_t total_steps, const TrainConfig& cfg) {
    const auto warmup = static_cast<std::uint64_t>(cfg.warmup_fraction *
                                                   static_cast<double>(total_steps));
    if (warmup > 0 && step < warmup) {
        return cfg.base_lr * static_cast<double>(step) / static_cast<double>(warmup);
    }
    return cfg.base_lr * static_cast<double>(total_steps - step) /
           static_cast<double>(total_steps - warmup);
}

template <typename T>
struct AdamState {
    std::uint64_t t = 0;
    ParameterStore<T> m;
    ParameterStore<T> v;

    explicit AdamState(const ModelConfig& config)
        : m(zeros_like<T>(config)), v(zeros_like<T>(config)) {}
};

// One Adam update with bias correction. Gradients are validated for
// finiteness, optionally rescaled to a global-norm ceiling, and never mutated.
template <typename T>
void adam_step(ParameterStore<T>& params, const ParameterStore<T>& grads, AdamState<T>& state,
               double lr_t, const TrainConfig& cfg) {
    double sq_norm = 0.0;
    for_each_tensor(grads, [&](const std::string& name, const Tensor<T>& g) {
        if (!g.all_finite()) throw NumericsError("gradient for " + name + " is not finite");
        for (const T v : g.data) sq_norm += static_cast<double>(v) * static_cast<double>(v);
    });
    T clip_scale = T(1);
    if (cfg.grad_clip_norm > 0.0) {
        const double norm = std::sqrt(sq_norm);
        if (norm > cfg.grad_clip_norm) clip_scale = static_cast<T>(cfg.grad_clip_norm / norm);
    }

    state.t += 1;
    const T beta1 = static_cast<T>(cfg.beta1);
    const T beta2 = static_cast<T>(cfg.beta2);
    const T eps = static_cast<T>(cfg.adam_eps);
    const T lr = static_cast<T>(lr_t);
    const T bc1 = T(1) - static_cast<T>(std::pow(cfg.beta1, static_cast<double>(state.t)));
    const T bc2 = T(1) - static_cast<T>(std::pow(cfg.beta2, static_cast<double>(state.t)));

    std::vector<const Tensor<T>*> gsrc;
    for_each_tensor(grads, [&](const std::string&, const Tensor<T>& g) { gsrc.push_back(&g); });
    std::vector<Tensor<T>*> msrc, vsrc;
    for_each_tensor(state.m, [&](const std::string&, Tensor<T>& t) { msrc.push_back(&t); });
    for_each_tensor(state.v, [&](const std::string&, Tensor<T>& t) { vsrc.push_back(&t); });

    std::size_t idx = 0;
    for_each_tensor(params, [&](const std::string&, Tensor<T>& p) {
        const Tensor<T>& g = *gsrc[idx];
        Tensor<T>& m = *msrc[idx];
        Tensor<T>& v = *vsrc[idx];
        ++idx;
        for (std::size_t i = 0; i < p.size(); ++i) {
            const T gi = g.data[i] * clip_scale;
            m.data[i] = beta1 * m.data[i] + (T(1) - beta1) * gi;
            v.data[i] = beta2 * v.data[i] + (T(1) - beta2) * gi * gi;
            const T mhat = m.data[i] / bc1;
            const T vhat = v.data[i] / bc2;
            p.data[i] -= lr * mhat / (std::sqrt(vhat) + eps);
        }
    });
}

}  // namespace patclass
