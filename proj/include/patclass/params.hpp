#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "patclass/config.hpp"
#include "patclass/errors.hpp"
#include "patclass/rng.hpp"
#include "patclass/tensor.hpp"

namespace patclass {

template <typename T>
struct LayerParams {
    Tensor<T> query_w, query_b;
    Tensor<T> key_w, key_b;
    Tensor<T> value_w, value_b;
    Tensor<T> attn_out_w, attn_out_b;
    Tensor<T> attn_ln_gamma, attn_ln_beta;
    Tensor<T> ffn_in_w, ffn_in_b;
    Tensor<T> ffn_out_w, ffn_out_b;
    Tensor<T> ffn_ln_gamma, ffn_ln_beta;
};

// All named weight tensors of the encoder, pooler and classification head.
// Linear weights are stored [out x in]; gradients reuse the same structure.
template <typename T>
struct ParameterStore {
    ModelConfig config;

    Tensor<T> token_embedding;     // [vocab_size x hidden]
    Tensor<T> position_embedding;  // [max_positions x hidden]
    Tensor<T> segment_embedding;   // [2 x hidden]
    Tensor<T> emb_ln_gamma, emb_ln_beta;

    std::vector<LayerParams<T>> layers;

    Tensor<T> pooler_w, pooler_b;          // [hidden x hidden], [hidden]
    Tensor<T> classifier_w, classifier_b;  // [n_labels x hidden], [n_labels]
};

// Visits every tensor with its canonical name, in a fixed order shared by
// init, checkpoint layout, optimizer state and the shape audit.
template <typename Store, typename Fn>
void for_each_tensor(Store& store, Fn&& fn) {
    fn("embeddings.token", store.token_embedding);
    fn("embeddings.position", store.position_embedding);
    fn("embeddings.segment", store.segment_embedding);
    fn("embeddings.layernorm.gamma", store.emb_ln_gamma);
    fn("embeddings.layernorm.beta", store.emb_ln_beta);
    for (std::size_t i = 0; i < store.layers.size(); ++i) {
        auto& l = store.layers[i];
        const std::string p = "layers." + std::to_string(i) + ".";
        fn(p + "attention.query.weight", l.query_w);
        fn(p + "attention.query.bias", l.query_b);
        fn(p + "attention.key.weight", l.key_w);
        fn(p + "attention.key.bias", l.key_b);
        fn(p + "attention.value.weight", l.value_w);
        fn(p + "attention.value.bias", l.value_b);
        fn(p + "attention.output.weight", l.attn_out_w);
        fn(p + "attention.output.bias", l.attn_out_b);
        fn(p + "attention.layernorm.gamma", l.attn_ln_gamma);
        fn(p + "attention.layernorm.beta", l.attn_ln_beta);
        fn(p + "ffn.intermediate.weight", l.ffn_in_w);
        fn(p + "ffn.intermediate.bias", l.ffn_in_b);
        fn(p + "ffn.output.weight", l.ffn_out_w);
        fn(p + "ffn.output.bias", l.ffn_out_b);
        fn(p + "ffn.layernorm.gamma", l.ffn_ln_gamma);
        fn(p + "ffn.layernorm.beta", l.ffn_ln_beta);
    }
    fn("pooler.weight", store.pooler_w);
    fn("pooler.bias", store.pooler_b);
    fn("classifier.weight", store.classifier_w);
    fn("classifier.bias", store.classifier_b);
}

struct TensorSpec {
    std::string name;
    std::vector<std::size_t> shape;
};

// Expected name -> shape table, fully determined by the config.
inline std::vector<TensorSpec> tensor_shapes(const ModelConfig& c) {
    const auto H = static_cast<std::size_t>(c.hidden);
    const auto F = static_cast<std::size_t>(c.ffn_dim);
    std::vector<TensorSpec> specs;
    specs.push_back({"embeddings.token", {static_cast<std::size_t>(c.vocab_size), H}});
    specs.push_back({"embeddings.position", {static_cast<std::size_t>(c.max_positions), H}});
    specs.push_back({"embeddings.segment", {static_cast<std::size_t>(c.n_segments), H}});
    specs.push_back({"embeddings.layernorm.gamma", {H}});
    specs.push_back({"embeddings.layernorm.beta", {H}});
    for (int i = 0; i < c.n_layers; ++i) {
        const std::string p = "layers." + std::to_string(i) + ".";
        specs.push_back({p + "attention.query.weight", {H, H}});
        specs.push_back({p + "attention.query.bias", {H}});
        specs.push_back({p + "attention.key.weight", {H, H}});
        specs.push_back({p + "attention.key.bias", {H}});
        specs.push_back({p + "attention.value.weight", {H, H}});
        specs.push_back({p + "attention.value.bias", {H}});
        specs.push_back({p + "attention.output.weight", {H, H}});
        specs.push_back({p + "attention.output.bias", {H}});
        specs.push_back({p + "attention.layernorm.gamma", {H}});
        specs.push_back({p + "attention.layernorm.beta", {H}});
        specs.push_back({p + "ffn.intermediate.weight", {F, H}});
        specs.push_back({p + "ffn.intermediate.bias", {F}});
        specs.push_back({p + "ffn.output.weight", {H, F}});
        specs.push_back({p + "ffn.output.bias", {H}});
        specs.push_back({p + "ffn.layernorm.gamma", {H}});
        specs.push_back({p + "ffn.layernorm.beta", {H}});
    }
    specs.push_back({"pooler.weight", {H, H}});
    specs.push_back({"pooler.bias", {H}});
    specs.push_back({"classifier.weight", {static_cast<std::size_t>(c.n_labels), H}});
    specs.push_back({"classifier.bias", {static_cast<std::size_t>(c.n_labels)}});
    return specs;
}

inline std::size_t parameter_count(const ModelConfig& config) {
    std::size_t total = 0;
    for (const TensorSpec& spec : tensor_shapes(config)) {
        total += Tensor<float>::count(spec.shape);
    }
    return total;
}

// Allocates every tensor at its config-determined shape, zero-filled.
template <typename T>
ParameterStore<T> zeros_like(const ModelConfig& config) {
    config.validate();
    ParameterStore<T> store;
    store.config = config;
    store.layers.resize(static_cast<std::size_t>(config.n_layers));
    std::vector<TensorSpec> specs = tensor_shapes(config);
    std::size_t next = 0;
    for_each_tensor(store, [&](const std::string& name, Tensor<T>& t) {
        if (specs[next].name != name) throw ShapeError("tensor order mismatch at " + name);
        t = Tensor<T>(specs[next].shape);
        ++next;
    });
    return store;
}

// Verifies that every tensor matches its config-determined shape.
template <typename T>
void shape_audit(const ParameterStore<T>& store) {
    std::vector<TensorSpec> specs = tensor_shapes(store.config);
    std::size_t next = 0;
    for_each_tensor(store, [&](const std::string& name, const Tensor<T>& t) {
        const TensorSpec& spec = specs[next++];
        if (spec.name != name || t.shape != spec.shape) {
            throw ShapeError("shape audit failed for tensor " + name);
        }
    });
    if (next != specs.size()) throw ShapeError("tensor count mismatch");
}

// Weights ~ truncated normal(0, 0.02) at +/-2 sigma; biases 0; layernorm
// gamma 1, beta 0. Deterministic for a given seed.
template <typename T>
ParameterStore<T> init_params(const ModelConfig& config, std::uint64_t seed) {
    ParameterStore<T> store = zeros_like<T>(config);
    Rng rng(mix_seed(seed, 0x1417));
    for_each_tensor(store, [&](const std::string& name, Tensor<T>& t) {
        const bool is_gamma = name.size() >= 5 && name.compare(name.size() - 5, 5, "gamma") == 0;
        const bool is_beta = name.size() >= 4 && name.compare(name.size() - 4, 4, "beta") == 0;
        const bool is_bias = name.size() >= 4 && name.compare(name.size() - 4, 4, "bias") == 0;
        if (is_gamma) {
            t.fill(T(1));
        } else if (is_beta || is_bias) {
            t.fill(T(0));
        } else {
            for (T& v : t.data) v = static_cast<T>(rng.truncated_normal(0.02));
        }
    });
    return store;
}

template <typename To, typename From>
ParameterStore<To> cast_store(const ParameterStore<From>& in) {
    ParameterStore<To> out = zeros_like<To>(in.config);
    std::vector<const Tensor<From>*> srcs;
    for_each_tensor(in, [&](const std::string&, const Tensor<From>& t) { srcs.push_back(&t); });
    std::size_t i = 0;
    for_each_tensor(out, [&](const std::string&, Tensor<To>& t) {
        t = tensor_cast<To>(*srcs[i++]);
    });
    return out;
}

}  // namespace patclass
