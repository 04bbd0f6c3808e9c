#pragma once

#include <string>

#include <nlohmann/json.hpp>

#include "patclass/errors.hpp"

namespace patclass {

// Encoder hyperparameters. n_segments is fixed at 2 (single-text inputs use
// segment 0 everywhere; the second row exists for checkpoint compatibility).
struct ModelConfig {
    int n_layers = 12;
    int hidden = 768;
    int n_heads = 12;
    int ffn_dim = 3072;
    int vocab_size = 30522;
    int max_positions = 512;
    int n_segments = 2;
    int n_labels = 2;
    double dropout = 0.1;
    double layernorm_eps = 1e-12;

    static ModelConfig base(int n_labels) {
        ModelConfig c;
        c.n_labels = n_labels;
        return c;
    }

    static ModelConfig tiny(int vocab_size, int n_labels) {
        ModelConfig c;
        c.n_layers = 2;
        c.hidden = 64;
        c.n_heads = 2;
        c.ffn_dim = 256;
        c.vocab_size = vocab_size;
        c.max_positions = 128;
        c.n_labels = n_labels;
        return c;
    }

    void validate() const {
        if (n_layers < 1 || hidden < 1 || n_heads < 1 || ffn_dim < 1 || vocab_size < 1 ||
            max_positions < 1 || n_labels < 1) {
            throw ConfigError("all model dimensions must be >= 1");
        }
        if (hidden % n_heads != 0) {
            throw ConfigError("hidden (" + std::to_string(hidden) + ") not divisible by n_heads (" +
                              std::to_string(n_heads) + ")");
        }
        if (n_segments != 2) throw ConfigError("n_segments is fixed at 2");
        if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must be in [0, 1)");
        if (!(layernorm_eps > 0.0)) throw ConfigError("layernorm_eps must be positive");
    }

    int head_dim() const { return hidden / n_heads; }

    bool operator==(const ModelConfig&) const = default;
};

inline void to_json(nlohmann::json& j, const ModelConfig& c) {
    j = nlohmann::json{{"n_layers", c.n_layers},
                       {"hidden", c.hidden},
                       {"n_heads", c.n_heads},
                       {"ffn_dim", c.ffn_dim},
                       {"vocab_size", c.vocab_size},
                       {"max_positions", c.max_positions},
                       {"n_segments", c.n_segments},
                       {"n_labels", c.n_labels},
                       {"dropout", c.dropout},
                       {"layernorm_eps", c.layernorm_eps}};
}

inline void from_json(const nlohmann::json& j, ModelConfig& c) {
    j.at("n_layers").get_to(c.n_layers);
    j.at("hidden").get_to(c.hidden);
    j.at("n_heads").get_to(c.n_heads);
    j.at("ffn_dim").get_to(c.ffn_dim);
    j.at("vocab_size").get_to(c.vocab_size);
    j.at("max_positions").get_to(c.max_positions);
    j.at("n_segments").get_to(c.n_segments);
    j.at("n_labels").get_to(c.n_labels);
    j.at("dropout").get_to(c.dropout);
    j.at("layernorm_eps").get_to(c.layernorm_eps);
}

}  // namespace patclass
