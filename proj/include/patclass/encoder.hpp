#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <utility>
#include <vector>

#include "patclass/params.hpp"
#include "patclass/rng.hpp"
#include "patclass/tensor.hpp"
#include "patclass/tokenizer.hpp"

namespace patclass {

inline constexpr double kMaskPenalty = -1e9;

namespace detail {

template <typename T>
T gelu(T x) {
    const T k = T(0.7978845608028654);  // sqrt(2/pi)
    const T c = T(0.044715);
    const T u = k * (x + c * x * x * x);
    return T(0.5) * x * (T(1) + std::tanh(u));
}

template <typename T>
T gelu_grad(T x) {
    const T k = T(0.7978845608028654);
    const T c = T(0.044715);
    const T u = k * (x + c * x * x * x);
    const T th = std::tanh(u);
    const T sech2 = T(1) - th * th;
    return T(0.5) * (T(1) + th) + T(0.5) * x * sech2 * k * (T(1) + T(3) * c * x * x);
}

// y = gamma * (x - mean) / sqrt(var + eps) + beta, rowwise over the last dim.
template <typename T>
void layernorm_forward(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                       T eps, Tensor<T>& y) {
    const std::size_t rows = x.dim(0), width = x.dim(1);
    for (std::size_t i = 0; i < rows; ++i) {
        const T* xi = x.row(i);
        T* yi = y.row(i);
        T mean = T(0);
        for (std::size_t j = 0; j < width; ++j) mean += xi[j];
        mean /= T(width);
        T var = T(0);
        for (std::size_t j = 0; j < width; ++j) {
            const T d = xi[j] - mean;
            var += d * d;
        }
        var /= T(width);
        const T inv = T(1) / std::sqrt(var + eps);
        for (std::size_t j = 0; j < width; ++j) {
            yi[j] = gamma.data[j] * (xi[j] - mean) * inv + beta.data[j];
        }
    }
}

template <typename T>
void layernorm_backward(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& dy,
                        T eps, Tensor<T>& dx, Tensor<T>& dgamma, Tensor<T>& dbeta) {
    const std::size_t rows = x.dim(0), width = x.dim(1);
    for (std::size_t i = 0; i < rows; ++i) {
        const T* xi = x.row(i);
        const T* dyi = dy.row(i);
        T* dxi = dx.row(i);
        T mean = T(0);
        for (std::size_t j = 0; j < width; ++j) mean += xi[j];
        mean /= T(width);
        T var = T(0);
        for (std::size_t j = 0; j < width; ++j) {
            const T d = xi[j] - mean;
            var += d * d;
        }
        var /= T(width);
        const T inv = T(1) / std::sqrt(var + eps);

        T sum_dxhat = T(0);
        T sum_dxhat_xhat = T(0);
        for (std::size_t j = 0; j < width; ++j) {
            const T xhat = (xi[j] - mean) * inv;
            const T dxhat = dyi[j] * gamma.data[j];
            dgamma.data[j] += dyi[j] * xhat;
            dbeta.data[j] += dyi[j];
            sum_dxhat += dxhat;
            sum_dxhat_xhat += dxhat * xhat;
        }
        const T mean_dxhat = sum_dxhat / T(width);
        const T mean_dxhat_xhat = sum_dxhat_xhat / T(width);
        for (std::size_t j = 0; j < width; ++j) {
            const T xhat = (xi[j] - mean) * inv;
            const T dxhat = dyi[j] * gamma.data[j];
            dxi[j] = inv * (dxhat - mean_dxhat - xhat * mean_dxhat_xhat);
        }
    }
}

// Inverted dropout: mask holds 0 or 1/(1-p) and is multiplied in-place.
template <typename T>
void apply_dropout(Tensor<T>& x, Rng& rng, double p, Tensor<T>& mask_out) {
    mask_out = Tensor<T>(x.shape);
    const T scale = T(1.0 / (1.0 - p));
    for (std::size_t i = 0; i < x.size(); ++i) {
        const T m = rng.uniform01() >= p ? scale : T(0);
        mask_out.data[i] = m;
        x.data[i] *= m;
    }
}

// [T x dh] slice of head h out of a [T x H] tensor.
template <typename T>
void extract_head(const Tensor<T>& src, std::size_t head, std::size_t head_dim, Tensor<T>& dst) {
    const std::size_t rows = src.dim(0);
    for (std::size_t t = 0; t < rows; ++t) {
        const T* s = src.row(t) + head * head_dim;
        T* d = dst.row(t);
        for (std::size_t j = 0; j < head_dim; ++j) d[j] = s[j];
    }
}

template <typename T>
void scatter_head_add(const Tensor<T>& src, std::size_t head, std::size_t head_dim, Tensor<T>& dst) {
    const std::size_t rows = src.dim(0);
    for (std::size_t t = 0; t < rows; ++t) {
        const T* s = src.row(t);
        T* d = dst.row(t) + head * head_dim;
        for (std::size_t j = 0; j < head_dim; ++j) d[j] += s[j];
    }
}

}  // namespace detail

template <typename T>
struct LayerCache {
    Tensor<T> input;          // [T x H] actual operand of the Q/K/V projections
    Tensor<T> q, k, v;        // [T x H]
    Tensor<T> attn_probs;     // [A x T x T], post-softmax, pre-dropout
    Tensor<T> attn_prob_mask; // dropout masks, empty in eval mode
    Tensor<T> context;        // [T x H] heads concatenated (from dropped probs)
    Tensor<T> attn_out_mask;
    Tensor<T> attn_residual;  // [T x H] pre-layernorm sum
    Tensor<T> attn_normed;    // [T x H]
    Tensor<T> ffn_pre;        // [T x F]
    Tensor<T> ffn_act;        // [T x F]
    Tensor<T> ffn_out_mask;
    Tensor<T> ffn_residual;   // [T x H] pre-layernorm sum
    Tensor<T> output;         // [T x H]
};

template <typename T>
struct ExampleCache {
    std::vector<std::int32_t> ids;
    std::vector<std::uint8_t> mask;
    Tensor<T> emb_sum;        // [T x H] pre-layernorm embedding sum
    Tensor<T> emb_drop_mask;
    std::vector<LayerCache<T>> layers;
    Tensor<T> pooled;         // [H] tanh output
};

// Per-layer activations needed for the analytic backward pass.
template <typename T>
struct ForwardCache {
    ModelConfig config;
    std::size_t batch = 0;
    std::size_t seq_len = 0;
    bool train_mode = false;
    std::vector<ExampleCache<T>> examples;
    Tensor<T> logits;  // [B x n_labels]
};

namespace detail {

template <typename T>
void forward_one(const ParameterStore<T>& params, const TokenizedExample& example,
                 bool train_mode, std::uint64_t example_seed, ExampleCache<T>& cache,
                 T* logits_row) {
    const ModelConfig& cfg = params.config;
    const std::size_t seq = example.token_ids.size();
    const auto H = static_cast<std::size_t>(cfg.hidden);
    const auto A = static_cast<std::size_t>(cfg.n_heads);
    const std::size_t dh = H / A;
    const auto F = static_cast<std::size_t>(cfg.ffn_dim);
    const T eps = static_cast<T>(cfg.layernorm_eps);
    const bool dropping = train_mode && cfg.dropout > 0.0;
    Rng rng(example_seed);

    cache.ids = example.token_ids;
    cache.mask = example.attention_mask;

    // embeddings: token + position + segment (all segment 0), then layernorm
    cache.emb_sum = Tensor<T>({seq, H});
    for (std::size_t t = 0; t < seq; ++t) {
        const auto id = static_cast<std::size_t>(example.token_ids[t]);
        const T* tok = params.token_embedding.row(id);
        const T* pos = params.position_embedding.row(t);
        const T* seg = params.segment_embedding.row(0);
        T* e = cache.emb_sum.row(t);
        for (std::size_t j = 0; j < H; ++j) e[j] = tok[j] + pos[j] + seg[j];
    }
    Tensor<T> x({seq, H});
    layernorm_forward(cache.emb_sum, params.emb_ln_gamma, params.emb_ln_beta, eps, x);
    if (dropping) apply_dropout(x, rng, cfg.dropout, cache.emb_drop_mask);

    cache.layers.resize(static_cast<std::size_t>(cfg.n_layers));
    Tensor<T> qh({seq, dh}), kh({seq, dh}), vh({seq, dh});
    Tensor<T> scores({seq, seq}), ctx_h({seq, dh});

    for (int li = 0; li < cfg.n_layers; ++li) {
        const LayerParams<T>& layer = params.layers[static_cast<std::size_t>(li)];
        LayerCache<T>& lc = cache.layers[static_cast<std::size_t>(li)];
        lc.input = x;

        lc.q = Tensor<T>({seq, H});
        lc.k = Tensor<T>({seq, H});
        lc.v = Tensor<T>({seq, H});
        linear_forward(lc.input, layer.query_w, layer.query_b, lc.q);
        linear_forward(lc.input, layer.key_w, layer.key_b, lc.k);
        linear_forward(lc.input, layer.value_w, layer.value_b, lc.v);

        lc.attn_probs = Tensor<T>({A, seq, seq});
        lc.context = Tensor<T>({seq, H});
        if (dropping) lc.attn_prob_mask = Tensor<T>({A, seq, seq});
        const T scale = T(1) / std::sqrt(static_cast<T>(dh));
        for (std::size_t h = 0; h < A; ++h) {
            extract_head(lc.q, h, dh, qh);
            extract_head(lc.k, h, dh, kh);
            extract_head(lc.v, h, dh, vh);
            gemm_nt(qh.data.data(), kh.data.data(), scores.data.data(), seq, seq, dh);
            T* probs = lc.attn_probs.data.data() + h * seq * seq;
            for (std::size_t i = 0; i < seq; ++i) {
                T* srow = scores.row(i);
                T maxv = std::numeric_limits<T>::lowest();
                for (std::size_t j = 0; j < seq; ++j) {
                    srow[j] = srow[j] * scale +
                              (example.attention_mask[j] ? T(0) : static_cast<T>(kMaskPenalty));
                    if (srow[j] > maxv) maxv = srow[j];
                }
                T denom = T(0);
                T* prow = probs + i * seq;
                for (std::size_t j = 0; j < seq; ++j) {
                    prow[j] = std::exp(srow[j] - maxv);
                    denom += prow[j];
                }
                for (std::size_t j = 0; j < seq; ++j) prow[j] /= denom;
            }
            // context from (possibly dropped) probabilities
            Tensor<T> probs_used({seq, seq});
            std::copy(probs, probs + seq * seq, probs_used.data.begin());
            if (dropping) {
                T* pmask = lc.attn_prob_mask.data.data() + h * seq * seq;
                const T dscale = T(1.0 / (1.0 - cfg.dropout));
                for (std::size_t i = 0; i < seq * seq; ++i) {
                    const T m = rng.uniform01() >= cfg.dropout ? dscale : T(0);
                    pmask[i] = m;
                    probs_used.data[i] *= m;
                }
            }
            gemm_nn(probs_used.data.data(), vh.data.data(), ctx_h.data.data(), seq, dh, seq);
            for (std::size_t t = 0; t < seq; ++t) {
                const T* s = ctx_h.row(t);
                T* d = lc.context.row(t) + h * dh;
                for (std::size_t j = 0; j < dh; ++j) d[j] = s[j];
            }
        }

        Tensor<T> attn_out({seq, H});
        linear_forward(lc.context, layer.attn_out_w, layer.attn_out_b, attn_out);
        if (dropping) apply_dropout(attn_out, rng, cfg.dropout, lc.attn_out_mask);

        lc.attn_residual = Tensor<T>({seq, H});
        for (std::size_t i = 0; i < seq * H; ++i) {
            lc.attn_residual.data[i] = lc.input.data[i] + attn_out.data[i];
        }
        lc.attn_normed = Tensor<T>({seq, H});
        layernorm_forward(lc.attn_residual, layer.attn_ln_gamma, layer.attn_ln_beta, eps,
                          lc.attn_normed);

        lc.ffn_pre = Tensor<T>({seq, F});
        linear_forward(lc.attn_normed, layer.ffn_in_w, layer.ffn_in_b, lc.ffn_pre);
        lc.ffn_act = Tensor<T>({seq, F});
        for (std::size_t i = 0; i < seq * F; ++i) lc.ffn_act.data[i] = gelu(lc.ffn_pre.data[i]);

        Tensor<T> ffn_out({seq, H});
        linear_forward(lc.ffn_act, layer.ffn_out_w, layer.ffn_out_b, ffn_out);
        if (dropping) apply_dropout(ffn_out, rng, cfg.dropout, lc.ffn_out_mask);

        lc.ffn_residual = Tensor<T>({seq, H});
        for (std::size_t i = 0; i < seq * H; ++i) {
            lc.ffn_residual.data[i] = lc.attn_normed.data[i] + ffn_out.data[i];
        }
        lc.output = Tensor<T>({seq, H});
        layernorm_forward(lc.ffn_residual, layer.ffn_ln_gamma, layer.ffn_ln_beta, eps, lc.output);
        x = lc.output;
    }

    // pooler: tanh(affine of the first-position state)
    cache.pooled = Tensor<T>({H});
    const T* h0 = x.row(0);
    for (std::size_t i = 0; i < H; ++i) {
        const T* w = params.pooler_w.row(i);
        T acc = params.pooler_b.data[i];
        for (std::size_t j = 0; j < H; ++j) acc += w[j] * h0[j];
        cache.pooled.data[i] = std::tanh(acc);
    }

    const auto C = static_cast<std::size_t>(params.config.n_labels);
    for (std::size_t c = 0; c < C; ++c) {
        const T* w = params.classifier_w.row(c);
        T acc = params.classifier_b.data[c];
        for (std::size_t j = 0; j < H; ++j) acc += w[j] * cache.pooled.data[j];
        logits_row[c] = acc;
    }
}

}  // namespace detail

// Batch forward pass. Dropout draws only in train_mode, seeded per example so
// the result is independent of evaluation order.
template <typename T>
std::pair<Tensor<T>, ForwardCache<T>> forward(const ParameterStore<T>& params,
                                              const std::vector<TokenizedExample>& batch,
                                              bool train_mode, std::uint64_t seed) {
    const ModelConfig& cfg = params.config;
    if (batch.empty()) throw ShapeError("empty batch");
    const std::size_t seq = batch[0].token_ids.size();
    if (seq == 0 || seq > static_cast<std::size_t>(cfg.max_positions)) {
        throw ShapeError("sequence length " + std::to_string(seq) + " exceeds max_positions " +
                         std::to_string(cfg.max_positions));
    }
    for (const TokenizedExample& ex : batch) {
        if (ex.token_ids.size() != seq || ex.attention_mask.size() != seq) {
            throw ShapeError("examples in a batch must share max_seq_length");
        }
        for (std::int32_t id : ex.token_ids) {
            if (id < 0 || id >= cfg.vocab_size) {
                throw VocabRangeError("token id " + std::to_string(id) + " outside vocab of size " +
                                      std::to_string(cfg.vocab_size));
            }
        }
    }

    ForwardCache<T> cache;
    cache.config = cfg;
    cache.batch = batch.size();
    cache.seq_len = seq;
    cache.train_mode = train_mode;
    cache.examples.resize(batch.size());
    cache.logits = Tensor<T>({batch.size(), static_cast<std::size_t>(cfg.n_labels)});

    const std::uint64_t base = mix_seed(seed, 0xD0);
    for (std::size_t b = 0; b < batch.size(); ++b) {
        detail::forward_one(params, batch[b], train_mode, mix_seed(base, b), cache.examples[b],
                            cache.logits.row(b));
    }
    return {cache.logits, std::move(cache)};
}

// Analytic gradients of every trainable tensor, accumulated over the batch in
// example-index order. d_logits has the same shape as the forward logits.
template <typename T>
ParameterStore<T> backward(const ParameterStore<T>& params, const ForwardCache<T>& cache,
                           const Tensor<T>& d_logits) {
    const ModelConfig& cfg = params.config;
    if (!(cache.config == cfg)) throw CacheError("cache was produced under a different config");
    if (cache.examples.size() != cache.batch || cache.logits.dim(0) != cache.batch) {
        throw CacheError("cache is incomplete");
    }
    if (d_logits.rank() != 2 || d_logits.dim(0) != cache.batch ||
        d_logits.dim(1) != static_cast<std::size_t>(cfg.n_labels)) {
        throw ShapeError("d_logits shape does not match cached logits");
    }

    const std::size_t seq = cache.seq_len;
    const auto H = static_cast<std::size_t>(cfg.hidden);
    const auto A = static_cast<std::size_t>(cfg.n_heads);
    const std::size_t dh = H / A;
    const T eps = static_cast<T>(cfg.layernorm_eps);
    const auto C = static_cast<std::size_t>(cfg.n_labels);
    const bool dropping = cache.train_mode && cfg.dropout > 0.0;

    ParameterStore<T> grads = zeros_like<T>(cfg);

    Tensor<T> qh({seq, dh}), kh({seq, dh}), vh({seq, dh});
    Tensor<T> dqh({seq, dh}), dkh({seq, dh}), dvh({seq, dh}), dctx_h({seq, dh});
    Tensor<T> dprobs({seq, seq}), dscores({seq, seq}), probs_used({seq, seq});

    for (std::size_t b = 0; b < cache.batch; ++b) {
        const ExampleCache<T>& ex = cache.examples[b];
        const T* dlog = d_logits.row(b);

        // classifier
        Tensor<T> dpooled({H});
        for (std::size_t c = 0; c < C; ++c) {
            const T g = dlog[c];
            const T* w = params.classifier_w.row(c);
            T* dw = grads.classifier_w.row(c);
            for (std::size_t j = 0; j < H; ++j) {
                dw[j] += g * ex.pooled.data[j];
                dpooled.data[j] += g * w[j];
            }
            grads.classifier_b.data[c] += g;
        }

        // pooler (tanh') back to the first position of the final hidden states
        const Tensor<T>& final_x = ex.layers.back().output;
        const T* h0 = final_x.row(0);
        Tensor<T> dx({seq, H});
        for (std::size_t i = 0; i < H; ++i) {
            const T dz = dpooled.data[i] * (T(1) - ex.pooled.data[i] * ex.pooled.data[i]);
            const T* w = params.pooler_w.row(i);
            T* dw = grads.pooler_w.row(i);
            for (std::size_t j = 0; j < H; ++j) {
                dw[j] += dz * h0[j];
                dx.row(0)[j] += dz * w[j];
            }
            grads.pooler_b.data[i] += dz;
        }

        for (int li = cfg.n_layers - 1; li >= 0; --li) {
            const LayerParams<T>& layer = params.layers[static_cast<std::size_t>(li)];
            LayerParams<T>& dlayer = grads.layers[static_cast<std::size_t>(li)];
            const LayerCache<T>& lc = ex.layers[static_cast<std::size_t>(li)];

            // ffn layernorm
            Tensor<T> d_res2({seq, H});
            detail::layernorm_backward(lc.ffn_residual, layer.ffn_ln_gamma, dx, eps, d_res2,
                                       dlayer.ffn_ln_gamma, dlayer.ffn_ln_beta);
            Tensor<T> d_x1 = d_res2;  // residual branch
            Tensor<T> d_ffn_out = d_res2;
            if (dropping) {
                for (std::size_t i = 0; i < seq * H; ++i) {
                    d_ffn_out.data[i] *= lc.ffn_out_mask.data[i];
                }
            }

            // ffn output linear
            Tensor<T> d_act({seq, static_cast<std::size_t>(cfg.ffn_dim)});
            linear_backward(lc.ffn_act, layer.ffn_out_w, d_ffn_out, d_act, dlayer.ffn_out_w,
                            dlayer.ffn_out_b);
            for (std::size_t i = 0; i < d_act.size(); ++i) {
                d_act.data[i] *= detail::gelu_grad(lc.ffn_pre.data[i]);
            }
            Tensor<T> d_x1_ffn({seq, H});
            linear_backward(lc.attn_normed, layer.ffn_in_w, d_act, d_x1_ffn, dlayer.ffn_in_w,
                            dlayer.ffn_in_b);
            for (std::size_t i = 0; i < seq * H; ++i) d_x1.data[i] += d_x1_ffn.data[i];

            // attention layernorm
            Tensor<T> d_res1({seq, H});
            detail::layernorm_backward(lc.attn_residual, layer.attn_ln_gamma, d_x1, eps, d_res1,
                                       dlayer.attn_ln_gamma, dlayer.attn_ln_beta);
            Tensor<T> d_input = d_res1;  // residual branch
            Tensor<T> d_attn_out = d_res1;
            if (dropping) {
                for (std::size_t i = 0; i < seq * H; ++i) {
                    d_attn_out.data[i] *= lc.attn_out_mask.data[i];
                }
            }

            // attention output linear
            Tensor<T> d_context({seq, H});
            linear_backward(lc.context, layer.attn_out_w, d_attn_out, d_context,
                            dlayer.attn_out_w, dlayer.attn_out_b);

            Tensor<T> dq({seq, H}), dk({seq, H}), dv({seq, H});
            const T scale = T(1) / std::sqrt(static_cast<T>(dh));
            for (std::size_t h = 0; h < A; ++h) {
                detail::extract_head(lc.q, h, dh, qh);
                detail::extract_head(lc.k, h, dh, kh);
                detail::extract_head(lc.v, h, dh, vh);
                detail::extract_head(d_context, h, dh, dctx_h);

                const T* probs = lc.attn_probs.data.data() + h * seq * seq;
                std::copy(probs, probs + seq * seq, probs_used.data.begin());
                if (dropping) {
                    const T* pmask = lc.attn_prob_mask.data.data() + h * seq * seq;
                    for (std::size_t i = 0; i < seq * seq; ++i) probs_used.data[i] *= pmask[i];
                }

                // context = probs_used * V
                detail::gemm_nt(dctx_h.data.data(), vh.data.data(), dprobs.data.data(), seq, seq,
                                dh);
                dvh.fill(T(0));
                detail::gemm_tn_acc(probs_used.data.data(), dctx_h.data.data(), dvh.data.data(),
                                    seq, dh, seq);
                if (dropping) {
                    const T* pmask = lc.attn_prob_mask.data.data() + h * seq * seq;
                    for (std::size_t i = 0; i < seq * seq; ++i) dprobs.data[i] *= pmask[i];
                }
                // softmax backward, rowwise on the pre-dropout probabilities
                for (std::size_t i = 0; i < seq; ++i) {
                    const T* prow = probs + i * seq;
                    const T* dprow = dprobs.row(i);
                    T dot = T(0);
                    for (std::size_t j = 0; j < seq; ++j) dot += prow[j] * dprow[j];
                    T* dsrow = dscores.row(i);
                    for (std::size_t j = 0; j < seq; ++j) {
                        dsrow[j] = prow[j] * (dprow[j] - dot) * scale;
                    }
                }
                detail::gemm_nn(dscores.data.data(), kh.data.data(), dqh.data.data(), seq, dh,
                                seq);
                dkh.fill(T(0));
                detail::gemm_tn_acc(dscores.data.data(), qh.data.data(), dkh.data.data(), seq, dh,
                                    seq);

                detail::scatter_head_add(dqh, h, dh, dq);
                detail::scatter_head_add(dkh, h, dh, dk);
                detail::scatter_head_add(dvh, h, dh, dv);
            }

            Tensor<T> d_in_tmp({seq, H});
            linear_backward(lc.input, layer.query_w, dq, d_in_tmp, dlayer.query_w, dlayer.query_b);
            for (std::size_t i = 0; i < seq * H; ++i) d_input.data[i] += d_in_tmp.data[i];
            linear_backward(lc.input, layer.key_w, dk, d_in_tmp, dlayer.key_w, dlayer.key_b);
            for (std::size_t i = 0; i < seq * H; ++i) d_input.data[i] += d_in_tmp.data[i];
            linear_backward(lc.input, layer.value_w, dv, d_in_tmp, dlayer.value_w, dlayer.value_b);
            for (std::size_t i = 0; i < seq * H; ++i) d_input.data[i] += d_in_tmp.data[i];

            dx = std::move(d_input);
        }

        // embedding dropout, layernorm, and lookups
        if (dropping) {
            for (std::size_t i = 0; i < seq * H; ++i) dx.data[i] *= ex.emb_drop_mask.data[i];
        }
        Tensor<T> d_emb({seq, H});
        detail::layernorm_backward(ex.emb_sum, params.emb_ln_gamma, dx, eps, d_emb,
                                   grads.emb_ln_gamma, grads.emb_ln_beta);
        for (std::size_t t = 0; t < seq; ++t) {
            const auto id = static_cast<std::size_t>(ex.ids[t]);
            const T* src = d_emb.row(t);
            T* dtok = grads.token_embedding.row(id);
            T* dpos = grads.position_embedding.row(t);
            T* dseg = grads.segment_embedding.row(0);
            for (std::size_t j = 0; j < H; ++j) {
                dtok[j] += src[j];
                dpos[j] += src[j];
                dseg[j] += src[j];
            }
        }
    }
    return grads;
}

}  // namespace patclass
