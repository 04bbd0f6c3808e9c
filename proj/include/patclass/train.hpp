#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "patclass/encoder.hpp"
#include "patclass/ingest.hpp"
#include "patclass/loss.hpp"
#include "patclass/optimizer.hpp"
#include "patclass/rng.hpp"
#include "patclass/tokenizer.hpp"

namespace patclass {

struct StepRecord {
    std::uint64_t step = 0;  // 1-based
    double lr = 0.0;
    double loss = 0.0;
};

template <typename T>
struct TrainOutput {
    ParameterStore<T> params;
    std::vector<StepRecord> log;
};

// Optional observer invoked after each epoch with the 1-based epoch number and
// the parameters as of that point (for checkpointing).
template <typename T>
using EpochCallback = std::function<void(int epoch, const ParameterStore<T>&)>;

// Deterministic fine-tuning loop: epochs x ceil(N/batch_size) steps over a
// freshly shuffled order per epoch, linear warmup/decay schedule, Adam
// updates. Everything — shuffling, dropout, initialization — derives from
// train_cfg.seed, so a rerun is bit-identical.
template <typename T>
TrainOutput<T> train(const ModelConfig& model_cfg, const TrainConfig& train_cfg,
                     const std::vector<LabeledExample>& dataset, const Vocabulary& vocab,
                     const LabelVocabulary& label_vocab, int max_seq_length = 128,
                     const ParameterStore<T>* initial_params = nullptr,
                     const EpochCallback<T>& on_epoch = {}) {
    model_cfg.validate();
    train_cfg.validate();
    if (dataset.empty()) throw DataError("training dataset is empty");
    if (static_cast<std::size_t>(model_cfg.n_labels) != label_vocab.size()) {
        throw ShapeError("model has " + std::to_string(model_cfg.n_labels) +
                         " labels but the vocabulary has " + std::to_string(label_vocab.size()));
    }
    if (max_seq_length > model_cfg.max_positions) {
        throw ConfigError("max_seq_length exceeds the model's max_positions");
    }
    if (initial_params && !(initial_params->config == model_cfg)) {
        throw ShapeError("initial parameters disagree with the model config");
    }

    // Tokenize and encode targets once, up front.
    const std::size_t n = dataset.size();
    std::vector<TokenizedExample> tokens;
    tokens.reserve(n);
    std::vector<std::vector<std::uint8_t>> targets;
    targets.reserve(n);
    for (const LabeledExample& ex : dataset) {
        tokens.push_back(encode(ex.text, static_cast<std::size_t>(max_seq_length), vocab));
        targets.push_back(encode_labels(ex.labels, label_vocab));
    }

    TrainOutput<T> out{initial_params ? *initial_params
                                      : init_params<T>(model_cfg, train_cfg.seed),
                       {}};
    AdamState<T> state(model_cfg);

    const std::size_t batch_size = static_cast<std::size_t>(train_cfg.batch_size);
    const std::size_t steps_per_epoch = (n + batch_size - 1) / batch_size;
    const std::uint64_t total_steps =
        static_cast<std::uint64_t>(train_cfg.epochs) * steps_per_epoch;
    const std::uint64_t shuffle_base = mix_seed(train_cfg.seed, 0x5AFE);
    const std::uint64_t dropout_base = mix_seed(train_cfg.seed, 0xD1CE);
    const auto n_labels = static_cast<std::size_t>(model_cfg.n_labels);

    std::vector<std::size_t> order(n);
    std::uint64_t step = 0;  // 0-based position of the upcoming update
    for (int epoch = 0; epoch < train_cfg.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        Rng shuffle_rng(mix_seed(shuffle_base, static_cast<std::uint64_t>(epoch)));
        shuffle_rng.shuffle(order);

        for (std::size_t begin = 0; begin < n; begin += batch_size, ++step) {
            const std::size_t b = std::min(batch_size, n - begin);
            std::vector<TokenizedExample> batch(b);
            Tensor<T> target_mat({b, n_labels});
            for (std::size_t i = 0; i < b; ++i) {
                const std::size_t src = order[begin + i];
                batch[i] = tokens[src];
                for (std::size_t c = 0; c < n_labels; ++c) {
                    target_mat.at(i, c) = static_cast<T>(targets[src][c]);
                }
            }

            auto [logits, cache] = forward(out.params, batch, /*train_mode=*/true,
                                           mix_seed(dropout_base, step));
            const LossResult<T> loss = bce_with_logits(logits, target_mat, train_cfg.reduction);
            const double lr_t = lr_schedule(step, total_steps, train_cfg);
            try {
                if (!std::isfinite(static_cast<double>(loss.loss))) {
                    throw NumericsError("loss is not finite");
                }
                ParameterStore<T> grads = backward(out.params, cache, loss.d_logits);
                adam_step(out.params, grads, state, lr_t, train_cfg);
            } catch (const NumericsError& e) {
                throw NumericsError("step " + std::to_string(step + 1) + ": " + error_body(e));
            }
            out.log.push_back({step + 1, lr_t, static_cast<double>(loss.loss)});
        }
        if (on_epoch) on_epoch(epoch + 1, out.params);
    }
    return out;
}

}  // namespace patclass
