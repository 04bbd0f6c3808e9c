#pragma once

#include <algorithm>
#include <cmath>
#include <string>

#include "patclass/errors.hpp"
#include "patclass/tensor.hpp"

namespace patclass {

// How the per-element losses are reduced to the scalar objective. mean_elements
// keeps base_lr insensitive to the size of the label space.
enum class LossReduction { mean_elements, sum_labels_mean_batch };

inline std::string to_string(LossReduction r) {
    return r == LossReduction::mean_elements ? "mean_elements" : "sum_labels_mean_batch";
}

inline LossReduction loss_reduction_from_string(const std::string& s) {
    if (s == "mean_elements") return LossReduction::mean_elements;
    if (s == "sum_labels_mean_batch") return LossReduction::sum_labels_mean_batch;
    throw ConfigError("unknown loss reduction: " + s);
}

template <typename T>
T stable_sigmoid(T x) {
    if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
    const T e = std::exp(x);
    return e / (T(1) + e);
}

template <typename T>
struct LossResult {
    T loss;
    Tensor<T> d_logits;
};

// Numerically stable sigmoid cross entropy over a multi-hot target matrix:
// per element, max(x,0) - x*z + log(1+exp(-|x|)), which never overflows for
// finite x. d_logits carries the reduction's normalization.
template <typename T>
LossResult<T> bce_with_logits(const Tensor<T>& logits, const Tensor<T>& targets,
                              LossReduction reduction = LossReduction::mean_elements) {
    if (logits.rank() != 2 || targets.rank() != 2 || logits.shape != targets.shape) {
        throw ShapeError("logits and targets must share a [batch x labels] shape");
    }
    const std::size_t batch = logits.dim(0);
    const std::size_t labels = logits.dim(1);

    LossResult<T> result;
    result.d_logits = Tensor<T>({batch, labels});
    const T denom = reduction == LossReduction::mean_elements
                        ? static_cast<T>(batch * labels)
                        : static_cast<T>(batch);

    T total = T(0);
    for (std::size_t i = 0; i < logits.size(); ++i) {
        const T x = logits.data[i];
        const T z = targets.data[i];
        if (z != T(0) && z != T(1)) {
            throw TargetError("targets must be exactly 0 or 1");
        }
        total += std::max(x, T(0)) - x * z + std::log1p(std::exp(-std::abs(x)));
        result.d_logits.data[i] = (stable_sigmoid(x) - z) / denom;
    }
    result.loss = total / denom;
    return result;
}

}  // namespace patclass
