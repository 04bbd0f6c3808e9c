#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <string>
#include <vector>

#include "patclass/errors.hpp"

namespace patclass {

// Dense row-major tensor. Rank 1..3 is all the encoder needs.
template <typename T>
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<std::size_t> dims) : shape(std::move(dims)) {
        data.assign(count(shape), T(0));
    }

    Tensor(std::initializer_list<std::size_t> dims)
        : Tensor(std::vector<std::size_t>(dims)) {}

    static std::size_t count(const std::vector<std::size_t>& dims) {
        std::size_t n = 1;
        for (std::size_t d : dims) n *= d;
        return n;
    }

    std::size_t size() const { return data.size(); }
    std::size_t rank() const { return shape.size(); }
    std::size_t dim(std::size_t i) const { return shape[i]; }
    bool empty() const { return data.empty(); }

    T& operator[](std::size_t i) { return data[i]; }
    const T& operator[](std::size_t i) const { return data[i]; }

    T& at(std::size_t i, std::size_t j) { return data[i * shape[1] + j]; }
    const T& at(std::size_t i, std::size_t j) const { return data[i * shape[1] + j]; }

    // Pointer to row i of a rank-2 tensor (or plane element for rank 3 via offset).
    T* row(std::size_t i) { return data.data() + i * shape[1]; }
    const T* row(std::size_t i) const { return data.data() + i * shape[1]; }

    void fill(T v) { std::fill(data.begin(), data.end(), v); }

    bool all_finite() const {
        for (const T& v : data) {
            if (!std::isfinite(static_cast<double>(v))) return false;
        }
        return true;
    }

    std::vector<std::size_t> shape;
    std::vector<T> data;
};

template <typename To, typename From>
Tensor<To> tensor_cast(const Tensor<From>& t) {
    Tensor<To> out(t.shape);
    for (std::size_t i = 0; i < t.size(); ++i) out.data[i] = static_cast<To>(t.data[i]);
    return out;
}

namespace detail {

// C[m x n] = A[m x k] * B[n x k]^T. Both operands are read along contiguous rows.
template <typename T>
void gemm_nt(const T* a, const T* b, T* c, std::size_t m, std::size_t n, std::size_t k) {
    for (std::size_t i = 0; i < m; ++i) {
        const T* ai = a + i * k;
        T* ci = c + i * n;
        for (std::size_t j = 0; j < n; ++j) {
            const T* bj = b + j * k;
            T acc = T(0);
            for (std::size_t p = 0; p < k; ++p) acc += ai[p] * bj[p];
            ci[j] = acc;
        }
    }
}

// C[m x n] = A[m x k] * B[k x n].
template <typename T>
void gemm_nn(const T* a, const T* b, T* c, std::size_t m, std::size_t n, std::size_t k) {
    for (std::size_t i = 0; i < m; ++i) {
        T* ci = c + i * n;
        for (std::size_t j = 0; j < n; ++j) ci[j] = T(0);
        const T* ai = a + i * k;
        for (std::size_t p = 0; p < k; ++p) {
            const T av = ai[p];
            const T* bp = b + p * n;
            for (std::size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
        }
    }
}

// C[m x n] += A[p x m]^T * B[p x n].
template <typename T>
void gemm_tn_acc(const T* a, const T* b, T* c, std::size_t m, std::size_t n, std::size_t p) {
    for (std::size_t t = 0; t < p; ++t) {
        const T* at = a + t * m;
        const T* bt = b + t * n;
        for (std::size_t i = 0; i < m; ++i) {
            const T av = at[i];
            T* ci = c + i * n;
            for (std::size_t j = 0; j < n; ++j) ci[j] += av * bt[j];
        }
    }
}

}  // namespace detail

// Y[rows x out] = X[rows x in] * W[out x in]^T + b.
template <typename T>
void linear_forward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b, Tensor<T>& y) {
    const std::size_t rows = x.dim(0), in = x.dim(1), out = w.dim(0);
    detail::gemm_nt(x.data.data(), w.data.data(), y.data.data(), rows, out, in);
    for (std::size_t i = 0; i < rows; ++i) {
        T* yi = y.row(i);
        for (std::size_t j = 0; j < out; ++j) yi[j] += b.data[j];
    }
}

// Given dY, accumulates dW += dY^T X and db += column sums of dY; writes dX = dY W.
template <typename T>
void linear_backward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& dy,
                     Tensor<T>& dx, Tensor<T>& dw, Tensor<T>& db) {
    const std::size_t rows = x.dim(0), in = x.dim(1), out = w.dim(0);
    detail::gemm_nn(dy.data.data(), w.data.data(), dx.data.data(), rows, in, out);
    detail::gemm_tn_acc(dy.data.data(), x.data.data(), dw.data.data(), out, in, rows);
    for (std::size_t i = 0; i < rows; ++i) {
        const T* dyi = dy.row(i);
        for (std::size_t j = 0; j < out; ++j) db.data[j] += dyi[j];
    }
}

}  // namespace patclass
