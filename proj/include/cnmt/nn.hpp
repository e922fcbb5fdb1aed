#pragma once

#include <span>
#include <utility>

#include "cnmt/tensor.hpp"
#include "cnmt/types.hpp"

// Differentiable building blocks. Every backward routine *accumulates* into
// gradient buffers, so callers zero them once per optimizer step.
namespace cnmt::nn {

template <typename T>
T sigmoid(T x) {
    if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
    T e = std::exp(x);
    return e / (T(1) + e);
}

/// log(1 + exp(x)) without overflow.
template <typename T>
T softplus(T x) {
    return std::max(x, T(0)) + std::log1p(std::exp(-std::abs(x)));
}

/// In-place numerically stable softmax over the whole vector.
template <typename T>
void softmax_inplace(Eigen::Ref<Vector<T>> v) {
    const T top = v.maxCoeff();
    v = (v.array() - top).exp();
    v /= v.sum();
}

// ---------------------------------------------------------------- linear

/// out[b,o] = sum_i x[b,i] W[o,i] + b[o]; x is [B x I], W is [O x I], b is [O].
template <typename T>
Tensor<T> linear_forward(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias);

/// Accumulates dL/dx, dL/dW, dL/db into whichever of the three carry a
/// gradient buffer.
template <typename T>
void linear_backward(Tensor<T>& x, Tensor<T>& weight, Tensor<T>& bias, const Tensor<T>& dout);

// ------------------------------------------------------------- embedding

/// Rows of `table` [V x E] selected by ids, as [n x E].
template <typename T>
Tensor<T> embedding_forward(const Tensor<T>& table, std::span<const TokenId> ids);

template <typename T>
void embedding_backward(Tensor<T>& table, std::span<const TokenId> ids, const Tensor<T>& dout);

// ------------------------------------------------------------------ LSTM

/// Gate rows are stacked in the fixed order (input, forget, cell candidate,
/// output); checkpoints depend on this order.
template <typename T>
struct LstmParams {
    Tensor<T> w_ih;  // [4H x I]
    Tensor<T> w_hh;  // [4H x H]
    Tensor<T> bias;  // [4H]

    static LstmParams zeros(std::size_t input_size, std::size_t hidden_size);

    std::size_t input_size() const { return w_ih.cols(); }
    std::size_t hidden_size() const { return w_hh.cols(); }
    void validate() const;
};

/// Everything a backward pass needs from one forward step.
template <typename T>
struct LstmStep {
    Vector<T> x, h_prev, c_prev;
    Vector<T> gates;  // post-activation i, f, g, o stacked like the weights
    Vector<T> c, tanh_c, h;
};

template <typename T>
void lstm_forward(const LstmParams<T>& p, const Vector<T>& x,
                  const Vector<T>& h_prev, const Vector<T>& c_prev,
                  LstmStep<T>& out);

/// dh and dc are the gradients flowing into h_t and c_t. Writes the
/// gradients for h_prev and c_prev, adds dL/dx into *dx when non-null, and
/// accumulates parameter gradients.
template <typename T>
void lstm_backward(LstmParams<T>& p, const LstmStep<T>& step, const Vector<T>& dh, const Vector<T>& dc,
                   Vector<T>* dx, Vector<T>& dh_prev, Vector<T>& dc_prev);

/// Tensor-level single step: returns (h_t, c_t).
template <typename T>
std::pair<Tensor<T>, Tensor<T>> lstm_cell_step(const Tensor<T>& x, const Tensor<T>& h_prev,
                                               const Tensor<T>& c_prev, const LstmParams<T>& p);

// ---------------------------------------------------------------- losses

/// Mean negative log-likelihood of `targets` under row-wise softmax of
/// `logits` [B x K], skipping rows whose target equals ignore_index. When
/// logits carries a gradient buffer, (softmax - onehot) / n_counted is added
/// to it.
template <typename T>
T softmax_cross_entropy(Tensor<T>& logits, std::span<const TokenId> targets, TokenId ignore_index);

/// Binary cross-entropy between sigmoid(x) and y, summed over the V columns
/// and averaged over the B rows. Adds (sigmoid(x) - y) / B to x's gradient
/// buffer when present.
template <typename T>
T bce_with_logits(Tensor<T>& x, const Tensor<T>& y);

}  // namespace cnmt::nn
