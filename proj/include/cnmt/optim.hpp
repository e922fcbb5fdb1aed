#pragma once

#include <cstdint>
#include <vector>

#include "cnmt/tensor.hpp"

namespace cnmt {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Moment accumulators are matched to parameters by position, so the same
/// parameter list (in the same order) must be passed on every step.
template <typename T>
struct AdamState {
    AdamConfig config;
    std::int64_t step = 0;
    std::vector<typename Tensor<T>::Storage> first_moment;
    std::vector<typename Tensor<T>::Storage> second_moment;
};

/// One bias-corrected Adam update using each parameter's gradient buffer.
template <typename T>
void adam_step(const std::vector<Tensor<T>*>& params, AdamState<T>& state);

/// Rescales all gradients so their joint L2 norm is at most max_norm.
/// Returns the norm measured before clipping.
template <typename T>
double clip_grad_norm(const std::vector<Tensor<T>*>& params, double max_norm);

}  // namespace cnmt
