#include "cnmt/optim.hpp"

#include <cmath>

namespace cnmt {

template <typename T>
void adam_step(const std::vector<Tensor<T>*>& params, AdamState<T>& state) {
    if (state.first_moment.empty()) {
        for (const auto* p : params) {
            state.first_moment.emplace_back(p->size(), T(0));
            state.second_moment.emplace_back(p->size(), T(0));
        }
    }
    if (state.first_moment.size() != params.size()) {
        throw DimensionError("adam_step: state tracks " + std::to_string(state.first_moment.size()) +
                             " parameters, given " + std::to_string(params.size()));
    }
    ++state.step;
    const auto& cfg = state.config;
    const double correction1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
    const double correction2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
    const T b1 = static_cast<T>(cfg.beta1);
    const T b2 = static_cast<T>(cfg.beta2);

    for (std::size_t k = 0; k < params.size(); ++k) {
        Tensor<T>& p = *params[k];
        auto& m = state.first_moment[k];
        auto& v = state.second_moment[k];
        if (m.size() != p.size()) {
            throw DimensionError("adam_step: moment size mismatch for parameter " + std::to_string(k) + " " +
                                 shape_to_string(p.shape()));
        }
        auto data = p.data();
        auto grad = p.grad();
        for (std::size_t i = 0; i < data.size(); ++i) {
            const T g = grad[i];
            m[i] = b1 * m[i] + (T(1) - b1) * g;
            v[i] = b2 * v[i] + (T(1) - b2) * g * g;
            const double m_hat = static_cast<double>(m[i]) / correction1;
            const double v_hat = static_cast<double>(v[i]) / correction2;
            data[i] -= static_cast<T>(cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.eps));
        }
    }
}

template <typename T>
double clip_grad_norm(const std::vector<Tensor<T>*>& params, double max_norm) {
    double sq = 0.0;
    for (const auto* p : params) {
        for (T g : p->grad()) sq += static_cast<double>(g) * static_cast<double>(g);
    }
    const double norm = std::sqrt(sq);
    if (norm > max_norm && norm > 0.0) {
        const T scale = static_cast<T>(max_norm / norm);
        for (auto* p : params) {
            for (T& g : p->grad()) g *= scale;
        }
    }
    return norm;
}

template void adam_step(const std::vector<Tensor<float>*>&, AdamState<float>&);
template void adam_step(const std::vector<Tensor<double>*>&, AdamState<double>&);
template double clip_grad_norm(const std::vector<Tensor<float>*>&, double);
template double clip_grad_norm(const std::vector<Tensor<double>*>&, double);

}  // namespace cnmt
