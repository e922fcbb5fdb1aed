#include "cnmt/nn.hpp"

#include <string>

namespace cnmt::nn {

namespace {

template <typename T>
void require_rank(const Tensor<T>& t, std::size_t rank, const char* what) {
    if (t.rank() != rank) {
        throw DimensionError(std::string(what) + " must have rank " + std::to_string(rank) + ", got shape " +
                             shape_to_string(t.shape()));
    }
}

}  // namespace

template <typename T>
Tensor<T> linear_forward(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias) {
    require_rank(x, 2, "linear input");
    require_rank(weight, 2, "linear weight");
    require_rank(bias, 1, "linear bias");
    if (x.cols() != weight.cols() || bias.size() != weight.rows()) {
        throw DimensionError("linear: input " + shape_to_string(x.shape()) + " incompatible with weight " +
                             shape_to_string(weight.shape()) + " and bias " + shape_to_string(bias.shape()));
    }
    Tensor<T> out({x.rows(), weight.rows()});
    out.mat().noalias() = x.mat() * weight.mat().transpose();
    out.mat().rowwise() += bias.vec().transpose();
    return out;
}

template <typename T>
void linear_backward(Tensor<T>& x, Tensor<T>& weight, Tensor<T>& bias, const Tensor<T>& dout) {
    require_same_shape(dout.shape(), Shape{x.rows(), weight.rows()}, "linear backward");
    if (x.has_grad()) x.grad_mat().noalias() += dout.mat() * weight.mat();
    if (weight.has_grad()) weight.grad_mat().noalias() += dout.mat().transpose() * x.mat();
    if (bias.has_grad()) bias.grad_vec() += dout.mat().colwise().sum().transpose();
}

template <typename T>
Tensor<T> embedding_forward(const Tensor<T>& table, std::span<const TokenId> ids) {
    require_rank(table, 2, "embedding table");
    if (ids.empty()) throw DimensionError("embedding lookup of an empty id sequence");
    Tensor<T> out({ids.size(), table.cols()});
    for (std::size_t r = 0; r < ids.size(); ++r) {
        if (ids[r] < 0 || static_cast<std::size_t>(ids[r]) >= table.rows()) {
            throw IndexError("embedding id " + std::to_string(ids[r]) + " outside [0, " +
                             std::to_string(table.rows()) + ")");
        }
        out.mat().row(static_cast<Eigen::Index>(r)) = table.mat().row(ids[r]);
    }
    return out;
}

template <typename T>
void embedding_backward(Tensor<T>& table, std::span<const TokenId> ids, const Tensor<T>& dout) {
    require_same_shape(dout.shape(), Shape{ids.size(), table.cols()}, "embedding backward");
    auto g = table.grad_mat();
    for (std::size_t r = 0; r < ids.size(); ++r) {
        g.row(ids[r]) += dout.mat().row(static_cast<Eigen::Index>(r));
    }
}

template <typename T>
LstmParams<T> LstmParams<T>::zeros(std::size_t input_size, std::size_t hidden_size) {
    LstmParams p;
    p.w_ih = Tensor<T>({4 * hidden_size, input_size});
    p.w_hh = Tensor<T>({4 * hidden_size, hidden_size});
    p.bias = Tensor<T>({4 * hidden_size});
    return p;
}

template <typename T>
void LstmParams<T>::validate() const {
    if (w_ih.rank() != 2 || w_hh.rank() != 2 || bias.rank() != 1) {
        throw DimensionError("LSTM parameters have wrong rank");
    }
    const std::size_t h = w_hh.cols();
    if (w_hh.rows() != 4 * h || w_ih.rows() != 4 * h || bias.size() != 4 * h) {
        throw DimensionError("LSTM parameters inconsistent: w_ih " + shape_to_string(w_ih.shape()) + ", w_hh " +
                             shape_to_string(w_hh.shape()) + ", bias " + shape_to_string(bias.shape()));
    }
}

template <typename T>
void lstm_forward(const LstmParams<T>& p, const Vector<T>& x,
                  const Vector<T>& h_prev, const Vector<T>& c_prev,
                  LstmStep<T>& out) {
    const auto h = static_cast<Eigen::Index>(p.hidden_size());
    if (x.size() != static_cast<Eigen::Index>(p.input_size()) || h_prev.size() != h || c_prev.size() != h) {
        throw DimensionError("LSTM step: input [" + std::to_string(x.size()) + "], state [" +
                             std::to_string(h_prev.size()) + "]/[" + std::to_string(c_prev.size()) +
                             "] vs weights " + shape_to_string(p.w_ih.shape()) + "/" +
                             shape_to_string(p.w_hh.shape()));
    }
    out.x = x;
    out.h_prev = h_prev;
    out.c_prev = c_prev;
    out.gates.noalias() = p.w_ih.mat() * x;
    out.gates.noalias() += p.w_hh.mat() * h_prev;
    out.gates += p.bias.vec();
    for (Eigen::Index k = 0; k < 2 * h; ++k) out.gates[k] = sigmoid(out.gates[k]);
    out.gates.segment(2 * h, h) = out.gates.segment(2 * h, h).array().tanh();
    for (Eigen::Index k = 3 * h; k < 4 * h; ++k) out.gates[k] = sigmoid(out.gates[k]);

    const auto i = out.gates.segment(0, h).array();
    const auto f = out.gates.segment(h, h).array();
    const auto g = out.gates.segment(2 * h, h).array();
    const auto o = out.gates.segment(3 * h, h).array();
    out.c = f * c_prev.array() + i * g;
    out.tanh_c = out.c.array().tanh();
    out.h = o * out.tanh_c.array();
}

template <typename T>
void lstm_backward(LstmParams<T>& p, const LstmStep<T>& step, const Vector<T>& dh, const Vector<T>& dc,
                   Vector<T>* dx, Vector<T>& dh_prev, Vector<T>& dc_prev) {
    const auto h = static_cast<Eigen::Index>(p.hidden_size());
    const auto i = step.gates.segment(0, h).array();
    const auto f = step.gates.segment(h, h).array();
    const auto g = step.gates.segment(2 * h, h).array();
    const auto o = step.gates.segment(3 * h, h).array();
    const auto tc = step.tanh_c.array();

    Vector<T> dc_total = dc.array() + dh.array() * o * (T(1) - tc * tc);
    Vector<T> dpre(4 * h);
    dpre.segment(0, h) = dc_total.array() * g * i * (T(1) - i);
    dpre.segment(h, h) = dc_total.array() * step.c_prev.array() * f * (T(1) - f);
    dpre.segment(2 * h, h) = dc_total.array() * i * (T(1) - g * g);
    dpre.segment(3 * h, h) = dh.array() * tc * o * (T(1) - o);

    dc_prev = dc_total.array() * f;
    dh_prev.noalias() = p.w_hh.mat().transpose() * dpre;
    if (dx) dx->noalias() += p.w_ih.mat().transpose() * dpre;

    if (p.w_ih.has_grad()) p.w_ih.grad_mat().noalias() += dpre * step.x.transpose();
    if (p.w_hh.has_grad()) p.w_hh.grad_mat().noalias() += dpre * step.h_prev.transpose();
    if (p.bias.has_grad()) p.bias.grad_vec() += dpre;
}

template <typename T>
std::pair<Tensor<T>, Tensor<T>> lstm_cell_step(const Tensor<T>& x, const Tensor<T>& h_prev,
                                               const Tensor<T>& c_prev, const LstmParams<T>& p) {
    p.validate();
    LstmStep<T> step;
    lstm_forward<T>(p, x.vec(), h_prev.vec(), c_prev.vec(), step);
    Tensor<T> h({p.hidden_size()}, std::span<const T>(step.h.data(), static_cast<std::size_t>(step.h.size())));
    Tensor<T> c({p.hidden_size()}, std::span<const T>(step.c.data(), static_cast<std::size_t>(step.c.size())));
    return {std::move(h), std::move(c)};
}

template <typename T>
T softmax_cross_entropy(Tensor<T>& logits, std::span<const TokenId> targets, TokenId ignore_index) {
    require_rank(logits, 2, "logits");
    if (targets.size() != logits.rows()) {
        throw DimensionError("softmax_cross_entropy: logits " + shape_to_string(logits.shape()) + " vs " +
                             std::to_string(targets.size()) + " targets");
    }
    const auto k = static_cast<TokenId>(logits.cols());
    std::size_t counted = 0;
    for (TokenId t : targets) {
        if (t == ignore_index) continue;
        if (t < 0 || t >= k) {
            throw IndexError("target " + std::to_string(t) + " outside [0, " + std::to_string(k) + ")");
        }
        ++counted;
    }
    if (counted == 0) return T(0);

    const bool want_grad = logits.has_grad();
    T total = T(0);
    Vector<T> row;
    for (std::size_t r = 0; r < targets.size(); ++r) {
        if (targets[r] == ignore_index) continue;
        row = logits.mat().row(static_cast<Eigen::Index>(r)).transpose();
        const T top = row.maxCoeff();
        const T log_z = top + std::log((row.array() - top).exp().sum());
        total += log_z - row[targets[r]];
        if (want_grad) {
            Vector<T> p = (row.array() - log_z).exp();
            p[targets[r]] -= T(1);
            logits.grad_mat().row(static_cast<Eigen::Index>(r)) += p.transpose() / static_cast<T>(counted);
        }
    }
    return total / static_cast<T>(counted);
}

template <typename T>
T bce_with_logits(Tensor<T>& x, const Tensor<T>& y) {
    require_same_shape(x.shape(), y.shape(), "bce_with_logits");
    const std::size_t batch = x.rank() == 1 ? 1 : x.rows();
    const bool want_grad = x.has_grad();
    T total = T(0);
    for (std::size_t k = 0; k < x.size(); ++k) {
        const T xi = x[k];
        const T yi = y[k];
        // -[y log s(x) + (1-y) log(1 - s(x))] = softplus(x) - y x
        total += softplus(xi) - yi * xi;
        if (want_grad) x.grad()[k] += (sigmoid(xi) - yi) / static_cast<T>(batch);
    }
    return total / static_cast<T>(batch);
}

#define CNMT_INSTANTIATE(T)                                                                                    \
    template Tensor<T> linear_forward(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);                   \
    template void linear_backward(Tensor<T>&, Tensor<T>&, Tensor<T>&, const Tensor<T>&);                       \
    template Tensor<T> embedding_forward(const Tensor<T>&, std::span<const TokenId>);                          \
    template void embedding_backward(Tensor<T>&, std::span<const TokenId>, const Tensor<T>&);                  \
    template struct LstmParams<T>;                                                                             \
    template void lstm_forward(const LstmParams<T>&, const Vector<T>&,                       \
                               const Vector<T>&, const Vector<T>&,         \
                               LstmStep<T>&);                                                                  \
    template void lstm_backward(LstmParams<T>&, const LstmStep<T>&, const Vector<T>&, const Vector<T>&,        \
                                Vector<T>*, Vector<T>&, Vector<T>&);                                           \
    template std::pair<Tensor<T>, Tensor<T>> lstm_cell_step(const Tensor<T>&, const Tensor<T>&,                \
                                                            const Tensor<T>&, const LstmParams<T>&);           \
    template T softmax_cross_entropy(Tensor<T>&, std::span<const TokenId>, TokenId);                           \
    template T bce_with_logits(Tensor<T>&, const Tensor<T>&);

CNMT_INSTANTIATE(float)
CNMT_INSTANTIATE(double)

#undef CNMT_INSTANTIATE

}  // namespace cnmt::nn
