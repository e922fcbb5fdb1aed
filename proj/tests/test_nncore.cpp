#include "doctest.h"

#include <cmath>
#include <vector>

#include "cnmt/errors.hpp"
#include "cnmt/gradcheck.hpp"
#include "cnmt/nn.hpp"
#include "cnmt/optim.hpp"
#include "cnmt/rng.hpp"
#include "cnmt/tensor.hpp"

using namespace cnmt;
using doctest::Approx;

namespace {

Tensor<double> random_tensor(Shape shape, std::uint64_t seed, double scale = 1.0) {
    Tensor<double> t(std::move(shape));
    Rng rng(seed);
    for (auto& v : t.data()) v = rng.uniform(-scale, scale);
    return t;
}

std::vector<double> grad_copy(const Tensor<double>& t) { return {t.grad().begin(), t.grad().end()}; }

}  // namespace

TEST_CASE("tensor shape bookkeeping") {
    Tensor<float> t({2, 3}, 1.5f);
    CHECK(t.size() == 6);
    CHECK(t.rows() == 2);
    CHECK(t.cols() == 3);
    CHECK_FALSE(t.has_grad());
    t.enable_grad();
    CHECK(t.has_grad());
    CHECK(t.grad().size() == 6);
    CHECK_THROWS_AS(Tensor<float>({2, 0}), DimensionError);
    CHECK_THROWS_AS(Tensor<float>({2, 2}, {1.0f, 2.0f}), DimensionError);
}

TEST_CASE("linear forward examples") {
    SUBCASE("zero weights give the bias") {
        auto y = nn::linear_forward(Tensor<double>::matrix({{1, 2}}), Tensor<double>({2, 2}), Tensor<double>({2}, {3, 4}));
        CHECK(y.at(0, 0) == 3.0);
        CHECK(y.at(0, 1) == 4.0);
    }
    SUBCASE("identity weights") {
        auto y = nn::linear_forward(Tensor<double>::matrix({{1, 0}}), Tensor<double>::matrix({{1, 0}, {0, 1}}),
                                    Tensor<double>({2}));
        CHECK(y.at(0, 0) == 1.0);
        CHECK(y.at(0, 1) == 0.0);
    }
    SUBCASE("hand multiply") {
        auto y = nn::linear_forward(Tensor<double>::matrix({{1, 2}}), Tensor<double>::matrix({{1, 1}, {2, -1}}),
                                    Tensor<double>({2}, {0, 1}));
        CHECK(y.at(0, 0) == 3.0);
        CHECK(y.at(0, 1) == 1.0);
    }
    SUBCASE("shape mismatch names both shapes") {
        try {
            nn::linear_forward(Tensor<double>({1, 3}), Tensor<double>({2, 2}), Tensor<double>({2}));
            FAIL("expected a dimension error");
        } catch (const DimensionError& e) {
            const std::string what = e.what();
            CHECK(what.find("[1x3]") != std::string::npos);
            CHECK(what.find("[2x2]") != std::string::npos);
        }
    }
}

TEST_CASE("lstm cell examples") {
    const auto p = nn::LstmParams<double>::zeros(2, 2);
    SUBCASE("all zero") {
        auto [h, c] = nn::lstm_cell_step(Tensor<double>({2}, {1, -1}), Tensor<double>({2}), Tensor<double>({2}), p);
        CHECK(h[0] == 0.0);
        CHECK(c[1] == 0.0);
    }
    SUBCASE("zero weights halve the cell") {
        auto [h, c] = nn::lstm_cell_step(Tensor<double>({2}, {0.3, 0.7}), Tensor<double>({2}, {0.1, 0.2}),
                                         Tensor<double>({2}, {2.0, -1.0}), p);
        CHECK(c[0] == Approx(1.0));
        CHECK(c[1] == Approx(-0.5));
        CHECK(h[0] == Approx(0.5 * std::tanh(1.0)));
        CHECK(h[1] == Approx(0.5 * std::tanh(-0.5)));
    }
    SUBCASE("matches scalar gate equations") {
        auto q = nn::LstmParams<double>::zeros(2, 2);
        q.w_ih = random_tensor({8, 2}, 1, 0.5);
        q.w_hh = random_tensor({8, 2}, 2, 0.5);
        q.bias = random_tensor({8}, 3, 0.5);
        const double x[2] = {0.4, -0.9}, hp[2] = {0.2, 0.1}, cp[2] = {-0.3, 0.8};
        auto [h, c] = nn::lstm_cell_step(Tensor<double>({2}, {x[0], x[1]}), Tensor<double>({2}, {hp[0], hp[1]}),
                                         Tensor<double>({2}, {cp[0], cp[1]}), q);
        auto pre = [&](int row) {
            double s = q.bias[row];
            for (int k = 0; k < 2; ++k) s += q.w_ih.at(row, k) * x[k] + q.w_hh.at(row, k) * hp[k];
            return s;
        };
        auto sig = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
        for (int j = 0; j < 2; ++j) {
            const double i = sig(pre(j)), f = sig(pre(2 + j)), g = std::tanh(pre(4 + j)), o = sig(pre(6 + j));
            const double cell = f * cp[j] + i * g;
            CHECK(c[j] == Approx(cell).epsilon(1e-12));
            CHECK(h[j] == Approx(o * std::tanh(cell)).epsilon(1e-12));
        }
    }
}

TEST_CASE("cross entropy examples") {
    const std::vector<TokenId> t0 = {0};
    Tensor<double> uniform({1, 4});
    CHECK(nn::softmax_cross_entropy(uniform, t0, -1) == Approx(std::log(4.0)));
    Tensor<double> saturated = Tensor<double>::matrix({{50, 0, 0}});
    CHECK(nn::softmax_cross_entropy(saturated, t0, -1) == Approx(0.0).epsilon(1e-12));
    Tensor<double> hand = Tensor<double>::matrix({{1, 2, 3}});
    const std::vector<TokenId> t2 = {2};
    CHECK(nn::softmax_cross_entropy(hand, t2, -1) == Approx(0.4076).epsilon(1e-4));
    const std::vector<TokenId> bad = {3};
    CHECK_THROWS_AS(nn::softmax_cross_entropy(hand, bad, -1), IndexError);
}

TEST_CASE("cross entropy ignores padded rows") {
    Tensor<double> logits = Tensor<double>::matrix({{1, 2, 3}, {5, -1, 0}});
    logits.enable_grad();
    const std::vector<TokenId> targets = {2, 0};
    const std::vector<TokenId> with_pad = {2, -1};
    Tensor<double> one = Tensor<double>::matrix({{1, 2, 3}});
    const std::vector<TokenId> t2 = {2};
    CHECK(nn::softmax_cross_entropy(logits, with_pad, -1) == Approx(nn::softmax_cross_entropy(one, t2, -1)));
    CHECK(logits.at(1, 0) == 5.0);
    for (std::size_t k = 3; k < 6; ++k) CHECK(logits.grad()[k] == 0.0);
    (void)targets;
}

TEST_CASE("binary cross entropy examples") {
    Tensor<double> zeros({1, 3});
    CHECK(nn::bce_with_logits(zeros, Tensor<double>({1, 3}, {1, 0, 1})) == Approx(3 * std::log(2.0)));
    Tensor<double> sat({1, 1}, {50.0});
    CHECK(nn::bce_with_logits(sat, Tensor<double>({1, 1}, {1.0})) == Approx(0.0).epsilon(1e-12));
    Tensor<double> x({1, 2}, {1.0, -1.0});
    CHECK(nn::bce_with_logits(x, Tensor<double>({1, 2}, {1.0, 0.0})) == Approx(0.6265).epsilon(1e-4));
    Tensor<double> huge({1, 2}, {1000.0, -1000.0});
    CHECK(std::isfinite(nn::bce_with_logits(huge, Tensor<double>({1, 2}, {0.0, 1.0}))));
}

TEST_CASE("adam") {
    SUBCASE("first step moves by lr against the sign") {
        Tensor<double> w({3}, {1.0, 1.0, 1.0});
        w.enable_grad();
        w.grad()[0] = 0.5;
        w.grad()[1] = -2.0;
        w.grad()[2] = 0.0;
        AdamState<double> st;
        adam_step<double>({&w}, st);
        CHECK(w[0] == Approx(0.999).epsilon(1e-9));
        CHECK(w[1] == Approx(1.001).epsilon(1e-9));
        CHECK(w[2] == 1.0);
    }
    SUBCASE("two steps match the hand unroll") {
        Tensor<double> w({1}, {0.0});
        w.enable_grad();
        AdamState<double> st;
        st.config.lr = 0.1;
        double theta = 0.0, m = 0.0, v = 0.0;
        for (int t = 1; t <= 2; ++t) {
            w.grad()[0] = 1.0;
            adam_step<double>({&w}, st);
            m = 0.9 * m + 0.1;
            v = 0.999 * v + 0.001;
            const double mhat = m / (1 - std::pow(0.9, t));
            const double vhat = v / (1 - std::pow(0.999, t));
            theta -= 0.1 * mhat / (std::sqrt(vhat) + 1e-8);
        }
        CHECK(w[0] == Approx(theta).epsilon(1e-12));
        CHECK(st.step == 2);
    }
    SUBCASE("zero gradient is the identity") {
        Tensor<double> w = random_tensor({4}, 9);
        const Tensor<double> before = w;
        w.enable_grad();
        AdamState<double> st;
        for (int k = 0; k < 3; ++k) adam_step<double>({&w}, st);
        for (std::size_t i = 0; i < 4; ++i) CHECK(w[i] == before[i]);
    }
    SUBCASE("clipping rescales to the limit") {
        Tensor<double> a({2}), b({1});
        a.enable_grad();
        b.enable_grad();
        a.grad()[0] = 3.0;
        a.grad()[1] = 0.0;
        b.grad()[0] = 4.0;
        CHECK(clip_grad_norm<double>({&a, &b}, 1.0) == Approx(5.0));
        CHECK(a.grad()[0] == Approx(0.6));
        CHECK(b.grad()[0] == Approx(0.8));
    }
}

// ------------------------------------------------------------- grad checks

TEST_CASE("grad_check catches a wrong gradient") {
    std::vector<double> theta = {0.3, -0.7};
    auto f = [&] { return theta[0] * theta[0] + 3 * theta[1]; };
    std::vector<double> right = {0.6, 3.0};
    std::vector<double> doubled = {1.2, 6.0};
    CHECK(grad_check(f, theta, right) < 1e-6);
    CHECK(grad_check(f, theta, doubled) == Approx(0.5).epsilon(1e-3));
    std::vector<double> tiny = {1.0};
    const std::vector<double> zero = {0.0};
    CHECK_THROWS_AS(grad_check([] { return std::nan(""); }, tiny, zero), EvaluationError);
}

TEST_CASE("linear gradients") {
    Tensor<double> x = random_tensor({3, 4}, 11), w = random_tensor({2, 4}, 12), b = random_tensor({2}, 13);
    const Tensor<double> r = random_tensor({3, 2}, 14);
    auto loss = [&] {
        const auto y = nn::linear_forward(x, w, b);
        double s = 0;
        for (std::size_t i = 0; i < y.size(); ++i) s += r[i] * y[i];
        return s;
    };
    x.enable_grad();
    w.enable_grad();
    b.enable_grad();
    nn::linear_backward(x, w, b, r);
    CHECK(grad_check(loss, x.data(), grad_copy(x)) < 1e-6);
    CHECK(grad_check(loss, w.data(), grad_copy(w)) < 1e-6);
    CHECK(grad_check(loss, b.data(), grad_copy(b)) < 1e-6);
}

TEST_CASE("embedding gradients") {
    Tensor<double> table = random_tensor({5, 3}, 21);
    const std::vector<TokenId> ids = {4, 1, 4, 0};
    const Tensor<double> r = random_tensor({4, 3}, 22);
    auto loss = [&] {
        const auto y = nn::embedding_forward(table, ids);
        double s = 0;
        for (std::size_t i = 0; i < y.size(); ++i) s += r[i] * y[i];
        return s;
    };
    table.enable_grad();
    nn::embedding_backward(table, ids, r);
    CHECK(grad_check(loss, table.data(), grad_copy(table)) < 1e-5);
    const std::vector<TokenId> bad = {5};
    CHECK_THROWS_AS(nn::embedding_forward(table, bad), IndexError);
}

TEST_CASE("lstm gradients over three steps") {
    const std::size_t in = 3, hid = 4;
    nn::LstmParams<double> p{random_tensor({4 * hid, in}, 31, 0.8), random_tensor({4 * hid, hid}, 32, 0.8),
                             random_tensor({4 * hid}, 33, 0.8)};
    Tensor<double> xs = random_tensor({3, in}, 34);
    const Tensor<double> rh = random_tensor({3, hid}, 35), rc = random_tensor({hid}, 36);
    Tensor<double> h0 = random_tensor({hid}, 37, 0.5), c0 = random_tensor({hid}, 38, 0.5);
    auto run = [&](std::vector<nn::LstmStep<double>>& steps) {
        Vector<double> h = h0.vec(), c = c0.vec();
        double s = 0;
        steps.resize(3);
        for (Eigen::Index t = 0; t < 3; ++t) {
            nn::lstm_forward<double>(p, xs.mat().row(t).transpose(), h, c, steps[t]);
            h = steps[t].h;
            c = steps[t].c;
            s += rh.mat().row(t).dot(h.transpose());
        }
        return s + rc.vec().dot(c);
    };
    auto loss = [&] {
        std::vector<nn::LstmStep<double>> steps;
        return run(steps);
    };
    p.w_ih.enable_grad();
    p.w_hh.enable_grad();
    p.bias.enable_grad();
    xs.enable_grad();
    h0.enable_grad();
    c0.enable_grad();
    std::vector<nn::LstmStep<double>> steps;
    run(steps);
    Vector<double> dh = Vector<double>::Zero(hid), dc = rc.vec();
    Vector<double> dh_prev(hid), dc_prev(hid);
    for (Eigen::Index t = 2; t >= 0; --t) {
        dh += rh.mat().row(t).transpose();
        Vector<double> dx = Vector<double>::Zero(in);
        nn::lstm_backward(p, steps[t], dh, dc, &dx, dh_prev, dc_prev);
        xs.grad_mat().row(t) = dx.transpose();
        dh = dh_prev;
        dc = dc_prev;
    }
    h0.grad_vec() = dh;
    c0.grad_vec() = dc;
    CHECK(grad_check(loss, p.w_ih.data(), grad_copy(p.w_ih)) < 1e-5);
    CHECK(grad_check(loss, p.w_hh.data(), grad_copy(p.w_hh)) < 1e-5);
    CHECK(grad_check(loss, p.bias.data(), grad_copy(p.bias)) < 1e-5);
    CHECK(grad_check(loss, xs.data(), grad_copy(xs)) < 1e-5);
    CHECK(grad_check(loss, h0.data(), grad_copy(h0)) < 1e-5);
    CHECK(grad_check(loss, c0.data(), grad_copy(c0)) < 1e-5);
}

TEST_CASE("loss gradients") {
    SUBCASE("cross entropy") {
        Tensor<double> logits = random_tensor({3, 5}, 41, 2.0);
        const std::vector<TokenId> targets = {4, -1, 0};
        logits.enable_grad();
        nn::softmax_cross_entropy(logits, targets, -1);
        Tensor<double> probe = logits;
        probe.drop_grad();
        auto loss = [&] { return nn::softmax_cross_entropy(probe, targets, -1); };
        CHECK(grad_check(loss, probe.data(), grad_copy(logits)) < 1e-5);
    }
    SUBCASE("binary cross entropy") {
        Tensor<double> x = random_tensor({2, 4}, 42, 2.0);
        const Tensor<double> y({2, 4}, {1, 0, 0, 1, 0, 1, 1, 0});
        x.enable_grad();
        nn::bce_with_logits(x, y);
        Tensor<double> probe = x;
        probe.drop_grad();
        auto loss = [&] { return nn::bce_with_logits(probe, y); };
        CHECK(grad_check(loss, probe.data(), grad_copy(x)) < 1e-5);
    }
}

TEST_CASE("softmax and sigmoid ranges") {
    Vector<double> v(4);
    v << 1000.0, -1000.0, 3.0, 3.0;
    nn::softmax_inplace<double>(v);
    CHECK(v.sum() == Approx(1.0).epsilon(1e-12));
    CHECK(v.allFinite());
    for (double z : {-800.0, -5.0, 0.0, 5.0, 800.0}) {
        const double s = nn::sigmoid(z);
        CHECK(s >= 0.0);
        CHECK(s <= 1.0);
    }
    CHECK(nn::sigmoid(0.0) == 0.5);
}

TEST_CASE("rng is reproducible") {
    Rng a(7), b(7);
    for (int k = 0; k < 100; ++k) CHECK(a.next_u64() == b.next_u64());
    Rng c(7);
    for (int k = 0; k < 1000; ++k) {
        const double u = c.uniform01();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
        CHECK(c.below(5) < 5);
    }
    CHECK(derive_seed(1, 2) != derive_seed(1, 3));
    CHECK(derive_seed(1, 2) == derive_seed(1, 2));
}
