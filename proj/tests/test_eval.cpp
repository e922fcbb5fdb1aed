#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <map>

#include "cnmt/errors.hpp"
#include "cnmt/eval.hpp"
#include "cnmt/rng.hpp"
#include "cnmt/vocab.hpp"

using namespace cnmt;
using doctest::Approx;

namespace {

TokenLists lists(std::initializer_list<const char*> lines) {
    TokenLists out;
    for (const char* l : lines) out.push_back(tokenize(l));
    return out;
}

// Direct corpus BLEU from the definition: clipped n-gram counts recounted
// with a map per sentence, no shared code with the library.
double reference_bleu(const TokenLists& hyps, const TokenLists& refs) {
    std::array<double, 4> m{}, t{};
    double c = 0, r = 0;
    for (std::size_t s = 0; s < hyps.size(); ++s) {
        c += static_cast<double>(hyps[s].size());
        r += static_cast<double>(refs[s].size());
        for (std::size_t n = 1; n <= 4; ++n) {
            std::map<std::vector<std::string>, int> hc, rc;
            for (std::size_t i = 0; i + n <= hyps[s].size(); ++i) ++hc[{hyps[s].begin() + i, hyps[s].begin() + i + n}];
            for (std::size_t i = 0; i + n <= refs[s].size(); ++i) ++rc[{refs[s].begin() + i, refs[s].begin() + i + n}];
            for (const auto& [g, k] : hc) {
                t[n - 1] += k;
                auto it = rc.find(g);
                if (it != rc.end()) m[n - 1] += std::min(k, it->second);
            }
        }
    }
    double log_sum = 0;
    for (int n = 0; n < 4; ++n) {
        const double p = t[n] == 0 ? 1.0 : m[n] / t[n];
        if (p == 0) return 0;
        log_sum += std::log(p) / 4;
    }
    const double bp = c < r ? std::exp(1 - r / c) : 1.0;
    return 100 * bp * std::exp(log_sum);
}

TokenLists random_corpus(Rng& rng, std::size_t n, std::size_t vocab) {
    TokenLists out(n);
    for (auto& s : out) {
        const std::size_t len = 1 + rng.below(9);
        for (std::size_t k = 0; k < len; ++k) s.push_back("w" + std::to_string(rng.below(vocab)));
    }
    return out;
}

}  // namespace

TEST_CASE("bleu examples") {
    const auto ref = lists({"the cat sat on the mat"});
    CHECK(bleu_corpus(ref, ref).bleu == Approx(100.0));
    const auto clipped = bleu_corpus(lists({"the the the the"}), lists({"the cat"}));
    CHECK(clipped.precisions[0] == Approx(0.25));
    CHECK(clipped.precisions[1] == 0.0);
    CHECK(clipped.bleu == 0.0);
    const auto short_hyp = bleu_corpus(lists({"a b c d"}), lists({"a b c d e"}));
    CHECK(short_hyp.brevity_penalty == Approx(std::exp(1.0 - 5.0 / 4.0)));
    CHECK(short_hyp.bleu == Approx(77.88).epsilon(1e-4));
    const auto longer = bleu_corpus(lists({"a b c d e f g h i j"}), lists({"a b c d e f g h"}));
    CHECK(longer.brevity_penalty == 1.0);
    CHECK(longer.bleu == Approx(100.0 * std::pow(8.0 / 10 * 7.0 / 9 * 6.0 / 8 * 5.0 / 7, 0.25)));
}

TEST_CASE("bleu agrees with a direct recount") {
    Rng rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        const auto refs = random_corpus(rng, 6, 5);
        const auto hyps = random_corpus(rng, 6, 5);
        CHECK(bleu_corpus(hyps, refs).bleu == Approx(reference_bleu(hyps, refs)).epsilon(1e-9));
    }
}

TEST_CASE("bleu properties") {
    Rng rng(3);
    SUBCASE("identity is 100") {
        for (int trial = 0; trial < 100; ++trial) {
            const auto c = random_corpus(rng, 1 + rng.below(10), 20);
            CHECK(bleu_corpus(c, c).bleu == Approx(100.0));
        }
    }
    SUBCASE("sentence order does not matter") {
        auto refs = random_corpus(rng, 8, 4);
        auto hyps = random_corpus(rng, 8, 4);
        const double before = bleu_corpus(hyps, refs).bleu;
        std::vector<std::size_t> order(8);
        for (std::size_t i = 0; i < 8; ++i) order[i] = i;
        rng.shuffle(order);
        TokenLists h2, r2;
        for (auto i : order) {
            h2.push_back(hyps[i]);
            r2.push_back(refs[i]);
        }
        CHECK(bleu_corpus(h2, r2).bleu == Approx(before));
    }
    SUBCASE("stats add") {
        const auto refs = random_corpus(rng, 4, 6);
        const auto hyps = random_corpus(rng, 4, 6);
        BleuStats total;
        for (std::size_t i = 0; i < 4; ++i) total += sentence_stats(hyps[i], refs[i]);
        CHECK(bleu_from_stats(total).bleu == Approx(bleu_corpus(hyps, refs).bleu));
    }
}

TEST_CASE("bleu smoothing and errors") {
    const auto hyp = lists({"a b x d"});
    const auto ref = lists({"a b c d"});
    CHECK(bleu_corpus(hyp, ref).bleu == 0.0);
    const auto sm = bleu_corpus(hyp, ref, Smoothing::kAddOneOnZero);
    CHECK(sm.precisions[2] == Approx(1.0 / 3.0));
    CHECK(sm.precisions[3] == Approx(0.5));
    CHECK(sm.bleu == Approx(100.0 * std::pow(0.75 * (1.0 / 3) * (1.0 / 3) * 0.5, 0.25)));
    CHECK(parse_smoothing("none") == Smoothing::kNone);
    CHECK(parse_smoothing("add_one_on_zero") == Smoothing::kAddOneOnZero);
    CHECK_THROWS_AS(parse_smoothing("exp"), ConfigError);
    CHECK_THROWS_AS(bleu_corpus(hyp, lists({"a", "b"})), InputError);
}

TEST_CASE("paired bootstrap") {
    Rng rng(5);
    const auto refs = random_corpus(rng, 40, 6);
    auto noisy = refs;
    for (auto& s : noisy) s[0] = "zz";
    SUBCASE("identical systems are not significant") {
        CHECK(paired_bootstrap(noisy, noisy, refs, 200, 1).p_value >= 0.5);
    }
    SUBCASE("a dominating system") {
        const auto r = paired_bootstrap(noisy, refs, refs, 500, 1);
        CHECK(r.p_value < 0.01);
        CHECK(r.bleu_b == Approx(100.0));
        CHECK(r.resamples == 500);
        CHECK(paired_bootstrap(refs, noisy, refs, 500, 1).p_value > 0.99);
    }
    SUBCASE("deterministic per seed") {
        const auto half = [&] {
            auto h = refs;
            for (std::size_t i = 0; i < h.size(); i += 2) h[i][0] = "zz";
            return h;
        }();
        const auto a = paired_bootstrap(noisy, half, refs, 300, 9);
        const auto b = paired_bootstrap(noisy, half, refs, 300, 9);
        CHECK(a.p_value == b.p_value);
        CHECK(a.mean_bleu_b == b.mean_bleu_b);
    }
    SUBCASE("larger gap, smaller p") {
        auto few = noisy;
        for (std::size_t i = 0; i < 4; ++i) few[i] = refs[i];
        auto many = noisy;
        for (std::size_t i = 0; i < 20; ++i) many[i] = refs[i];
        CHECK(paired_bootstrap(noisy, many, refs, 500, 2).p_value <=
              paired_bootstrap(noisy, few, refs, 500, 2).p_value);
    }
    SUBCASE("too few resamples") {
        CHECK_THROWS_AS(paired_bootstrap(noisy, refs, refs, 99, 0), ConfigError);
    }
}

TEST_CASE("token generation rate") {
    CHECK(token_generation_rate(lists({"je suis daxiste", "daxiste"}), "daxiste") == 1.0);
    CHECK(token_generation_rate(lists({"je suis", "il est"}), "daxiste") == 0.0);
    CHECK(token_generation_rate(lists({"daxiste daxiste", "a", "b", "c"}), "daxiste") == 0.25);
    CHECK_THROWS_AS(token_generation_rate({}, "daxiste"), InputError);
}
