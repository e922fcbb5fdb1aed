#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace cnmt {

using TokenLists = std::vector<std::vector<std::string>>;

enum class Smoothing { kNone, kAddOneOnZero };

Smoothing parse_smoothing(const std::string& name);
std::string to_string(Smoothing s);

inline constexpr std::size_t kBleuOrder = 4;

/// Sufficient statistics for corpus BLEU; they add across sentences.
struct BleuStats {
    std::array<std::size_t, kBleuOrder> matches{};  // clipped
    std::array<std::size_t, kBleuOrder> totals{};
    std::size_t hypothesis_length = 0;
    std::size_t reference_length = 0;

    BleuStats& operator+=(const BleuStats& other);
};

BleuStats sentence_stats(const std::vector<std::string>& hypothesis, const std::vector<std::string>& reference);

struct BleuReport {
    std::array<double, kBleuOrder> precisions{};
    double brevity_penalty = 1.0;
    double bleu = 0.0;  // 0..100
    std::size_t hypothesis_length = 0;
    std::size_t reference_length = 0;
};

/// Orders with no hypothesis n-grams at all count as precision 1. With
/// add-one-on-zero smoothing an order with zero matches scores
/// 1 / (total + 1) instead of 0.
BleuReport bleu_from_stats(const BleuStats& stats, Smoothing smoothing = Smoothing::kNone);

/// Corpus BLEU-4 with clipped counts pooled over the corpus and brevity
/// penalty exp(1 - r/c) when c < r.
BleuReport bleu_corpus(const TokenLists& hypotheses, const TokenLists& references,
                       Smoothing smoothing = Smoothing::kNone);

struct SignificanceReport {
    double p_value = 1.0;
    std::size_t resamples = 0;
    std::uint64_t seed = 0;
    double bleu_a = 0.0;  // on the full test set
    double bleu_b = 0.0;
    double mean_bleu_a = 0.0;  // over resamples
    double mean_bleu_b = 0.0;
};

/// One-sided paired bootstrap for "system B beats system A": the p-value is
/// the fraction of resampled test sets on which BLEU(B) <= BLEU(A).
SignificanceReport paired_bootstrap(const TokenLists& hyps_a, const TokenLists& hyps_b, const TokenLists& refs,
                                    std::size_t resamples = 1000, std::uint64_t seed = 0,
                                    Smoothing smoothing = Smoothing::kNone);

/// Fraction of hypotheses containing `token` at least once.
double token_generation_rate(const TokenLists& hypotheses, const std::string& token);

}  // namespace cnmt
