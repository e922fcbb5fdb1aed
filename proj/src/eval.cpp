#include "cnmt/eval.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "cnmt/errors.hpp"
#include "cnmt/rng.hpp"

namespace cnmt {

Smoothing parse_smoothing(const std::string& name) {
    if (name == "none") return Smoothing::kNone;
    if (name == "add_one_on_zero") return Smoothing::kAddOneOnZero;
    throw ConfigError("unknown smoothing '" + name + "' (expected none or add_one_on_zero)");
}

std::string to_string(Smoothing s) { return s == Smoothing::kNone ? "none" : "add_one_on_zero"; }

BleuStats& BleuStats::operator+=(const BleuStats& other) {
    for (std::size_t n = 0; n < kBleuOrder; ++n) {
        matches[n] += other.matches[n];
        totals[n] += other.totals[n];
    }
    hypothesis_length += other.hypothesis_length;
    reference_length += other.reference_length;
    return *this;
}

namespace {

using NgramCounts = std::map<std::vector<std::string>, std::size_t>;

NgramCounts count_ngrams(const std::vector<std::string>& tokens, std::size_t n) {
    NgramCounts counts;
    for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
        ++counts[std::vector<std::string>(tokens.begin() + static_cast<std::ptrdiff_t>(i),
                                          tokens.begin() + static_cast<std::ptrdiff_t>(i + n))];
    }
    return counts;
}

}  // namespace

BleuStats sentence_stats(const std::vector<std::string>& hypothesis, const std::vector<std::string>& reference) {
    BleuStats s;
    s.hypothesis_length = hypothesis.size();
    s.reference_length = reference.size();
    for (std::size_t n = 1; n <= kBleuOrder; ++n) {
        const auto hyp = count_ngrams(hypothesis, n);
        const auto ref = count_ngrams(reference, n);
        for (const auto& [gram, count] : hyp) {
            s.totals[n - 1] += count;
            auto it = ref.find(gram);
            if (it != ref.end()) s.matches[n - 1] += std::min(count, it->second);
        }
    }
    return s;
}

BleuReport bleu_from_stats(const BleuStats& stats, Smoothing smoothing) {
    BleuReport r;
    r.hypothesis_length = stats.hypothesis_length;
    r.reference_length = stats.reference_length;
    double log_sum = 0.0;
    bool any_zero = false;
    for (std::size_t n = 0; n < kBleuOrder; ++n) {
        double p;
        if (stats.totals[n] == 0) {
            p = 1.0;
        } else if (stats.matches[n] == 0) {
            p = smoothing == Smoothing::kAddOneOnZero ? 1.0 / static_cast<double>(stats.totals[n] + 1) : 0.0;
        } else {
            p = static_cast<double>(stats.matches[n]) / static_cast<double>(stats.totals[n]);
        }
        r.precisions[n] = p;
        if (p == 0.0) {
            any_zero = true;
        } else {
            log_sum += std::log(p) / static_cast<double>(kBleuOrder);
        }
    }
    const double c = static_cast<double>(stats.hypothesis_length);
    const double ref = static_cast<double>(stats.reference_length);
    if (stats.hypothesis_length == 0) {
        r.brevity_penalty = stats.reference_length == 0 ? 1.0 : 0.0;
    } else {
        r.brevity_penalty = c < ref ? std::exp(1.0 - ref / c) : 1.0;
    }
    if (any_zero || stats.hypothesis_length == 0) {
        r.bleu = 0.0;
    } else {
        r.bleu = 100.0 * r.brevity_penalty * std::exp(log_sum);
    }
    return r;
}

BleuReport bleu_corpus(const TokenLists& hypotheses, const TokenLists& references, Smoothing smoothing) {
    if (hypotheses.size() != references.size()) {
        throw InputError("BLEU: " + std::to_string(hypotheses.size()) + " hypotheses vs " +
                         std::to_string(references.size()) + " references");
    }
    BleuStats total;
    for (std::size_t i = 0; i < hypotheses.size(); ++i) total += sentence_stats(hypotheses[i], references[i]);
    return bleu_from_stats(total, smoothing);
}

SignificanceReport paired_bootstrap(const TokenLists& hyps_a, const TokenLists& hyps_b, const TokenLists& refs,
                                    std::size_t resamples, std::uint64_t seed, Smoothing smoothing) {
    if (hyps_a.size() != refs.size() || hyps_b.size() != refs.size()) {
        throw InputError("paired bootstrap: system A has " + std::to_string(hyps_a.size()) + ", system B " +
                         std::to_string(hyps_b.size()) + ", references " + std::to_string(refs.size()) +
                         " sentences");
    }
    if (refs.empty()) throw InputError("paired bootstrap: empty test set");
    if (resamples < 100) throw ConfigError("paired bootstrap needs at least 100 resamples");

    std::vector<BleuStats> stats_a, stats_b;
    BleuStats full_a, full_b;
    for (std::size_t i = 0; i < refs.size(); ++i) {
        stats_a.push_back(sentence_stats(hyps_a[i], refs[i]));
        stats_b.push_back(sentence_stats(hyps_b[i], refs[i]));
        full_a += stats_a.back();
        full_b += stats_b.back();
    }

    SignificanceReport report;
    report.resamples = resamples;
    report.seed = seed;
    report.bleu_a = bleu_from_stats(full_a, smoothing).bleu;
    report.bleu_b = bleu_from_stats(full_b, smoothing).bleu;

    Rng rng(seed);
    std::size_t b_not_better = 0;
    double sum_a = 0.0, sum_b = 0.0;
    for (std::size_t r = 0; r < resamples; ++r) {
        BleuStats sample_a, sample_b;
        for (std::size_t k = 0; k < refs.size(); ++k) {
            const std::size_t i = rng.below(refs.size());
            sample_a += stats_a[i];
            sample_b += stats_b[i];
        }
        const double a = bleu_from_stats(sample_a, smoothing).bleu;
        const double b = bleu_from_stats(sample_b, smoothing).bleu;
        sum_a += a;
        sum_b += b;
        if (b <= a) ++b_not_better;
    }
    report.p_value = static_cast<double>(b_not_better) / static_cast<double>(resamples);
    report.mean_bleu_a = sum_a / static_cast<double>(resamples);
    report.mean_bleu_b = sum_b / static_cast<double>(resamples);
    return report;
}

double token_generation_rate(const TokenLists& hypotheses, const std::string& token) {
    if (hypotheses.empty()) throw InputError("generation rate of an empty hypothesis list");
    std::size_t hits = 0;
    for (const auto& h : hypotheses) {
        if (std::find(h.begin(), h.end(), token) != h.end()) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(hypotheses.size());
}

}  // namespace cnmt
