#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "json.hpp"

#include "cnmt/eval.hpp"
#include "cnmt/pretrain.hpp"
#include "cnmt/probes.hpp"
#include "cnmt/seq2seq.hpp"
#include "cnmt/toy_corpora.hpp"

// Desk-scale studies on the toy corpora, shared by the command line tool and
// the acceptance tests.
namespace cnmt::experiments {

using Logger = std::function<void(const std::string&)>;

struct Corpora {
    Vocabulary source_vocab;
    Vocabulary target_vocab;
    std::vector<TextPair> train;
    std::vector<SentencePair> train_ids;
};

/// Vocabularies over the source and target side of `train`.
Corpora prepare(std::vector<TextPair> train);

// ---------------------------------------------------------- productivity

struct ProductivitySetup {
    std::size_t train_pairs = 2000;
    std::size_t eval_pairs = 100;    // sentences, paired into eval_pairs / 2 concatenations
    std::size_t probe_pairs = 1000;  // held-out sentences paired for the probes
    double probe_train_fraction = 0.8;
    ModelConfig model;
    TrainConfig train;
    probes::ProbeConfig probe;
    std::uint64_t seed = 0;
};

struct ProductivityResult {
    double single_bleu = 0.0;
    double concat_bleu = 0.0;
    probes::BowReport final_first;
    probes::BowReport intermediate_first;
    probes::BowReport final_full;
    probes::SubstringReport substring;
    std::vector<double> train_loss;
};

ProductivityResult run_productivity(const ProductivitySetup& setup, const Logger& log = {});
nlohmann::ordered_json to_json(const ProductivityResult& r);

struct ConcatBowReports {
    probes::BowReport final_first;
    probes::BowReport intermediate_first;
    probes::BowReport final_full;
};

/// Pairs the sentences of `pool` into concatenations, splits them
/// train/eval and runs the three bag-of-words probe conditions.
ConcatBowReports concat_bow_probes(const Seq2Seq<float>& model, const std::vector<TextPair>& pool,
                                   const probes::ProbeConfig& config, double train_fraction, std::uint64_t seed);

probes::SubstringReport concat_substring_probe(const Seq2Seq<float>& model, const std::vector<TextPair>& pool,
                                               const probes::ProbeConfig& config, double train_fraction,
                                               std::uint64_t seed);

// ------------------------------------------------------ novel word study

struct DaxySetup {
    toy::DaxyConfig corpus;
    ModelConfig model;
    TrainConfig train;              // first phase, base corpus only
    std::size_t continued_epochs = 20;  // second phase, base plus the repeated sentence
    PretrainConfig pretrain;
    probes::ProbeConfig probe;
    probes::PenultimateConfig penultimate;
    std::size_t candidates = 32;
    std::size_t resamples = 1000;
    std::uint64_t seed = 0;
    bool run_probes = true;
};

struct DaxyResult {
    BleuReport baseline_bleu;
    BleuReport pretrained_bleu;
    double baseline_rate = 0.0;
    double pretrained_rate = 0.0;
    SignificanceReport significance;
    probes::CosineReport cosine;
    probes::PenultimateReport penultimate;
    probes::SeenUnseenReport seen_unseen;
    std::vector<std::vector<std::string>> baseline_hypotheses;
    std::vector<std::vector<std::string>> pretrained_hypotheses;
};

/// Penultimate-probe templates: trained on "i am X" / "you are X" and
/// evaluated on the remaining evaluation frames.
std::vector<std::string> penultimate_train_templates();
std::vector<std::string> penultimate_eval_templates();

DaxyResult run_daxy(const DaxySetup& setup, const Logger& log = {});
nlohmann::ordered_json to_json(const DaxyResult& r);

/// Splits `n` indices into a seeded shuffled (train, eval) partition.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(std::size_t n, double train_fraction,
                                                                              std::uint64_t seed);

}  // namespace cnmt::experiments
