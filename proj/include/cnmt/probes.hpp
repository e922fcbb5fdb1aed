#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "cnmt/corpus.hpp"
#include "cnmt/seq2seq.hpp"

// Diagnostic classifiers trained on frozen encoder states. None of these
// touch the translation model's parameters.
namespace cnmt::probes {

struct ProbeConfig {
    std::size_t hidden = 0;  // 0 means twice the encoder hidden size
    std::size_t epochs = 50;
    std::size_t batch = 32;
    double lr = 1e-3;
    double threshold = 0.5;  // on sigmoid(logit)
    std::uint64_t seed = 0;
};

/// Three linear layers with tanh after the first two.
class ProbeMlp {
public:
    ProbeMlp(std::size_t input, std::size_t hidden, std::size_t output, std::uint64_t seed);

    std::size_t input_width() const { return w1_.cols(); }
    std::size_t hidden_width() const { return w1_.rows(); }
    std::size_t output_width() const { return w3_.rows(); }

    /// Logits for a [B x input] batch.
    Tensor<float> forward(const Tensor<float>& x) const;

    /// Minimizes bce_with_logits against multi-hot `targets` [N x output].
    /// Returns the per-epoch mean loss.
    std::vector<double> fit(const Tensor<float>& inputs, const Tensor<float>& targets, const ProbeConfig& config);

    Tensor<float>& output_weight() { return w3_; }
    Tensor<float>& output_bias() { return b3_; }

private:
    Tensor<float> w1_, b1_, w2_, b2_, w3_, b3_;
};

// ----------------------------------------------------------- bag of words

enum class StateSelector { kFinal, kIntermediate };

struct TraceExample {
    EncoderTrace<float> trace;
    std::optional<std::size_t> boundary;  // required by kIntermediate
    BowVector target;
};

struct BowReport {
    double precision = 0.0;  // percentages
    double recall = 0.0;
    double f1 = 0.0;
    double threshold = 0.5;
    std::string condition;
};

struct Confusion {
    std::size_t tp = 0, fp = 0, fn = 0;
};

/// Percent precision/recall/F1 from micro-averaged counts.
BowReport report_from_confusion(const Confusion& c, double threshold, std::string condition);

Vector<float> select_state(const TraceExample& example, StateSelector selector);

/// Trains a ProbeMlp on `train` and reports micro-averaged P/R/F1 on `eval`.
BowReport run_bow_probe(std::span<const TraceExample> train, std::span<const TraceExample> eval,
                        StateSelector selector, const ProbeConfig& config, const std::string& condition);

// ----------------------------------------------------------------- substring

struct SubstringExample {
    Vector<float> candidate;  // final state of a sentence encoded alone
    Vector<float> whole;      // final state of the concatenation
    bool positive = false;
    int position = 0;  // 1 or 2 for positives, 0 for negatives
};

struct SubstringReport {
    double accuracy = 0.0;  // percentages
    double first_recall = 0.0;
    double second_recall = 0.0;
};

/// Positives pair each constituent with its concatenation; negatives pair
/// the concatenation with a sentence from a different concatenation, two
/// per concatenation so classes are balanced.
std::vector<SubstringExample> build_substring_examples(const Seq2Seq<float>& model,
                                                       const std::vector<SentencePair>& singles,
                                                       const std::vector<ConcatExample>& concat, std::uint64_t seed);

SubstringReport run_substring_probe(std::span<const SubstringExample> train, std::span<const SubstringExample> eval,
                                    const ProbeConfig& config);

// ------------------------------------------------------------------ cosine

double cosine_similarity(const Vector<float>& a, const Vector<float>& b);

struct WordScore {
    std::string word;
    double value = 0.0;
};

struct CosineReport {
    std::vector<WordScore> average_similarity;  // filler order
};

/// For every filler and template, cosine between the encoder state at the
/// token before the filler and the state at the filler, averaged over
/// templates.
CosineReport run_cosine_analysis(const Seq2Seq<float>& model, const TemplateSpec& spec);

// ------------------------------------------------------------- penultimate

struct PenultimateConfig {
    std::size_t epochs = 300;
    std::size_t batch = 16;
    double lr = 1e-2;
    std::uint64_t seed = 0;
};

struct PenultimateReport {
    std::vector<WordScore> accuracy;  // per evaluated filler, in [0,1]
    std::size_t candidates = 0;
};

/// Linear softmax classifier over `candidates` from the final encoder state
/// of "template with X = candidate". Trained on train_templates x
/// candidates, evaluated per word on eval_templates x eval_fillers (all
/// candidates when empty).
PenultimateReport run_penultimate_probe(const Seq2Seq<float>& model, const std::vector<std::string>& train_templates,
                                        const std::vector<std::string>& eval_templates,
                                        const std::vector<std::string>& candidates, const PenultimateConfig& config,
                                        const std::vector<std::string>& eval_fillers = {});

// ------------------------------------------------------------ seen/unseen

struct TrackedWordReport {
    double precision = 0.0;  // fractions in [0,1]
    double recall = 0.0;
    std::size_t sentences = 0;
};

struct SeenUnseenReport {
    std::string tracked;
    TrackedWordReport seen;
    TrackedWordReport unseen;
};

/// Trains a final-state BoW probe on the seen sentences and scores the
/// tracked word's bit separately on seen and unseen sentences.
SeenUnseenReport run_seen_unseen_bow(const Seq2Seq<float>& model, const std::vector<std::string>& seen,
                                     const std::vector<std::string>& unseen, const std::string& tracked,
                                     const ProbeConfig& config);

// ------------------------------------------------------------ state dumps

// "HSDP" | u32 version | records until end of file, each:
// u32 example id | u32 T | u32 H | T*H little-endian f32 | u8 has_boundary |
// u32 boundary (present only when has_boundary is 1)
struct HiddenRecord {
    std::uint32_t id = 0;
    MatrixRM<float> states;
    std::optional<std::uint32_t> boundary;
};

void write_hidden_dump(const std::filesystem::path& path, const std::vector<HiddenRecord>& records);
std::vector<HiddenRecord> read_hidden_dump(const std::filesystem::path& path);

// --------------------------------------------------------------- reports

nlohmann::ordered_json to_json(const BowReport& r);
nlohmann::ordered_json to_json(const SubstringReport& r);
nlohmann::ordered_json to_json(const CosineReport& r);
nlohmann::ordered_json to_json(const PenultimateReport& r);
nlohmann::ordered_json to_json(const SeenUnseenReport& r);

}  // namespace cnmt::probes
