#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "cnmt/corpus.hpp"
#include "cnmt/nn.hpp"
#include "cnmt/optim.hpp"
#include "cnmt/rng.hpp"
#include "cnmt/tensor.hpp"
#include "cnmt/vocab.hpp"

namespace cnmt {

struct ModelConfig {
    std::size_t hidden = 64;
    std::size_t embed = 64;
    std::uint64_t seed = 0;

    bool operator==(const ModelConfig&) const = default;
};

template <typename T>
using NamedParams = std::vector<std::pair<std::string, Tensor<T>*>>;

template <typename T>
std::vector<Tensor<T>*> param_list(const NamedParams<T>& named);

/// Encoder hidden states for one unpadded sentence.
template <typename T>
struct EncoderTrace {
    MatrixRM<T> states;  // [T x H], row t = h_{t+1}
    Vector<T> final_cell;

    std::size_t length() const { return static_cast<std::size_t>(states.rows()); }
    std::size_t hidden() const { return static_cast<std::size_t>(states.cols()); }
    Vector<T> state(std::size_t t) const { return states.row(static_cast<Eigen::Index>(t)).transpose(); }
    Vector<T> final_state() const { return state(length() - 1); }
};

/// Embedding table plus a unidirectional LSTM run from a zero state.
template <typename T>
struct Encoder {
    Tensor<T> embedding;  // [V_src x E]
    nn::LstmParams<T> lstm;

    struct Tape {
        IdSequence ids;
        std::vector<nn::LstmStep<T>> steps;
    };

    static Encoder init(std::size_t vocab_size, const ModelConfig& config);

    EncoderTrace<T> encode(const IdSequence& ids) const;
    EncoderTrace<T> encode(const IdSequence& ids, Tape& tape) const;

    /// dstates[t] is dL/dh_{t+1} from outside the recurrence; dcell is
    /// dL/dc_T.
    void backward(const Tape& tape, const MatrixRM<T>& dstates, const Vector<T>& dcell);

    void append_params(NamedParams<T>& out, const std::string& prefix);
};

/// Luong general attention: softmax_s(h_dec' W_a h_s) over the first
/// `valid_length` states (all of them when 0); later rows get zero weight.
template <typename T>
Vector<T> attention_weights(const Vector<T>& h_dec, const MatrixRM<T>& states, const Tensor<T>& w_a,
                            std::size_t valid_length = 0);

/// Backward of attention_weights over all rows: given dL/dalpha, adds into
/// dh_dec, dstates and the gradient of W_a (when it has one).
template <typename T>
void attention_backward(const Vector<T>& h_dec, const MatrixRM<T>& states, Tensor<T>& w_a, const Vector<T>& alpha,
                        const Vector<T>& dalpha, Vector<T>& dh_dec, MatrixRM<T>& dstates);

template <typename T>
struct DecoderState {
    Vector<T> h;
    Vector<T> c;
};

template <typename T>
class Seq2Seq {
public:
    Seq2Seq(Vocabulary source_vocab, Vocabulary target_vocab, ModelConfig config);

    const ModelConfig& config() const { return config_; }
    const Vocabulary& source_vocab() const { return source_vocab_; }
    const Vocabulary& target_vocab() const { return target_vocab_; }

    EncoderTrace<T> encode(const IdSequence& ids) const { return encoder.encode(ids); }

    DecoderState<T> initial_state(const EncoderTrace<T>& trace) const;

    /// One decoder step on y_prev; advances `state` and returns logits over
    /// the target vocabulary.
    Vector<T> decode_step(TokenId y_prev, DecoderState<T>& state, const EncoderTrace<T>& trace) const;

    /// Argmax decoding from <bos>; stops at <eos> or after max_len tokens.
    /// The result excludes <bos>/<eos>.
    IdSequence greedy_translate(const IdSequence& source, std::size_t max_len) const;

    /// Teacher-forced summed token loss for one pair. Gradients (scaled by
    /// `scale`) are accumulated when `accumulate` is set.
    T forward_backward(const SentencePair& pair, T scale, bool accumulate = true);

    NamedParams<T> named_parameters();
    std::vector<std::pair<std::string, const Tensor<T>*>> named_parameters() const;

    void enable_grads();
    void zero_grads();

    Encoder<T> encoder;
    Tensor<T> target_embedding;  // [V_tgt x E]
    nn::LstmParams<T> decoder;
    Tensor<T> w_a;    // [H x H]
    Tensor<T> w_c;    // [H x 2H]
    Tensor<T> w_out;  // [V_tgt x H]

private:
    Vocabulary source_vocab_;
    Vocabulary target_vocab_;
    ModelConfig config_;
};

struct TrainConfig {
    std::size_t epochs = 10;
    std::size_t batch = 32;
    AdamConfig adam;
    double clip = 5.0;
    std::uint64_t seed = 0;
    bool shuffle = true;
};

struct TrainingLog {
    std::vector<double> epoch_loss;  // mean token loss per epoch
};

using EpochCallback = std::function<void(std::size_t epoch, double loss)>;

/// Teacher-forced cross-entropy training with Adam and gradient clipping.
template <typename T>
TrainingLog train(Seq2Seq<T>& model, const std::vector<SentencePair>& corpus, const TrainConfig& config,
                  const EpochCallback& on_epoch = {});

/// Default decoding cap: 2 + 2 x (content length of the source).
std::size_t default_max_len(const IdSequence& source);

template <typename T>
std::vector<std::vector<std::string>> translate_all(const Seq2Seq<T>& model, const std::vector<TextPair>& pairs,
                                                    std::size_t max_len = 0);

/// FNV-1a over names, shapes and raw parameter bytes.
template <typename T>
std::uint64_t parameter_hash(const std::vector<std::pair<std::string, const Tensor<T>*>>& params);

/// Uniform(-1/sqrt(H), 1/sqrt(H)) for weights, Normal(0, 0.1) for
/// embeddings; each tensor draws from its own seed stream.
template <typename T>
void init_uniform(Tensor<T>& t, std::size_t hidden, std::uint64_t seed);
template <typename T>
void init_normal(Tensor<T>& t, double stddev, std::uint64_t seed);

}  // namespace cnmt
