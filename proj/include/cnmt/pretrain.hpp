#pragma once

#include <filesystem>
#include <vector>

#include "cnmt/corpus.hpp"
#include "cnmt/seq2seq.hpp"

namespace cnmt {

/// A source-side encoder that can be trained on its own and later copied
/// into a translation model.
template <typename T>
struct StandaloneEncoder {
    Vocabulary source_vocab;
    ModelConfig config;
    Encoder<T> encoder;

    /// Same initial weights as the encoder of a Seq2Seq built from the same
    /// vocabulary and config.
    static StandaloneEncoder fresh(Vocabulary source_vocab, const ModelConfig& config);

    EncoderTrace<T> encode(const IdSequence& ids) const { return encoder.encode(ids); }
    std::vector<std::pair<std::string, const Tensor<T>*>> named_parameters() const;
};

/// Linear map from the final encoder state to one logit per source
/// vocabulary entry.
template <typename T>
struct BowPretrainHead {
    Tensor<T> weight;  // [V x H]
    Tensor<T> bias;    // [V]
};

struct PretrainConfig {
    std::size_t epochs = 20;
    std::size_t batch = 32;
    AdamConfig adam;
    double clip = 5.0;
    std::uint64_t seed = 0;
    bool zero_head = false;  // start the head at zero instead of uniform
};

template <typename T>
BowPretrainHead<T> make_pretrain_head(std::size_t vocab_size, const ModelConfig& config, bool zero);

/// Summed binary cross-entropy between sigmoid(head(h_T)) and the
/// sentence's bag of words. Adds `scale` times the gradient into encoder and
/// head when `accumulate` is set.
template <typename T>
T bow_pretrain_loss(Encoder<T>& encoder, BowPretrainHead<T>& head, const IdSequence& source,
                    const BowVector& target, T scale, bool accumulate);

/// Trains embeddings, encoder LSTM and a fresh head on the bag-of-words
/// objective, then discards the head. Returns the per-epoch mean
/// per-sentence loss.
template <typename T>
TrainingLog pretrain_encoder(StandaloneEncoder<T>& encoder, const std::vector<IdSequence>& sources,
                             const PretrainConfig& config, const EpochCallback& on_epoch = {});

/// Copies source embeddings and encoder LSTM into `model` bit-exactly.
/// Throws TransferError when sizes or the source vocabulary differ.
template <typename T>
void transfer_encoder(const StandaloneEncoder<T>& pretrained, Seq2Seq<T>& model);

template <typename T>
void save_encoder_checkpoint(const StandaloneEncoder<T>& encoder, const std::filesystem::path& path);
template <typename T>
StandaloneEncoder<T> load_encoder_checkpoint(const std::filesystem::path& path);

}  // namespace cnmt
