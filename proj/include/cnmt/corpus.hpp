#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "cnmt/types.hpp"
#include "cnmt/vocab.hpp"

namespace cnmt {

/// A raw parallel sentence, before tokenization.
struct TextPair {
    std::string source;
    std::string target;

    bool operator==(const TextPair&) const = default;
};

struct SentencePair {
    IdSequence source;  // <bos> ... <eos>
    IdSequence target;  // <bos> ... <eos>

    bool operator==(const SentencePair&) const = default;
};

/// Multi-hot presence vector over a vocabulary; specials are always 0.
using BowVector = std::vector<std::uint8_t>;

BowVector bag_of_words_vector(const IdSequence& ids, const Vocabulary& vocab);

/// Reads "source<TAB>target" lines. Lines must contain exactly one tab.
std::vector<TextPair> read_parallel_corpus(const std::filesystem::path& path);
void write_parallel_corpus(const std::filesystem::path& path, const std::vector<TextPair>& pairs);

/// One sentence per line (used for hypothesis and reference files).
std::vector<std::string> read_lines(const std::filesystem::path& path);
void write_lines(const std::filesystem::path& path, const std::vector<std::string>& lines);

std::vector<std::vector<std::string>> tokenized_sources(const std::vector<TextPair>& pairs);
std::vector<std::vector<std::string>> tokenized_targets(const std::vector<TextPair>& pairs);

std::vector<SentencePair> encode_corpus(const std::vector<TextPair>& pairs, const Vocabulary& source_vocab,
                                        const Vocabulary& target_vocab);

// ------------------------------------------------------------ templates

/// Templates use the standalone token "X" as their single slot.
struct TemplateSpec {
    std::vector<std::string> templates;
    std::vector<std::string> fillers;
    std::map<std::string, std::string> lexicon;  // filler -> target-side word
    std::vector<std::string> target_templates;   // parallel to templates

    static TemplateSpec from_json_text(const std::string& text);
    static TemplateSpec load(const std::filesystem::path& path);
    std::string to_json_text() const;
    /// Checks slot counts, template/target-template parity and filler coverage.
    void validate() const;
};

inline constexpr const char* kSlotMarker = "X";

/// Replaces the slot token in `tmpl` with `filler`.
std::string render_template(const std::string& tmpl, const std::string& filler);

/// Templates x fillers, template-major order.
std::vector<TextPair> gen_template_corpus(const TemplateSpec& spec);

// --------------------------------------------------------- concatenation

enum class PairingScheme { kAdjacent, kRandom };

struct ConcatExample {
    SentencePair pair;
    std::size_t first = 0;   // input index of the first constituent
    std::size_t second = 0;  // input index of the second constituent
    /// Source position (0-based, <bos> at 0) of the first constituent's last
    /// token, i.e. where the encoder has just finished reading it.
    std::size_t boundary = 0;
};

/// Joins disjoint pairs of sentences into single examples with one leading
/// <bos> and one trailing <eos>. N inputs give floor(N/2) outputs.
std::vector<ConcatExample> build_concat_eval_set(const std::vector<SentencePair>& pairs,
                                                 PairingScheme scheme = PairingScheme::kAdjacent,
                                                 std::uint64_t seed = 0);

/// Text-level counterpart used for translation and BLEU on concatenations.
std::vector<TextPair> concat_text_pairs(const std::vector<TextPair>& pairs,
                                        PairingScheme scheme = PairingScheme::kAdjacent, std::uint64_t seed = 0);

// -------------------------------------------------------------- batching

struct Batch {
    std::size_t size = 0;
    std::size_t source_width = 0;
    std::size_t target_width = 0;
    std::vector<TokenId> source;  // [size x source_width], <pad>-filled
    std::vector<TokenId> target;  // [size x target_width], <pad>-filled
    std::vector<std::size_t> source_lengths;
    std::vector<std::size_t> target_lengths;

    IdSequence source_row(std::size_t b) const;
    IdSequence target_row(std::size_t b) const;
};

std::vector<Batch> batch_pad(const std::vector<SentencePair>& pairs, std::size_t batch_size);

}  // namespace cnmt
