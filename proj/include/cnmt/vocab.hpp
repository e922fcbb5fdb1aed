#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "cnmt/types.hpp"

namespace cnmt {

/// Lowercases and splits on runs of whitespace. Bytes outside ASCII are
/// passed through untouched, so UTF-8 content survives.
std::vector<std::string> tokenize(std::string_view text);

std::string join_tokens(const std::vector<std::string>& tokens);

class Vocabulary {
public:
    static constexpr TokenId kPad = 0;
    static constexpr TokenId kBos = 1;
    static constexpr TokenId kEos = 2;
    static constexpr TokenId kUnk = 3;
    static constexpr TokenId kNumSpecials = 4;
    static const std::vector<std::string>& specials();

    /// Specials only.
    Vocabulary();

    /// Ids 0..3 must be the specials in fixed order; the rest must be unique.
    static Vocabulary from_tokens(std::vector<std::string> tokens);

    /// Tokens seen at least min_count times, ordered by descending
    /// frequency with lexicographic tie-breaking, from id 4 upward.
    static Vocabulary build(const std::vector<std::vector<std::string>>& corpus, std::size_t min_count = 1);

    static Vocabulary load(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;

    std::size_t size() const noexcept { return tokens_.size(); }
    TokenId id(std::string_view token) const;  // <unk> when absent
    std::optional<TokenId> find(std::string_view token) const;
    bool contains(std::string_view token) const { return find(token).has_value(); }
    const std::string& token(TokenId id) const;
    const std::vector<std::string>& tokens() const noexcept { return tokens_; }

    static bool is_special(TokenId id) noexcept { return id >= 0 && id < kNumSpecials; }

    bool operator==(const Vocabulary& other) const { return tokens_ == other.tokens_; }

private:
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, TokenId> index_;
};

/// [<bos>] + ids (with <unk> for unknown tokens) + [<eos>].
IdSequence encode_sentence(const std::vector<std::string>& tokens, const Vocabulary& vocab);

/// Inverse of encode_sentence up to unknowns: drops <pad>/<bos>/<eos>,
/// keeps <unk> as its surface form.
std::vector<std::string> decode_ids(const IdSequence& ids, const Vocabulary& vocab);

}  // namespace cnmt
