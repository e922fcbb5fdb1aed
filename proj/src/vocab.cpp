#include "cnmt/vocab.hpp"

#include <algorithm>
#include <fstream>
#include <map>

#include "cnmt/errors.hpp"

namespace cnmt {

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> out;
    std::string current;
    for (char ch : text) {
        const auto u = static_cast<unsigned char>(ch);
        if (u == ' ' || u == '\t' || u == '\n' || u == '\r' || u == '\v' || u == '\f') {
            if (!current.empty()) out.push_back(std::move(current));
            current.clear();
        } else {
            current.push_back(u < 128 ? static_cast<char>(std::tolower(u)) : ch);
        }
    }
    if (!current.empty()) out.push_back(std::move(current));
    return out;
}

std::string join_tokens(const std::vector<std::string>& tokens) {
    std::string out;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (i) out.push_back(' ');
        out += tokens[i];
    }
    return out;
}

const std::vector<std::string>& Vocabulary::specials() {
    static const std::vector<std::string> kSpecials = {"<pad>", "<bos>", "<eos>", "<unk>"};
    return kSpecials;
}

Vocabulary::Vocabulary() {
    for (const auto& tok : specials()) {
        index_.emplace(tok, static_cast<TokenId>(tokens_.size()));
        tokens_.push_back(tok);
    }
}

Vocabulary Vocabulary::from_tokens(std::vector<std::string> tokens) {
    const auto& sp = specials();
    if (tokens.size() < sp.size() || !std::equal(sp.begin(), sp.end(), tokens.begin())) {
        throw InputError("vocabulary must start with <pad>, <bos>, <eos>, <unk>");
    }
    Vocabulary v;
    v.tokens_ = std::move(tokens);
    v.index_.clear();
    for (std::size_t i = 0; i < v.tokens_.size(); ++i) {
        if (v.tokens_[i].empty()) throw InputError("empty token at vocabulary id " + std::to_string(i));
        auto [it, inserted] = v.index_.emplace(v.tokens_[i], static_cast<TokenId>(i));
        if (!inserted) throw InputError("duplicate vocabulary token '" + v.tokens_[i] + "'");
    }
    return v;
}

Vocabulary Vocabulary::build(const std::vector<std::vector<std::string>>& corpus, std::size_t min_count) {
    if (corpus.empty()) throw InputError("cannot build a vocabulary from an empty corpus");
    std::map<std::string, std::size_t> counts;
    for (const auto& sentence : corpus) {
        for (const auto& tok : sentence) ++counts[tok];
    }
    std::vector<std::pair<std::string, std::size_t>> ranked;
    for (auto& [tok, n] : counts) {
        if (n >= min_count && std::find(specials().begin(), specials().end(), tok) == specials().end()) {
            ranked.emplace_back(tok, n);
        }
    }
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    std::vector<std::string> tokens = specials();
    for (auto& [tok, n] : ranked) tokens.push_back(tok);
    return from_tokens(std::move(tokens));
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open vocabulary file " + path.string());
    std::vector<std::string> tokens;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        tokens.push_back(line);
    }
    return from_tokens(std::move(tokens));
}

void Vocabulary::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write vocabulary file " + path.string());
    for (const auto& tok : tokens_) out << tok << '\n';
}

TokenId Vocabulary::id(std::string_view token) const {
    auto found = find(token);
    return found ? *found : kUnk;
}

std::optional<TokenId> Vocabulary::find(std::string_view token) const {
    auto it = index_.find(std::string(token));
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

const std::string& Vocabulary::token(TokenId id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
        throw IndexError("token id " + std::to_string(id) + " outside vocabulary of size " +
                         std::to_string(tokens_.size()));
    }
    return tokens_[static_cast<std::size_t>(id)];
}

IdSequence encode_sentence(const std::vector<std::string>& tokens, const Vocabulary& vocab) {
    IdSequence ids;
    ids.reserve(tokens.size() + 2);
    ids.push_back(Vocabulary::kBos);
    for (const auto& tok : tokens) ids.push_back(vocab.id(tok));
    ids.push_back(Vocabulary::kEos);
    return ids;
}

std::vector<std::string> decode_ids(const IdSequence& ids, const Vocabulary& vocab) {
    std::vector<std::string> out;
    for (TokenId id : ids) {
        if (id == Vocabulary::kPad || id == Vocabulary::kBos || id == Vocabulary::kEos) continue;
        out.push_back(vocab.token(id));
    }
    return out;
}

}  // namespace cnmt
