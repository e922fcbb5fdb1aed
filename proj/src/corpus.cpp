#include "cnmt/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <set>

#include "json.hpp"

#include "cnmt/errors.hpp"
#include "cnmt/rng.hpp"

namespace cnmt {

BowVector bag_of_words_vector(const IdSequence& ids, const Vocabulary& vocab) {
    BowVector bow(vocab.size(), 0);
    for (TokenId id : ids) {
        if (id < 0 || static_cast<std::size_t>(id) >= vocab.size()) {
            throw IndexError("id " + std::to_string(id) + " outside vocabulary of size " +
                             std::to_string(vocab.size()));
        }
        if (!Vocabulary::is_special(id)) bow[static_cast<std::size_t>(id)] = 1;
    }
    return bow;
}

std::vector<TextPair> read_parallel_corpus(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open corpus " + path.string());
    std::vector<TextPair> pairs;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto tab = line.find('\t');
        if (tab == std::string::npos || line.find('\t', tab + 1) != std::string::npos) {
            throw InputError(path.string() + ": line " + std::to_string(lineno) + ": expected exactly one tab");
        }
        pairs.push_back({line.substr(0, tab), line.substr(tab + 1)});
    }
    return pairs;
}

void write_parallel_corpus(const std::filesystem::path& path, const std::vector<TextPair>& pairs) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write corpus " + path.string());
    for (const auto& p : pairs) out << p.source << '\t' << p.target << '\n';
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open " + path.string());
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(line);
    }
    return lines;
}

void write_lines(const std::filesystem::path& path, const std::vector<std::string>& lines) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write " + path.string());
    for (const auto& l : lines) out << l << '\n';
}

std::vector<std::vector<std::string>> tokenized_sources(const std::vector<TextPair>& pairs) {
    std::vector<std::vector<std::string>> out;
    out.reserve(pairs.size());
    for (const auto& p : pairs) out.push_back(tokenize(p.source));
    return out;
}

std::vector<std::vector<std::string>> tokenized_targets(const std::vector<TextPair>& pairs) {
    std::vector<std::vector<std::string>> out;
    out.reserve(pairs.size());
    for (const auto& p : pairs) out.push_back(tokenize(p.target));
    return out;
}

std::vector<SentencePair> encode_corpus(const std::vector<TextPair>& pairs, const Vocabulary& source_vocab,
                                        const Vocabulary& target_vocab) {
    std::vector<SentencePair> out;
    out.reserve(pairs.size());
    for (const auto& p : pairs) {
        out.push_back({encode_sentence(tokenize(p.source), source_vocab),
                       encode_sentence(tokenize(p.target), target_vocab)});
    }
    return out;
}

// ------------------------------------------------------------ templates

namespace {

std::vector<std::string> split_ws(const std::string& s) {
    // Slot detection happens before lowercasing, so split without tokenize().
    std::vector<std::string> out;
    std::string cur;
    for (char ch : s) {
        if (ch == ' ' || ch == '\t') {
            if (!cur.empty()) out.push_back(std::move(cur));
            cur.clear();
        } else {
            cur.push_back(ch);
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

std::size_t count_slots(const std::string& tmpl) {
    auto toks = split_ws(tmpl);
    return static_cast<std::size_t>(std::count(toks.begin(), toks.end(), kSlotMarker));
}

}  // namespace

std::string render_template(const std::string& tmpl, const std::string& filler) {
    auto toks = split_ws(tmpl);
    for (auto& t : toks) {
        if (t == kSlotMarker) t = filler;
    }
    return join_tokens(toks);
}

TemplateSpec TemplateSpec::from_json_text(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(std::string("template spec is not valid JSON: ") + e.what());
    }
    TemplateSpec spec;
    try {
        spec.templates = j.at("templates").get<std::vector<std::string>>();
        spec.fillers = j.at("fillers").get<std::vector<std::string>>();
        spec.lexicon = j.at("lexicon").get<std::map<std::string, std::string>>();
        spec.target_templates = j.at("target_templates").get<std::vector<std::string>>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("template spec: ") + e.what());
    }
    return spec;
}

TemplateSpec TemplateSpec::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open template spec " + path.string());
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return from_json_text(text);
}

std::string TemplateSpec::to_json_text() const {
    nlohmann::ordered_json j;
    j["templates"] = templates;
    j["fillers"] = fillers;
    j["lexicon"] = lexicon;
    j["target_templates"] = target_templates;
    return j.dump(2) + "\n";
}

void TemplateSpec::validate() const {
    if (templates.size() != target_templates.size()) {
        throw ConfigError("template spec has " + std::to_string(templates.size()) + " templates but " +
                          std::to_string(target_templates.size()) + " target templates");
    }
    for (std::size_t i = 0; i < templates.size(); ++i) {
        if (count_slots(templates[i]) != 1) {
            throw ConfigError("template '" + templates[i] + "' must contain exactly one slot X");
        }
        if (count_slots(target_templates[i]) != 1) {
            throw ConfigError("target template '" + target_templates[i] + "' must contain exactly one slot X");
        }
    }
    for (const auto& f : fillers) {
        if (!lexicon.count(f)) throw ConfigError("no translation for filler '" + f + "'");
    }
}

std::vector<TextPair> gen_template_corpus(const TemplateSpec& spec) {
    spec.validate();
    std::vector<TextPair> out;
    for (std::size_t t = 0; t < spec.templates.size(); ++t) {
        for (const auto& filler : spec.fillers) {
            out.push_back({render_template(spec.templates[t], filler),
                           render_template(spec.target_templates[t], spec.lexicon.at(filler))});
        }
    }
    return out;
}

// --------------------------------------------------------- concatenation

namespace {

std::vector<std::pair<std::size_t, std::size_t>> make_pairing(std::size_t n, PairingScheme scheme,
                                                              std::uint64_t seed) {
    if (n < 2) throw InputError("concatenation needs at least 2 sentences, got " + std::to_string(n));
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    if (scheme == PairingScheme::kRandom) {
        Rng rng(seed);
        rng.shuffle(order);
    }
    std::vector<std::pair<std::size_t, std::size_t>> out;
    for (std::size_t k = 0; k + 1 < n; k += 2) out.emplace_back(order[k], order[k + 1]);
    return out;
}

IdSequence join_ids(const IdSequence& a, const IdSequence& b) {
    // a = <bos> a.. <eos>, b = <bos> b.. <eos>  ->  <bos> a.. b.. <eos>
    IdSequence out(a.begin(), a.end() - 1);
    out.insert(out.end(), b.begin() + 1, b.end());
    return out;
}

void require_framed(const IdSequence& ids) {
    if (ids.size() < 2 || ids.front() != Vocabulary::kBos || ids.back() != Vocabulary::kEos) {
        throw InputError("sentence must start with <bos> and end with <eos>");
    }
}

}  // namespace

std::vector<ConcatExample> build_concat_eval_set(const std::vector<SentencePair>& pairs, PairingScheme scheme,
                                                 std::uint64_t seed) {
    std::vector<ConcatExample> out;
    for (auto [i, j] : make_pairing(pairs.size(), scheme, seed)) {
        const auto& a = pairs[i];
        const auto& b = pairs[j];
        require_framed(a.source);
        require_framed(b.source);
        require_framed(a.target);
        require_framed(b.target);
        ConcatExample ex;
        ex.pair.source = join_ids(a.source, b.source);
        ex.pair.target = join_ids(a.target, b.target);
        ex.first = i;
        ex.second = j;
        ex.boundary = a.source.size() - 2;
        out.push_back(std::move(ex));
    }
    return out;
}

std::vector<TextPair> concat_text_pairs(const std::vector<TextPair>& pairs, PairingScheme scheme,
                                        std::uint64_t seed) {
    std::vector<TextPair> out;
    for (auto [i, j] : make_pairing(pairs.size(), scheme, seed)) {
        auto src = tokenize(pairs[i].source);
        auto src2 = tokenize(pairs[j].source);
        src.insert(src.end(), src2.begin(), src2.end());
        auto tgt = tokenize(pairs[i].target);
        auto tgt2 = tokenize(pairs[j].target);
        tgt.insert(tgt.end(), tgt2.begin(), tgt2.end());
        out.push_back({join_tokens(src), join_tokens(tgt)});
    }
    return out;
}

// -------------------------------------------------------------- batching

IdSequence Batch::source_row(std::size_t b) const {
    auto begin = source.begin() + static_cast<std::ptrdiff_t>(b * source_width);
    return IdSequence(begin, begin + static_cast<std::ptrdiff_t>(source_lengths[b]));
}

IdSequence Batch::target_row(std::size_t b) const {
    auto begin = target.begin() + static_cast<std::ptrdiff_t>(b * target_width);
    return IdSequence(begin, begin + static_cast<std::ptrdiff_t>(target_lengths[b]));
}

std::vector<Batch> batch_pad(const std::vector<SentencePair>& pairs, std::size_t batch_size) {
    if (pairs.empty()) throw InputError("batch_pad: no sentence pairs");
    if (batch_size == 0) throw ConfigError("batch size must be positive");
    std::vector<Batch> out;
    for (std::size_t start = 0; start < pairs.size(); start += batch_size) {
        const std::size_t end = std::min(pairs.size(), start + batch_size);
        Batch b;
        b.size = end - start;
        for (std::size_t k = start; k < end; ++k) {
            b.source_width = std::max(b.source_width, pairs[k].source.size());
            b.target_width = std::max(b.target_width, pairs[k].target.size());
        }
        b.source.assign(b.size * b.source_width, Vocabulary::kPad);
        b.target.assign(b.size * b.target_width, Vocabulary::kPad);
        for (std::size_t k = start; k < end; ++k) {
            const std::size_t row = k - start;
            std::copy(pairs[k].source.begin(), pairs[k].source.end(), b.source.begin() + row * b.source_width);
            std::copy(pairs[k].target.begin(), pairs[k].target.end(), b.target.begin() + row * b.target_width);
            b.source_lengths.push_back(pairs[k].source.size());
            b.target_lengths.push_back(pairs[k].target.size());
        }
        out.push_back(std::move(b));
    }
    return out;
}

}  // namespace cnmt
