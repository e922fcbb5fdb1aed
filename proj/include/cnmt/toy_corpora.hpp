#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cnmt/corpus.hpp"

namespace cnmt::toy {

// ------------------------------------------------- phrase grammar corpus
//
// A small English-like source language translated into a French-like target
// with a fixed lexicon and local reordering: adjectives follow their noun on
// the target side, and "does not V" becomes "ne V pas".

/// `count` distinct sentence pairs, sampled deterministically from `seed`.
std::vector<TextPair> grammar_corpus(std::size_t count, std::uint64_t seed);

// --------------------------------------------- single-context word corpus

struct AdjectiveEntry {
    std::string source;
    std::string target;
};

/// The multi-context adjectives of the base corpus (31 entries, starting
/// with tall, ok, fat, fit).
const std::vector<AdjectiveEntry>& base_adjectives();

struct DaxyConfig {
    std::string novel_word = "daxy";
    std::string novel_translation = "daxiste";
    std::size_t repetitions = 100;
};

struct DaxyCorpus {
    std::vector<TextPair> base;   // every frame x modifier x known adjective
    std::vector<TextPair> train;  // base followed by the repeated "i am <novel>"
    std::vector<TextPair> test;   // the novel word in every other frame
};

DaxyCorpus daxy_corpus(const DaxyConfig& config = {});

/// Source/target rendering of one frame, e.g. ("he is", "not", "tall").
TextPair render_adjective_sentence(const std::string& subject, const std::string& modifier,
                                   const AdjectiveEntry& adjective);

/// The five evaluation templates ("you are X", "he is very X", ...) with the
/// fillers {novel word, tall, ok, fat, fit}.
TemplateSpec evaluation_templates(const DaxyConfig& config = {});

/// Candidate fillers for the penultimate-word probe: the novel word plus the
/// first `count - 1` base adjectives.
TemplateSpec penultimate_candidates(std::size_t count, const DaxyConfig& config = {});

}  // namespace cnmt::toy
