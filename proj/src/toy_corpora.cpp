#include "cnmt/toy_corpora.hpp"

#include <set>
#include <utility>

#include "cnmt/errors.hpp"
#include "cnmt/rng.hpp"

namespace cnmt::toy {

namespace {

using Entry = std::pair<const char*, const char*>;

const std::vector<Entry> kDeterminers = {
    {"the", "le"}, {"a", "un"}, {"every", "chaque"}, {"my", "mon"}, {"your", "ton"}};

const std::vector<Entry> kNouns = {
    {"dog", "chien"},       {"cat", "chat"},         {"bird", "oiseau"},    {"horse", "cheval"},
    {"man", "homme"},       {"woman", "femme"},      {"child", "enfant"},   {"teacher", "professeur"},
    {"doctor", "medecin"},  {"farmer", "fermier"},   {"king", "roi"},       {"queen", "reine"},
    {"student", "etudiant"}, {"baker", "boulanger"}, {"sailor", "marin"},   {"friend", "ami"}};

const std::vector<Entry> kAdjectives = {
    {"big", "grand"},   {"small", "petit"}, {"red", "rouge"},   {"old", "vieux"},
    {"young", "jeune"}, {"happy", "heureux"}, {"sad", "triste"}, {"green", "vert"},
    {"quiet", "calme"}, {"clever", "malin"}, {"lazy", "paresseux"}, {"brave", "courageux"}};

const std::vector<Entry> kVerbs = {
    {"sees", "voit"},     {"likes", "aime"},      {"helps", "aide"},   {"finds", "trouve"},
    {"follows", "suit"},  {"calls", "appelle"},   {"watches", "regarde"}, {"knows", "connait"},
    {"meets", "rencontre"}, {"pushes", "pousse"}, {"feeds", "nourrit"}, {"paints", "peint"}};

const std::vector<Entry> kPrepositions = {
    {"near", "pres"}, {"behind", "derriere"}, {"with", "avec"}, {"under", "sous"}, {"beside", "cote"}};

// "watches" -> "watch", "sees" -> "see"
std::string base_form(const std::string& verb) {
    if (verb.size() > 4 && (verb.ends_with("ches") || verb.ends_with("shes"))) return verb.substr(0, verb.size() - 2);
    return verb.substr(0, verb.size() - 1);
}

const Entry& pick(Rng& rng, const std::vector<Entry>& items) { return items[rng.below(items.size())]; }

struct Phrase {
    std::vector<std::string> source;
    std::vector<std::string> target;

    void append(const Phrase& other) {
        source.insert(source.end(), other.source.begin(), other.source.end());
        target.insert(target.end(), other.target.begin(), other.target.end());
    }
    void word(const char* s, const char* t) {
        source.emplace_back(s);
        target.emplace_back(t);
    }
};

Phrase noun_phrase(Rng& rng) {
    const auto& det = pick(rng, kDeterminers);
    const bool with_adjective = rng.uniform01() < 0.4;
    const auto& adj = pick(rng, kAdjectives);
    const auto& noun = pick(rng, kNouns);
    Phrase p;
    p.source.emplace_back(det.first);
    p.target.emplace_back(det.second);
    if (with_adjective) p.source.emplace_back(adj.first);
    p.source.emplace_back(noun.first);
    p.target.emplace_back(noun.second);
    if (with_adjective) p.target.emplace_back(adj.second);
    return p;
}

Phrase grammar_sentence(Rng& rng) {
    Phrase s = noun_phrase(rng);
    const double shape = rng.uniform01();
    if (shape < 0.2) {
        const auto& adj = pick(rng, kAdjectives);
        s.word("is", "est");
        s.word(adj.first, adj.second);
        return s;
    }
    const auto& verb = pick(rng, kVerbs);
    if (shape < 0.35) {
        s.source.emplace_back("does");
        s.source.emplace_back("not");
        s.source.push_back(base_form(verb.first));
        s.target.emplace_back("ne");
        s.target.emplace_back(verb.second);
        s.target.emplace_back("pas");
    } else {
        s.word(verb.first, verb.second);
    }
    s.append(noun_phrase(rng));
    if (shape >= 0.7) {
        const auto& prep = pick(rng, kPrepositions);
        s.word(prep.first, prep.second);
        s.append(noun_phrase(rng));
    }
    return s;
}

struct Subject {
    const char* source;
    const char* pronoun;
    const char* verb;
};

const std::vector<Subject> kSubjects = {
    {"i am", "je", "suis"},      {"i'm", "je", "suis"},      {"you are", "tu", "es"},
    {"you're", "tu", "es"},      {"he is", "il", "est"},     {"he's", "il", "est"},
    {"she is", "elle", "est"},   {"she's", "elle", "est"},   {"we are", "nous", "sommes"},
    {"we're", "nous", "sommes"}, {"they are", "ils", "sont"}, {"they're", "ils", "sont"}};

const std::vector<std::string> kModifiers = {"", "very", "not", "too"};

const Subject& find_subject(const std::string& source) {
    for (const auto& s : kSubjects) {
        if (source == s.source) return s;
    }
    throw ConfigError("unknown subject frame '" + source + "'");
}

}  // namespace

std::vector<TextPair> grammar_corpus(std::size_t count, std::uint64_t seed) {
    Rng rng(seed);
    std::set<std::string> seen;
    std::vector<TextPair> out;
    out.reserve(count);
    while (out.size() < count) {
        Phrase s = grammar_sentence(rng);
        TextPair pair{join_tokens(s.source), join_tokens(s.target)};
        if (seen.insert(pair.source).second) out.push_back(std::move(pair));
    }
    return out;
}

const std::vector<AdjectiveEntry>& base_adjectives() {
    static const std::vector<AdjectiveEntry> kBase = {
        {"tall", "grand"},     {"ok", "bien"},        {"fat", "gros"},        {"fit", "sportif"},
        {"happy", "heureux"},  {"sad", "triste"},     {"tired", "fatigue"},   {"hungry", "affame"},
        {"sick", "malade"},    {"rich", "riche"},     {"poor", "pauvre"},     {"busy", "occupe"},
        {"ready", "pret"},     {"young", "jeune"},    {"old", "vieux"},       {"strong", "fort"},
        {"weak", "faible"},    {"calm", "calme"},     {"angry", "fache"},     {"shy", "timide"},
        {"brave", "courageux"}, {"lazy", "paresseux"}, {"smart", "intelligent"}, {"funny", "drole"},
        {"kind", "gentil"},    {"short", "petit"},    {"polite", "poli"},     {"honest", "honnete"},
        {"famous", "celebre"}, {"nervous", "nerveux"}, {"proud", "fier"}};
    return kBase;
}

TextPair render_adjective_sentence(const std::string& subject, const std::string& modifier,
                                   const AdjectiveEntry& adjective) {
    const Subject& s = find_subject(subject);
    std::string source = subject;
    std::string target = s.pronoun;
    if (modifier.empty()) {
        target += std::string(" ") + s.verb;
    } else if (modifier == "not") {
        source += " not";
        target += std::string(" ne ") + s.verb + " pas";
    } else if (modifier == "very") {
        source += " very";
        target += std::string(" ") + s.verb + " tres";
    } else if (modifier == "too") {
        source += " too";
        target += std::string(" ") + s.verb + " trop";
    } else {
        throw ConfigError("unknown modifier '" + modifier + "'");
    }
    source += " " + adjective.source;
    target += " " + adjective.target;
    return {source, target};
}

DaxyCorpus daxy_corpus(const DaxyConfig& config) {
    DaxyCorpus corpus;
    for (const auto& subject : kSubjects) {
        for (const auto& modifier : kModifiers) {
            for (const auto& adj : base_adjectives()) {
                corpus.base.push_back(render_adjective_sentence(subject.source, modifier, adj));
            }
        }
    }
    const AdjectiveEntry novel{config.novel_word, config.novel_translation};
    corpus.train = corpus.base;
    const TextPair seen = render_adjective_sentence("i am", "", novel);
    for (std::size_t k = 0; k < config.repetitions; ++k) corpus.train.push_back(seen);
    for (const auto& subject : kSubjects) {
        for (const auto& modifier : kModifiers) {
            TextPair p = render_adjective_sentence(subject.source, modifier, novel);
            if (p.source != seen.source) corpus.test.push_back(std::move(p));
        }
    }
    return corpus;
}

namespace {

TemplateSpec five_templates() {
    TemplateSpec spec;
    const std::vector<std::pair<std::string, std::string>> frames = {
        {"you are", ""}, {"he is", "very"}, {"i am", "very"}, {"he is", "not"}, {"i am", "not"}};
    for (const auto& [subject, modifier] : frames) {
        TextPair p = render_adjective_sentence(subject, modifier, AdjectiveEntry{kSlotMarker, kSlotMarker});
        spec.templates.push_back(p.source);
        spec.target_templates.push_back(p.target);
    }
    return spec;
}

}  // namespace

TemplateSpec evaluation_templates(const DaxyConfig& config) {
    TemplateSpec spec = five_templates();
    spec.fillers = {config.novel_word};
    spec.lexicon[config.novel_word] = config.novel_translation;
    for (std::size_t k = 0; k < 4; ++k) {
        const auto& adj = base_adjectives()[k];
        spec.fillers.push_back(adj.source);
        spec.lexicon[adj.source] = adj.target;
    }
    return spec;
}

TemplateSpec penultimate_candidates(std::size_t count, const DaxyConfig& config) {
    if (count < 1 || count > base_adjectives().size() + 1) {
        throw ConfigError("candidate set size must be in [1, " + std::to_string(base_adjectives().size() + 1) +
                          "]");
    }
    TemplateSpec spec = five_templates();
    spec.fillers = {config.novel_word};
    spec.lexicon[config.novel_word] = config.novel_translation;
    for (std::size_t k = 0; k + 1 < count; ++k) {
        const auto& adj = base_adjectives()[k];
        spec.fillers.push_back(adj.source);
        spec.lexicon[adj.source] = adj.target;
    }
    return spec;
}

}  // namespace cnmt::toy
