#include "doctest.h"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>

#include "cnmt/corpus.hpp"
#include "cnmt/errors.hpp"
#include "cnmt/rng.hpp"
#include "cnmt/toy_corpora.hpp"
#include "cnmt/vocab.hpp"
#include "test_util.hpp"

using namespace cnmt;

TEST_CASE("tokenize") {
    CHECK(tokenize("I am Daxy") == std::vector<std::string>{"i", "am", "daxy"});
    CHECK(tokenize("").empty());
    CHECK(tokenize("a  b\tc") == std::vector<std::string>{"a", "b", "c"});
    CHECK(tokenize("  caf\xc3\xa9 \n ") == std::vector<std::string>{"caf\xc3\xa9"});
}

TEST_CASE("build_vocab ordering") {
    const auto v = Vocabulary::build({{"i", "am"}, {"i", "go"}});
    CHECK(v.tokens() == std::vector<std::string>{"<pad>", "<bos>", "<eos>", "<unk>", "i", "am", "go"});
    const auto v2 = Vocabulary::build({{"i", "am"}, {"i", "go"}}, 2);
    CHECK(v2.size() == 5);
    CHECK(v2.id("i") == 4);
    const auto ties = Vocabulary::build({{"b", "a", "b", "a"}});
    CHECK(ties.id("a") == 4);
    CHECK(ties.id("b") == 5);
    CHECK_THROWS_AS(Vocabulary::build({}), InputError);
}

TEST_CASE("encode_sentence and bag of words") {
    const auto v = Vocabulary::build({{"i", "am"}, {"i", "go"}});
    CHECK(encode_sentence({"i", "am"}, v) == IdSequence{1, 4, 5, 2});
    CHECK(encode_sentence({"zzz"}, v) == IdSequence{1, 3, 2});
    CHECK(encode_sentence({}, v) == IdSequence{1, 2});

    const auto bow = bag_of_words_vector({1, 4, 5, 2}, v);
    CHECK(bow == BowVector{0, 0, 0, 0, 1, 1, 0});
    CHECK(bag_of_words_vector({1, 2}, v) == BowVector(7, 0));
    CHECK(bag_of_words_vector({1, 4, 4, 5, 2}, v) == bow);
    CHECK(bag_of_words_vector({1, 5, 4, 2}, v) == bow);
}

TEST_CASE("vocabulary files round trip and reject bad specials") {
    test::TempDir dir;
    const auto v = Vocabulary::build({{"x", "y", "x"}});
    v.save(dir / "v.txt");
    CHECK(Vocabulary::load(dir / "v.txt") == v);
    {
        std::ofstream out(dir / "bad.txt");
        out << "<bos>\n<pad>\n<eos>\n<unk>\nx\n";
    }
    CHECK_THROWS_AS(Vocabulary::load(dir / "bad.txt"), InputError);
    CHECK_THROWS_AS(v.token(99), IndexError);
}

TEST_CASE("decode round trip up to unknowns") {
    const auto v = Vocabulary::build({{"the", "cat", "sat"}});
    const auto toks = tokenize("The dog sat");
    const auto back = decode_ids(encode_sentence(toks, v), v);
    CHECK(back == std::vector<std::string>{"the", "<unk>", "sat"});
}

TEST_CASE("parallel corpus files") {
    test::TempDir dir;
    const std::vector<TextPair> pairs = {{"i am tall", "je suis grand"}, {"he is ok", "il est bien"}};
    write_parallel_corpus(dir / "c.tsv", pairs);
    CHECK(read_parallel_corpus(dir / "c.tsv") == pairs);
    {
        std::ofstream out(dir / "bad.tsv");
        out << "a\tb\nno tab here\n";
    }
    try {
        read_parallel_corpus(dir / "bad.tsv");
        FAIL("expected an input error");
    } catch (const InputError& e) {
        CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }
}

TEST_CASE("gen_template_corpus") {
    TemplateSpec spec;
    spec.templates = {"i am X"};
    spec.target_templates = {"je suis X"};
    spec.fillers = {"tall", "ok"};
    spec.lexicon = {{"tall", "grand"}, {"ok", "bien"}};
    const auto pairs = gen_template_corpus(spec);
    REQUIRE(pairs.size() == 2);
    CHECK(pairs[1] == TextPair{"i am ok", "je suis bien"});

    CHECK(gen_template_corpus(toy::evaluation_templates()).size() == 25);

    spec.fillers.clear();
    CHECK(gen_template_corpus(spec).empty());

    spec.fillers = {"fat"};
    try {
        gen_template_corpus(spec);
        FAIL("expected a config error");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("fat") != std::string::npos);
    }
    spec.fillers = {"ok"};
    spec.templates = {"i am X X"};
    CHECK_THROWS_AS(gen_template_corpus(spec), ConfigError);
}

TEST_CASE("template spec json is deterministic") {
    const auto spec = toy::evaluation_templates();
    const auto text = spec.to_json_text();
    const auto back = TemplateSpec::from_json_text(text);
    CHECK(back.to_json_text() == text);
    CHECK(gen_template_corpus(back) == gen_template_corpus(spec));
    CHECK_THROWS_AS(TemplateSpec::from_json_text("{\"templates\": 3}"), ConfigError);
}

TEST_CASE("build_concat_eval_set") {
    const auto v = Vocabulary::build({{"a", "b", "c", "d", "e"}});
    auto sp = [&](const std::string& s) { return SentencePair{encode_sentence(tokenize(s), v), encode_sentence(tokenize(s), v)}; };
    SUBCASE("definition") {
        const auto out = build_concat_eval_set({sp("a b"), sp("c d")});
        REQUIRE(out.size() == 1);
        CHECK(out[0].pair.source == encode_sentence({"a", "b", "c", "d"}, v));
        CHECK(out[0].pair.target == out[0].pair.source);
        CHECK(out[0].boundary == 2);
    }
    SUBCASE("floor rule") {
        CHECK(build_concat_eval_set({sp("a"), sp("b"), sp("c")}).size() == 1);
        std::vector<SentencePair> hundred(100, sp("a b"));
        CHECK(build_concat_eval_set(hundred).size() == 50);
        CHECK_THROWS_AS(build_concat_eval_set({sp("a")}), InputError);
    }
    SUBCASE("constituents are contiguous and the boundary marks the first") {
        std::vector<SentencePair> pairs = {sp("a b c"), sp("d"), sp("e e"), sp("a d")};
        for (auto scheme : {PairingScheme::kAdjacent, PairingScheme::kRandom}) {
            for (const auto& ex : build_concat_eval_set(pairs, scheme, 5)) {
                const auto& src = ex.pair.source;
                const auto& a = pairs[ex.first].source;
                const auto& b = pairs[ex.second].source;
                CHECK(std::search(src.begin(), src.end(), a.begin() + 1, a.end() - 1) != src.end());
                CHECK(std::search(src.begin(), src.end(), b.begin() + 1, b.end() - 1) != src.end());
                CHECK(src[ex.boundary] == a[a.size() - 2]);
                CHECK(std::count(src.begin(), src.end(), Vocabulary::kBos) == 1);
                CHECK(std::count(src.begin(), src.end(), Vocabulary::kEos) == 1);
            }
        }
    }
}

TEST_CASE("batch_pad") {
    auto pair = [](std::size_t len) {
        IdSequence ids(len, 4);
        ids.front() = Vocabulary::kBos;
        ids.back() = Vocabulary::kEos;
        return SentencePair{ids, ids};
    };
    const auto b = batch_pad({pair(3), pair(5)}, 2);
    REQUIRE(b.size() == 1);
    CHECK(b[0].source_width == 5);
    CHECK(b[0].source_lengths == std::vector<std::size_t>{3, 5});
    CHECK(b[0].source_row(0) == IdSequence{1, 4, 2});
    CHECK(IdSequence(b[0].source.begin(), b[0].source.begin() + 5) == IdSequence{1, 4, 2, 0, 0});
    std::vector<SentencePair> five(5, pair(3));
    const auto sizes = batch_pad(five, 2);
    REQUIRE(sizes.size() == 3);
    CHECK(sizes[2].size == 1);
    const auto single = batch_pad({pair(4)}, 8);
    CHECK(single[0].source_width == 4);
    CHECK(std::count(single[0].source.begin(), single[0].source.end(), Vocabulary::kPad) == 0);
}

TEST_CASE("toy corpora") {
    SUBCASE("grammar is deterministic and distinct") {
        const auto a = toy::grammar_corpus(300, 4);
        CHECK(a == toy::grammar_corpus(300, 4));
        CHECK(a != toy::grammar_corpus(300, 5));
        std::set<std::string> sources;
        for (const auto& p : a) sources.insert(p.source);
        CHECK(sources.size() == 300);
    }
    SUBCASE("grammar reorders adjectives after nouns") {
        bool found = false;
        for (const auto& p : toy::grammar_corpus(2000, 1)) {
            if (p.source.find("big dog") != std::string::npos) {
                CHECK(p.target.find("chien grand") != std::string::npos);
                found = true;
            }
        }
        CHECK(found);
    }
    SUBCASE("novel word appears in a single context") {
        const auto d = toy::daxy_corpus();
        CHECK(d.base.size() == 12 * 4 * toy::base_adjectives().size());
        CHECK(d.train.size() == d.base.size() + 100);
        std::set<std::string> contexts;
        for (const auto& p : d.train) {
            if (p.source.find("daxy") != std::string::npos) contexts.insert(p.source);
        }
        CHECK(contexts == std::set<std::string>{"i am daxy"});
        for (const auto& p : d.test) {
            CHECK(p.source.find("daxy") != std::string::npos);
            CHECK(p.target.find("daxiste") != std::string::npos);
            CHECK(p.source != "i am daxy");
        }
        CHECK(toy::render_adjective_sentence("he is", "not", {"tall", "grand"}) ==
              TextPair{"he is not tall", "il ne est pas grand"});
    }
    SUBCASE("penultimate candidates") {
        const auto spec = toy::penultimate_candidates(32);
        CHECK(spec.fillers.size() == 32);
        CHECK(spec.fillers.front() == "daxy");
        CHECK_THROWS_AS(toy::penultimate_candidates(0), ConfigError);
    }
}
