#include "doctest.h"

#include <cmath>

#include "cnmt/checkpoint.hpp"
#include "cnmt/errors.hpp"
#include "cnmt/gradcheck.hpp"
#include "cnmt/pretrain.hpp"
#include "test_util.hpp"

using namespace cnmt;
using doctest::Approx;

namespace {

std::vector<IdSequence> toy_sources(const Vocabulary& v) {
    std::vector<IdSequence> out;
    for (const char* s : {"i am", "you are", "i am tall", "he is", "he is tall", "you are ok", "i am ok", "we are",
                          "we are tall", "he is ok"}) {
        out.push_back(encode_sentence(tokenize(s), v));
    }
    return out;
}

Vocabulary toy_vocab() {
    return Vocabulary::build(
        {{"i", "am", "you", "are", "he", "is", "tall", "ok", "we"}});
}

}  // namespace

TEST_CASE("zero head gives V ln 2") {
    const auto v = Vocabulary::build({{"i", "am", "x"}});  // V = 7
    auto enc = StandaloneEncoder<double>::fresh(v, ModelConfig{5, 4, 0});
    auto head = make_pretrain_head<double>(v.size(), enc.config, true);
    const auto ids = encode_sentence({"i", "am"}, v);
    const double loss = bow_pretrain_loss(enc.encoder, head, ids, bag_of_words_vector(ids, v), 1.0, false);
    CHECK(loss == Approx(7 * std::log(2.0)));
}

TEST_CASE("head and encoder gradients") {
    const auto v = toy_vocab();
    auto enc = StandaloneEncoder<double>::fresh(v, ModelConfig{4, 3, 2});
    auto head = make_pretrain_head<double>(v.size(), enc.config, false);
    const auto ids = encode_sentence(tokenize("he is tall"), v);
    const auto bow = bag_of_words_vector(ids, v);
    std::vector<Tensor<double>*> params = {&head.weight, &head.bias, &enc.encoder.embedding, &enc.encoder.lstm.w_ih,
                                           &enc.encoder.lstm.w_hh, &enc.encoder.lstm.bias};
    for (auto* p : params) {
        p->enable_grad();
        p->zero_grad();
    }
    bow_pretrain_loss(enc.encoder, head, ids, bow, 1.0, true);
    for (auto* p : params) {
        const std::vector<double> analytic(p->grad().begin(), p->grad().end());
        CHECK(grad_check([&] { return bow_pretrain_loss(enc.encoder, head, ids, bow, 1.0, false); }, p->data(),
                         analytic) < 1e-5);
    }
}

TEST_CASE("pretraining") {
    const auto v = toy_vocab();
    const auto sources = toy_sources(v);
    SUBCASE("overfits a tiny corpus") {
        auto enc = StandaloneEncoder<float>::fresh(v, ModelConfig{16, 16, 1});
        PretrainConfig pc;
        pc.epochs = 800;
        pc.batch = 10;
        pc.adam.lr = 1e-2;
        const auto log = pretrain_encoder(enc, sources, pc);
        CHECK(log.epoch_loss.back() < 0.05);
        for (std::size_t e = 1; e < 3; ++e) CHECK(log.epoch_loss[e] < log.epoch_loss[e - 1]);
    }
    SUBCASE("zero epochs leave the encoder unchanged") {
        auto enc = StandaloneEncoder<float>::fresh(v, ModelConfig{8, 8, 1});
        const auto before = parameter_hash<float>(std::as_const(enc).named_parameters());
        PretrainConfig pc;
        pc.epochs = 0;
        pretrain_encoder(enc, sources, pc);
        CHECK(parameter_hash<float>(std::as_const(enc).named_parameters()) == before);
        CHECK_THROWS_AS(pretrain_encoder(enc, {}, pc), InputError);
    }
    SUBCASE("deterministic per seed") {
        PretrainConfig pc;
        pc.epochs = 3;
        pc.seed = 5;
        auto a = StandaloneEncoder<float>::fresh(v, ModelConfig{8, 8, 1});
        auto b = StandaloneEncoder<float>::fresh(v, ModelConfig{8, 8, 1});
        CHECK(pretrain_encoder(a, sources, pc).epoch_loss == pretrain_encoder(b, sources, pc).epoch_loss);
        CHECK(parameter_hash<float>(std::as_const(a).named_parameters()) == parameter_hash<float>(std::as_const(b).named_parameters()));
    }
}

TEST_CASE("fresh encoder matches the translation model's encoder") {
    const auto v = toy_vocab();
    const ModelConfig mc{8, 6, 4};
    const auto enc = StandaloneEncoder<float>::fresh(v, mc);
    Seq2Seq<float> m(v, v, mc);
    CHECK(enc.encoder.embedding == m.encoder.embedding);
    CHECK(enc.encoder.lstm.w_hh == m.encoder.lstm.w_hh);
}

TEST_CASE("transfer") {
    const auto v = toy_vocab();
    const auto tgt = Vocabulary::build({{"je", "suis"}});
    auto enc = StandaloneEncoder<float>::fresh(v, ModelConfig{8, 6, 1});
    PretrainConfig pc;
    pc.epochs = 2;
    pretrain_encoder(enc, toy_sources(v), pc);
    SUBCASE("copies bit-exactly and keeps the decoder fresh") {
        Seq2Seq<float> fresh(v, tgt, ModelConfig{8, 6, 7});
        Seq2Seq<float> m(v, tgt, ModelConfig{8, 6, 7});
        transfer_encoder(enc, m);
        CHECK(parameter_hash<float>(std::as_const(enc).named_parameters()) ==
              parameter_hash<float>({{"encoder.embedding", &m.encoder.embedding},
                                     {"encoder.w_ih", &m.encoder.lstm.w_ih},
                                     {"encoder.w_hh", &m.encoder.lstm.w_hh},
                                     {"encoder.bias", &m.encoder.lstm.bias}}));
        const auto ids = encode_sentence(tokenize("you are tall"), v);
        CHECK(m.encode(ids).states == enc.encode(ids).states);
        CHECK(m.w_a == fresh.w_a);
        CHECK(m.decoder.w_ih == fresh.decoder.w_ih);
    }
    SUBCASE("mismatches are named") {
        Seq2Seq<float> wrong_h(v, tgt, ModelConfig{32, 6, 1});
        try {
            transfer_encoder(enc, wrong_h);
            FAIL("expected a transfer error");
        } catch (const TransferError& e) {
            CHECK(std::string(e.what()).find("hidden") != std::string::npos);
        }
        Seq2Seq<float> wrong_v(tgt, tgt, ModelConfig{8, 6, 1});
        CHECK_THROWS_AS(transfer_encoder(enc, wrong_v), TransferError);
    }
    SUBCASE("encoder checkpoints round trip") {
        test::TempDir dir;
        save_encoder_checkpoint(enc, dir / "e.ckpt");
        const auto back = load_encoder_checkpoint<float>(dir / "e.ckpt");
        CHECK(parameter_hash<float>(std::as_const(back).named_parameters()) == parameter_hash<float>(std::as_const(enc).named_parameters()));
        CHECK(back.source_vocab == v);
        Seq2Seq<float> m(v, tgt, ModelConfig{8, 6, 1});
        save_checkpoint(m, dir / "full.ckpt");
        CHECK_THROWS_AS(load_encoder_checkpoint<float>(dir / "full.ckpt"), FormatError);
    }
}
