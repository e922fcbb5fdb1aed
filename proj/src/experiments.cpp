#include "cnmt/experiments.hpp"

#include <numeric>
#include <sstream>

#include "cnmt/errors.hpp"
#include "cnmt/rng.hpp"

namespace cnmt::experiments {

namespace {

void note(const Logger& log, const std::string& line) {
    if (log) log(line);
}

EpochCallback epoch_logger(const Logger& log, const std::string& what) {
    if (!log) return {};
    return [log, what](std::size_t epoch, double loss) {
        std::ostringstream s;
        s << what << " epoch " << epoch + 1 << " loss " << loss;
        log(s.str());
    };
}

TokenLists references_of(const std::vector<TextPair>& pairs) { return tokenized_targets(pairs); }

template <typename V>
std::vector<V> pick(const std::vector<V>& items, const std::vector<std::size_t>& idx) {
    std::vector<V> out;
    out.reserve(idx.size());
    for (auto i : idx) out.push_back(items[i]);
    return out;
}

std::vector<std::string> sources_of(const std::vector<TextPair>& pairs) {
    std::vector<std::string> out;
    out.reserve(pairs.size());
    for (const auto& p : pairs) out.push_back(p.source);
    return out;
}

}  // namespace

Corpora prepare(std::vector<TextPair> train) {
    if (train.empty()) throw InputError("training corpus is empty");
    Corpora c;
    c.source_vocab = Vocabulary::build(tokenized_sources(train));
    c.target_vocab = Vocabulary::build(tokenized_targets(train));
    c.train_ids = encode_corpus(train, c.source_vocab, c.target_vocab);
    c.train = std::move(train);
    return c;
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(std::size_t n, double train_fraction,
                                                                              std::uint64_t seed) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(seed);
    rng.shuffle(order);
    const auto cut = static_cast<std::size_t>(train_fraction * static_cast<double>(n));
    return {std::vector<std::size_t>(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(cut)),
            std::vector<std::size_t>(order.begin() + static_cast<std::ptrdiff_t>(cut), order.end())};
}

// ---------------------------------------------------------- productivity

ConcatBowReports concat_bow_probes(const Seq2Seq<float>& model, const std::vector<TextPair>& pool,
                                   const probes::ProbeConfig& config, double train_fraction, std::uint64_t seed) {
    const auto& vocab = model.source_vocab();
    const auto singles = encode_corpus(pool, vocab, model.target_vocab());
    const auto concat = build_concat_eval_set(singles);
    std::vector<probes::TraceExample> first_bow, full_bow;
    for (const auto& ex : concat) {
        auto trace = model.encode(ex.pair.source);
        first_bow.push_back({trace, ex.boundary, bag_of_words_vector(singles[ex.first].source, vocab)});
        full_bow.push_back({std::move(trace), ex.boundary, bag_of_words_vector(ex.pair.source, vocab)});
    }
    const auto [train_idx, eval_idx] = split_indices(concat.size(), train_fraction, derive_seed(seed, 21));
    const auto first_train = pick(first_bow, train_idx), first_eval = pick(first_bow, eval_idx);
    const auto full_train = pick(full_bow, train_idx), full_eval = pick(full_bow, eval_idx);
    ConcatBowReports r;
    r.final_first = probes::run_bow_probe(first_train, first_eval, probes::StateSelector::kFinal, config, "final");
    r.intermediate_first =
        probes::run_bow_probe(first_train, first_eval, probes::StateSelector::kIntermediate, config, "intermediate");
    r.final_full = probes::run_bow_probe(full_train, full_eval, probes::StateSelector::kFinal, config, "full");
    return r;
}

probes::SubstringReport concat_substring_probe(const Seq2Seq<float>& model, const std::vector<TextPair>& pool,
                                               const probes::ProbeConfig& config, double train_fraction,
                                               std::uint64_t seed) {
    const auto singles = encode_corpus(pool, model.source_vocab(), model.target_vocab());
    const auto concat = build_concat_eval_set(singles);
    const auto [train_idx, eval_idx] = split_indices(concat.size(), train_fraction, derive_seed(seed, 21));
    const auto train = probes::build_substring_examples(model, singles, pick(concat, train_idx), derive_seed(seed, 22));
    const auto eval = probes::build_substring_examples(model, singles, pick(concat, eval_idx), derive_seed(seed, 23));
    return probes::run_substring_probe(train, eval, config);
}

ProductivityResult run_productivity(const ProductivitySetup& setup, const Logger& log) {
    const std::size_t total = setup.train_pairs + setup.eval_pairs + setup.probe_pairs;
    const auto all = toy::grammar_corpus(total, derive_seed(setup.seed, 1));
    const auto first = all.begin();
    Corpora c = prepare({first, first + static_cast<std::ptrdiff_t>(setup.train_pairs)});
    const std::vector<TextPair> eval(first + static_cast<std::ptrdiff_t>(setup.train_pairs),
                                     first + static_cast<std::ptrdiff_t>(setup.train_pairs + setup.eval_pairs));
    const std::vector<TextPair> probe_pool(first + static_cast<std::ptrdiff_t>(setup.train_pairs + setup.eval_pairs),
                                           all.end());

    ModelConfig mc = setup.model;
    mc.seed = setup.seed;
    TrainConfig tc = setup.train;
    tc.seed = setup.seed;
    Seq2Seq<float> model(c.source_vocab, c.target_vocab, mc);
    note(log, "training on " + std::to_string(c.train.size()) + " pairs");
    ProductivityResult r;
    r.train_loss = train(model, c.train_ids, tc, epoch_logger(log, "train")).epoch_loss;

    r.single_bleu = bleu_corpus(translate_all(model, eval), references_of(eval)).bleu;
    const auto joined = concat_text_pairs(eval);
    r.concat_bleu = bleu_corpus(translate_all(model, joined), references_of(joined)).bleu;
    note(log, "bleu single " + std::to_string(r.single_bleu) + " concatenated " + std::to_string(r.concat_bleu));

    probes::ProbeConfig pc = setup.probe;
    pc.seed = derive_seed(setup.seed, 20);
    const auto bow = concat_bow_probes(model, probe_pool, pc, setup.probe_train_fraction, setup.seed);
    r.final_first = bow.final_first;
    r.intermediate_first = bow.intermediate_first;
    r.final_full = bow.final_full;
    note(log, "bag-of-words F1 final " + std::to_string(r.final_first.f1) + " intermediate " +
                  std::to_string(r.intermediate_first.f1));
    r.substring = concat_substring_probe(model, probe_pool, pc, setup.probe_train_fraction, setup.seed);
    note(log, "substring recall first " + std::to_string(r.substring.first_recall) + " second " +
                  std::to_string(r.substring.second_recall));
    return r;
}

nlohmann::ordered_json to_json(const ProductivityResult& r) {
    nlohmann::ordered_json j;
    j["single_bleu"] = r.single_bleu;
    j["concatenated_bleu"] = r.concat_bleu;
    j["bleu_drop"] = r.single_bleu - r.concat_bleu;
    j["bow_first_sentence_final"] = probes::to_json(r.final_first);
    j["bow_first_sentence_intermediate"] = probes::to_json(r.intermediate_first);
    j["bow_full_sentence_final"] = probes::to_json(r.final_full);
    j["substring"] = probes::to_json(r.substring);
    j["train_loss"] = r.train_loss;
    return j;
}

// ------------------------------------------------------ novel word study

std::vector<std::string> penultimate_train_templates() { return {"i am X", "you are X"}; }

std::vector<std::string> penultimate_eval_templates() {
    return {"he is very X", "i am very X", "he is not X", "i am not X"};
}

DaxyResult run_daxy(const DaxySetup& setup, const Logger& log) {
    const auto corpus = toy::daxy_corpus(setup.corpus);
    Corpora c = prepare(corpus.train);
    ModelConfig mc = setup.model;
    mc.seed = setup.seed;
    TrainConfig tc = setup.train;
    tc.seed = setup.seed;

    const auto base_ids = encode_corpus(corpus.base, c.source_vocab, c.target_vocab);
    TrainConfig tc_continued = tc;
    tc_continued.epochs = setup.continued_epochs;
    tc_continued.seed = derive_seed(setup.seed, 40);
    auto two_phase = [&](Seq2Seq<float>& model, const std::string& name) {
        note(log, name + ": training on " + std::to_string(base_ids.size()) + " base pairs");
        train(model, base_ids, tc, epoch_logger(log, name));
        note(log, name + ": continuing on " + std::to_string(c.train_ids.size()) + " pairs");
        train(model, c.train_ids, tc_continued, epoch_logger(log, name + " continued"));
    };

    DaxyResult r;
    Seq2Seq<float> baseline(c.source_vocab, c.target_vocab, mc);
    two_phase(baseline, "baseline");

    auto encoder = StandaloneEncoder<float>::fresh(c.source_vocab, mc);
    std::vector<IdSequence> sources;
    sources.reserve(c.train_ids.size());
    for (const auto& p : c.train_ids) sources.push_back(p.source);
    PretrainConfig pc = setup.pretrain;
    pc.seed = setup.seed;
    pretrain_encoder(encoder, sources, pc, epoch_logger(log, "pretrain"));
    Seq2Seq<float> pretrained(c.source_vocab, c.target_vocab, mc);
    transfer_encoder(encoder, pretrained);
    two_phase(pretrained, "pretrained");

    const auto refs = references_of(corpus.test);
    r.baseline_hypotheses = translate_all(baseline, corpus.test);
    r.pretrained_hypotheses = translate_all(pretrained, corpus.test);
    r.baseline_bleu = bleu_corpus(r.baseline_hypotheses, refs);
    r.pretrained_bleu = bleu_corpus(r.pretrained_hypotheses, refs);
    r.baseline_rate = token_generation_rate(r.baseline_hypotheses, setup.corpus.novel_translation);
    r.pretrained_rate = token_generation_rate(r.pretrained_hypotheses, setup.corpus.novel_translation);
    r.significance = paired_bootstrap(r.baseline_hypotheses, r.pretrained_hypotheses, refs, setup.resamples,
                                      derive_seed(setup.seed, 30));
    note(log, "bleu baseline " + std::to_string(r.baseline_bleu.bleu) + " pretrained " +
                  std::to_string(r.pretrained_bleu.bleu));
    if (!setup.run_probes) return r;

    r.cosine = probes::run_cosine_analysis(baseline, toy::evaluation_templates(setup.corpus));
    probes::PenultimateConfig pen = setup.penultimate;
    pen.seed = derive_seed(setup.seed, 31);
    r.penultimate = probes::run_penultimate_probe(baseline, penultimate_train_templates(), penultimate_eval_templates(),
                                                  toy::penultimate_candidates(setup.candidates, setup.corpus).fillers,
                                                  pen);
    probes::ProbeConfig probe = setup.probe;
    probe.seed = derive_seed(setup.seed, 32);
    r.seen_unseen = probes::run_seen_unseen_bow(baseline, sources_of(corpus.train), sources_of(corpus.test),
                                                setup.corpus.novel_word, probe);
    return r;
}

nlohmann::ordered_json to_json(const DaxyResult& r) {
    nlohmann::ordered_json j;
    j["baseline_bleu"] = r.baseline_bleu.bleu;
    j["pretrained_bleu"] = r.pretrained_bleu.bleu;
    j["baseline_generation_rate"] = r.baseline_rate;
    j["pretrained_generation_rate"] = r.pretrained_rate;
    j["significance"] = {{"p_value", r.significance.p_value},
                         {"resamples", r.significance.resamples},
                         {"seed", r.significance.seed}};
    j["cosine"] = probes::to_json(r.cosine);
    j["penultimate"] = probes::to_json(r.penultimate);
    j["seen_unseen"] = probes::to_json(r.seen_unseen);
    return j;
}

}  // namespace cnmt::experiments
