#include "cnmt/cli.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <iterator>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "cnmt/checkpoint.hpp"
#include "cnmt/errors.hpp"
#include "cnmt/eval.hpp"
#include "cnmt/experiments.hpp"
#include "cnmt/pretrain.hpp"
#include "cnmt/probes.hpp"
#include "cnmt/toy_corpora.hpp"

namespace cnmt::cli {

namespace {

using Json = nlohmann::ordered_json;
namespace fs = std::filesystem;

struct Options {
    std::string kind;
    std::string corpus;
    std::string unseen;
    std::string template_spec;
    std::string vocab;
    std::string checkpoint;
    std::string encoder;
    std::string out;
    std::string report;
    std::string states_out;
    std::string hyp;
    std::string hyp_b;
    std::string ref;
    std::string smoothing = "none";
    std::string track_token;
    std::uint64_t seed = 0;
    std::size_t epochs = 0;
    std::size_t hidden = 64;
    std::size_t embed = 64;
    std::size_t batch = 0;
    std::size_t max_len = 0;
    std::size_t resamples = 1000;
    std::size_t count = 0;
};

struct Run {
    Run(const Options& o, std::ostream& e) : opt(o), err(e) {}

    const Options& opt;
    std::ostream& err;
    Json config = Json::object();
    Json metrics = Json::object();
    std::vector<std::string> inputs;
    std::vector<std::string> outputs;

    void log(const std::string& line) const { err << line << "\n"; }
    void input(const std::string& path) { inputs.push_back(path); }
    void output(const std::string& path) {
        for (const auto& in : inputs) {
            std::error_code ec;
            if (fs::exists(path) && fs::equivalent(path, in, ec)) {
                throw InputError("refusing to overwrite input file " + in);
            }
        }
        outputs.push_back(path);
    }
};

std::string fnv1a_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::uint64_t h = 1469598103934665603ULL;
    char c;
    while (in.get(c)) {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

Json describe_files(const std::vector<std::string>& paths) {
    Json arr = Json::array();
    for (const auto& p : paths) {
        Json f;
        f["path"] = p;
        if (fs::is_regular_file(p)) {
            f["bytes"] = fs::file_size(p);
            f["fnv1a"] = fnv1a_file(p);
        }
        arr.push_back(f);
    }
    return arr;
}

void write_text(const std::string& path, const std::string& text) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw InputError("cannot write " + path);
        out << text;
    }
    fs::rename(tmp, path);
}

// ------------------------------------------------------------- file helpers

std::pair<Vocabulary, Vocabulary> vocab_pair(const Options& opt, Run& run, const std::vector<TextPair>& corpus) {
    if (opt.vocab.empty()) {
        return {Vocabulary::build(tokenized_sources(corpus)), Vocabulary::build(tokenized_targets(corpus))};
    }
    run.input(opt.vocab + ".src");
    run.input(opt.vocab + ".tgt");
    return {Vocabulary::load(opt.vocab + ".src"), Vocabulary::load(opt.vocab + ".tgt")};
}

std::vector<TextPair> load_corpus(const std::string& path, Run& run) {
    run.input(path);
    return read_parallel_corpus(path);
}

/// Plain sentences, one per line; for "source<TAB>target" lines the target
/// side is used.
TokenLists load_sentences(const std::string& path, Run& run) {
    run.input(path);
    TokenLists out;
    for (const auto& line : read_lines(path)) {
        const auto tab = line.find('\t');
        out.push_back(tokenize(tab == std::string::npos ? line : line.substr(tab + 1)));
    }
    return out;
}

std::vector<std::string> load_sources(const std::string& path, Run& run) {
    run.input(path);
    std::vector<std::string> out;
    for (const auto& line : read_lines(path)) out.push_back(line.substr(0, line.find('\t')));
    return out;
}

Seq2Seq<float> load_model(const Options& opt, Run& run) {
    run.input(opt.checkpoint);
    return load_checkpoint<float>(opt.checkpoint);
}

std::uint64_t model_hash(const Seq2Seq<float>& model) {
    return parameter_hash<float>(model.named_parameters());
}

// ------------------------------------------------------------ subcommands

void make_data(Run& run) {
    const Options& opt = run.opt;
    run.config["kind"] = opt.kind;
    std::vector<TextPair> pairs;
    if (opt.kind == "grammar") {
        const std::size_t n = opt.count ? opt.count : 2000;
        run.config["count"] = n;
        pairs = toy::grammar_corpus(n, opt.seed);
    } else if (opt.kind == "daxy-train" || opt.kind == "daxy-base" || opt.kind == "daxy-test") {
        toy::DaxyConfig dc;
        if (opt.count) dc.repetitions = opt.count;
        run.config["repetitions"] = dc.repetitions;
        const auto corpus = toy::daxy_corpus(dc);
        pairs = opt.kind == "daxy-train" ? corpus.train : opt.kind == "daxy-base" ? corpus.base : corpus.test;
    } else if (opt.kind == "templates") {
        if (opt.template_spec.empty()) throw ConfigError("--kind templates needs --template-spec");
        run.input(opt.template_spec);
        pairs = gen_template_corpus(TemplateSpec::load(opt.template_spec));
    } else if (opt.kind == "concat") {
        if (opt.corpus.empty()) throw ConfigError("--kind concat needs --corpus");
        pairs = concat_text_pairs(load_corpus(opt.corpus, run));
    } else if (opt.kind == "vocab") {
        if (opt.corpus.empty()) throw ConfigError("--kind vocab needs --corpus");
        const auto corpus = load_corpus(opt.corpus, run);
        run.output(opt.out + ".src");
        run.output(opt.out + ".tgt");
        const Vocabulary src = Vocabulary::build(tokenized_sources(corpus));
        const Vocabulary tgt = Vocabulary::build(tokenized_targets(corpus));
        src.save(opt.out + ".src");
        tgt.save(opt.out + ".tgt");
        run.metrics["source_vocab"] = src.size();
        run.metrics["target_vocab"] = tgt.size();
        return;
    } else if (opt.kind == "eval-templates" || opt.kind == "penultimate-templates") {
        const TemplateSpec spec = opt.kind == "eval-templates"
                                      ? toy::evaluation_templates()
                                      : toy::penultimate_candidates(opt.count ? opt.count : 32);
        run.output(opt.out);
        write_text(opt.out, spec.to_json_text());
        run.metrics["templates"] = spec.templates.size();
        run.metrics["fillers"] = spec.fillers.size();
        return;
    } else {
        throw ConfigError("unknown --kind '" + opt.kind + "'");
    }
    run.output(opt.out);
    write_parallel_corpus(opt.out, pairs);
    run.metrics["pairs"] = pairs.size();
}

void echo_model_config(Run& run, const ModelConfig& mc) {
    run.config["hidden"] = mc.hidden;
    run.config["embed"] = mc.embed;
}

void pretrain_cmd(Run& run) {
    const Options& opt = run.opt;
    const auto corpus = load_corpus(opt.corpus, run);
    auto [src, tgt] = vocab_pair(opt, run, corpus);
    const ModelConfig mc{opt.hidden, opt.embed, opt.seed};
    echo_model_config(run, mc);
    PretrainConfig pc;
    pc.epochs = opt.epochs ? opt.epochs : pc.epochs;
    pc.batch = opt.batch ? opt.batch : pc.batch;
    pc.seed = opt.seed;
    run.config["epochs"] = pc.epochs;
    run.config["batch"] = pc.batch;
    run.output(opt.out);

    auto encoder = StandaloneEncoder<float>::fresh(src, mc);
    std::vector<IdSequence> sources;
    for (const auto& p : encode_corpus(corpus, src, tgt)) sources.push_back(p.source);
    const auto log = pretrain_encoder(encoder, sources, pc, [&run](std::size_t e, double loss) {
        run.log("pretrain epoch " + std::to_string(e + 1) + " loss " + std::to_string(loss));
    });
    save_encoder_checkpoint(encoder, opt.out);
    run.metrics["epoch_loss"] = log.epoch_loss;
}

void train_cmd(Run& run) {
    const Options& opt = run.opt;
    if (!opt.checkpoint.empty() && !opt.encoder.empty()) {
        throw ConfigError("--checkpoint and --encoder are mutually exclusive");
    }
    const auto corpus = load_corpus(opt.corpus, run);
    std::optional<Seq2Seq<float>> model;
    if (!opt.checkpoint.empty()) {
        model.emplace(load_model(opt, run));
        run.config["continued_from"] = opt.checkpoint;
    } else {
        auto [src, tgt] = vocab_pair(opt, run, corpus);
        const ModelConfig mc{opt.hidden, opt.embed, opt.seed};
        if (!opt.encoder.empty()) {
            run.input(opt.encoder);
            const auto encoder = load_encoder_checkpoint<float>(opt.encoder);
            model.emplace(encoder.source_vocab, tgt, mc);
            transfer_encoder(encoder, *model);
            run.config["encoder"] = opt.encoder;
        } else {
            model.emplace(src, tgt, mc);
        }
    }
    echo_model_config(run, model->config());
    TrainConfig tc;
    tc.epochs = opt.epochs ? opt.epochs : tc.epochs;
    tc.batch = opt.batch ? opt.batch : tc.batch;
    tc.seed = opt.seed;
    run.config["epochs"] = tc.epochs;
    run.config["batch"] = tc.batch;
    run.output(opt.out);

    const auto ids = encode_corpus(corpus, model->source_vocab(), model->target_vocab());
    const auto log = train(*model, ids, tc, [&run](std::size_t e, double loss) {
        run.log("train epoch " + std::to_string(e + 1) + " loss " + std::to_string(loss));
    });
    save_checkpoint(*model, opt.out);
    run.metrics["epoch_loss"] = log.epoch_loss;
}

void translate_cmd(Run& run) {
    const Options& opt = run.opt;
    const auto model = load_model(opt, run);
    const auto sources = load_sources(opt.corpus, run);
    run.config["max_len"] = opt.max_len;
    run.output(opt.out);
    std::vector<TextPair> pairs;
    for (const auto& s : sources) pairs.push_back({s, ""});
    std::vector<std::string> lines;
    for (const auto& hyp : translate_all(model, pairs, opt.max_len)) lines.push_back(join_tokens(hyp));
    write_lines(opt.out, lines);
    run.metrics["sentences"] = lines.size();
}

probes::ProbeConfig probe_config(Run& run) {
    const Options& opt = run.opt;
    probes::ProbeConfig pc;
    pc.epochs = opt.epochs ? opt.epochs : pc.epochs;
    pc.batch = opt.batch ? opt.batch : pc.batch;
    pc.seed = opt.seed;
    run.config["epochs"] = pc.epochs;
    run.config["batch"] = pc.batch;
    run.config["threshold"] = pc.threshold;
    run.config["lr"] = pc.lr;
    return pc;
}

void probe_bow_cmd(Run& run) {
    const Options& opt = run.opt;
    const auto model = load_model(opt, run);
    const auto pool = load_corpus(opt.corpus, run);
    const auto pc = probe_config(run);
    const auto before = model_hash(model);
    const auto r = experiments::concat_bow_probes(model, pool, pc, 0.8, opt.seed);
    if (!opt.states_out.empty()) {
        run.output(opt.states_out);
        const auto singles = encode_corpus(pool, model.source_vocab(), model.target_vocab());
        std::vector<probes::HiddenRecord> records;
        std::uint32_t id = 0;
        for (const auto& ex : build_concat_eval_set(singles)) {
            records.push_back({id++, model.encode(ex.pair.source).states,
                               static_cast<std::uint32_t>(ex.boundary)});
        }
        probes::write_hidden_dump(opt.states_out, records);
    }
    if (model_hash(model) != before) throw EvaluationError("probe changed model parameters");
    run.metrics["final"] = probes::to_json(r.final_first);
    run.metrics["intermediate"] = probes::to_json(r.intermediate_first);
    run.metrics["full"] = probes::to_json(r.final_full);
}

void probe_substring_cmd(Run& run) {
    const Options& opt = run.opt;
    const auto model = load_model(opt, run);
    const auto pool = load_corpus(opt.corpus, run);
    const auto pc = probe_config(run);
    run.metrics = probes::to_json(experiments::concat_substring_probe(model, pool, pc, 0.8, opt.seed));
}

TemplateSpec load_spec(Run& run) {
    if (run.opt.template_spec.empty()) throw ConfigError("--template-spec is required");
    run.input(run.opt.template_spec);
    return TemplateSpec::load(run.opt.template_spec);
}

void probe_cosine_cmd(Run& run) {
    const auto model = load_model(run.opt, run);
    run.metrics = probes::to_json(probes::run_cosine_analysis(model, load_spec(run)));
}

void probe_penultimate_cmd(Run& run) {
    const Options& opt = run.opt;
    const auto model = load_model(opt, run);
    const TemplateSpec spec = load_spec(run);
    probes::PenultimateConfig pc;
    pc.epochs = opt.epochs ? opt.epochs : pc.epochs;
    pc.batch = opt.batch ? opt.batch : pc.batch;
    pc.seed = opt.seed;
    const auto train_templates = experiments::penultimate_train_templates();
    std::vector<std::string> eval_templates;
    for (const auto& t : spec.templates) {
        if (std::find(train_templates.begin(), train_templates.end(), t) == train_templates.end()) {
            eval_templates.push_back(t);
        }
    }
    run.config["epochs"] = pc.epochs;
    run.config["batch"] = pc.batch;
    run.config["lr"] = pc.lr;
    run.config["train_templates"] = train_templates;
    run.config["eval_templates"] = eval_templates;
    run.metrics = probes::to_json(
        probes::run_penultimate_probe(model, train_templates, eval_templates, spec.fillers, pc));
}

void probe_seen_unseen_cmd(Run& run) {
    const Options& opt = run.opt;
    if (opt.unseen.empty() || opt.track_token.empty()) {
        throw ConfigError("probe-seen-unseen needs --unseen and --track-token");
    }
    const auto model = load_model(opt, run);
    const auto seen = load_sources(opt.corpus, run);
    const auto unseen = load_sources(opt.unseen, run);
    const auto pc = probe_config(run);
    run.config["track_token"] = opt.track_token;
    run.metrics = probes::to_json(probes::run_seen_unseen_bow(model, seen, unseen, opt.track_token, pc));
}

Json bleu_json(const BleuReport& r) {
    Json j;
    j["bleu"] = r.bleu;
    j["precisions"] = r.precisions;
    j["bp"] = r.brevity_penalty;
    j["hypothesis_length"] = r.hypothesis_length;
    j["reference_length"] = r.reference_length;
    return j;
}

void eval_bleu_cmd(Run& run) {
    const Options& opt = run.opt;
    const Smoothing s = parse_smoothing(opt.smoothing);
    run.config["smoothing"] = to_string(s);
    run.metrics = bleu_json(bleu_corpus(load_sentences(opt.hyp, run), load_sentences(opt.ref, run), s));
}

void eval_significance_cmd(Run& run) {
    const Options& opt = run.opt;
    if (opt.hyp_b.empty()) throw ConfigError("eval-significance needs --hyp-b");
    const Smoothing s = parse_smoothing(opt.smoothing);
    run.config["smoothing"] = to_string(s);
    run.config["resamples"] = opt.resamples;
    const auto r = paired_bootstrap(load_sentences(opt.hyp, run), load_sentences(opt.hyp_b, run),
                                    load_sentences(opt.ref, run), opt.resamples, opt.seed, s);
    run.metrics["p_value"] = r.p_value;
    run.metrics["resamples"] = r.resamples;
    run.metrics["bleu_a"] = r.bleu_a;
    run.metrics["bleu_b"] = r.bleu_b;
    run.metrics["mean_bleu_a"] = r.mean_bleu_a;
    run.metrics["mean_bleu_b"] = r.mean_bleu_b;
}

void eval_rate_cmd(Run& run) {
    const Options& opt = run.opt;
    if (opt.track_token.empty()) throw ConfigError("eval-rate needs --track-token");
    const auto hyps = load_sentences(opt.hyp, run);
    run.config["track_token"] = opt.track_token;
    run.metrics["rate"] = token_generation_rate(hyps, opt.track_token);
    run.metrics["sentences"] = hyps.size();
}

struct Command {
    const char* name;
    const char* help;
    void (*fn)(Run&);
};

const std::vector<Command>& commands() {
    static const std::vector<Command> kCommands = {
        {"make-data", "write a toy corpus, template spec or vocabulary", make_data},
        {"pretrain", "bag-of-words pre-training of a source encoder", pretrain_cmd},
        {"train", "train a translation model", train_cmd},
        {"translate", "greedy-decode the source side of a corpus", translate_cmd},
        {"probe-bow", "bag-of-words probes on concatenated sentences", probe_bow_cmd},
        {"probe-substring", "substring probe on concatenated sentences", probe_substring_cmd},
        {"probe-cosine", "state similarity before and after each filler", probe_cosine_cmd},
        {"probe-penultimate", "linear probe for the slot filler from the final state", probe_penultimate_cmd},
        {"probe-seen-unseen", "tracked-word bag-of-words probe on seen and unseen sentences", probe_seen_unseen_cmd},
        {"eval-bleu", "corpus BLEU-4", eval_bleu_cmd},
        {"eval-significance", "paired bootstrap test for system B over system A", eval_significance_cmd},
        {"eval-rate", "fraction of hypotheses containing a token", eval_rate_cmd},
    };
    return kCommands;
}

void add_flags(CLI::App& sub, const std::string& name, Options& o) {
    auto req = [](CLI::Option* opt) { opt->required(); };
    sub.add_option("--seed", o.seed, "random seed (default 0)");
    sub.add_option("--report", o.report, "also write the JSON report here");
    if (name == "make-data") {
        req(sub.add_option("--kind", o.kind,
                           "grammar|daxy-train|daxy-base|daxy-test|templates|concat|vocab|eval-templates|"
                           "penultimate-templates"));
        req(sub.add_option("--out", o.out, "output file (prefix for --kind vocab)"));
        sub.add_option("--count", o.count, "grammar pairs, daxy repetitions, or candidate count");
        sub.add_option("--template-spec", o.template_spec);
        sub.add_option("--corpus", o.corpus);
        return;
    }
    if (name == "pretrain" || name == "train") {
        req(sub.add_option("--corpus", o.corpus));
        req(sub.add_option("--out", o.out));
        sub.add_option("--vocab", o.vocab, "vocabulary prefix (<prefix>.src, <prefix>.tgt)");
        sub.add_option("--epochs", o.epochs);
        sub.add_option("--hidden", o.hidden);
        sub.add_option("--embed", o.embed);
        sub.add_option("--batch", o.batch);
        if (name == "train") {
            sub.add_option("--checkpoint", o.checkpoint, "continue training this model");
            sub.add_option("--encoder", o.encoder, "initialize the encoder from a pretrained one");
        }
        return;
    }
    if (name == "translate") {
        req(sub.add_option("--checkpoint", o.checkpoint));
        req(sub.add_option("--corpus", o.corpus, "sources, one per line (text before a tab)"));
        req(sub.add_option("--out", o.out));
        sub.add_option("--max-len", o.max_len, "0 means 2 + 2 x source length");
        return;
    }
    if (name.rfind("probe-", 0) == 0) {
        req(sub.add_option("--checkpoint", o.checkpoint));
        if (name == "probe-cosine" || name == "probe-penultimate") {
            req(sub.add_option("--template-spec", o.template_spec));
        } else {
            req(sub.add_option("--corpus", o.corpus));
        }
        if (name != "probe-cosine") {
            sub.add_option("--epochs", o.epochs);
            sub.add_option("--batch", o.batch);
        }
        if (name == "probe-bow") sub.add_option("--states-out", o.states_out, "hidden-state dump");
        if (name == "probe-seen-unseen") {
            sub.add_option("--unseen", o.unseen);
            sub.add_option("--track-token", o.track_token);
        }
        return;
    }
    req(sub.add_option("--hyp", o.hyp));
    if (name == "eval-rate") {
        sub.add_option("--track-token", o.track_token);
        return;
    }
    req(sub.add_option("--ref", o.ref));
    sub.add_option("--smoothing", o.smoothing, "none|add_one_on_zero");
    if (name == "eval-significance") {
        sub.add_option("--hyp-b", o.hyp_b);
        sub.add_option("--resamples", o.resamples);
    }
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"toy neural machine translation experiments", "cnmt"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);
    Options opt;
    std::vector<std::pair<CLI::App*, const Command*>> subs;
    for (const auto& cmd : commands()) {
        CLI::App* sub = app.add_subcommand(cmd.name, cmd.help);
        add_flags(*sub, cmd.name, opt);
        subs.emplace_back(sub, &cmd);
    }

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForVersion&) {
        out << kVersion << "\n";
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "usage error: " << e.what() << "\n";
        return 2;
    }

    const Command* cmd = nullptr;
    CLI::App* sub = nullptr;
    for (const auto& [s, c] : subs) {
        if (s->parsed()) {
            sub = s;
            cmd = c;
        }
    }
    if (sub->count("--seed") == 0) err << "seed: 0 (default; pass --seed to change)\n";
    else err << "seed: " << opt.seed << "\n";

    Run run(opt, err);
    try {
        cmd->fn(run);
        Json report;
        report["command"] = cmd->name;
        report["seed"] = opt.seed;
        report["config"] = run.config;
        report["metrics"] = run.metrics;
        const std::string text = report.dump(2) + "\n";
        out << text;
        if (!opt.report.empty()) {
            run.output(opt.report);
            write_text(opt.report, text);
        }
        const std::string anchor = !opt.out.empty() ? opt.out : opt.report;
        if (!anchor.empty()) {
            Json manifest;
            manifest["tool"] = "cnmt";
            manifest["command"] = cmd->name;
            manifest["arguments"] = args;
            manifest["seed"] = opt.seed;
            manifest["config"] = run.config;
            manifest["versions"] = {{"cnmt", kVersion},
                                    {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." +
                                                  std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                                  std::to_string(EIGEN_MINOR_VERSION)},
                                    {"compiler", __VERSION__}};
            manifest["inputs"] = describe_files(run.inputs);
            manifest["outputs"] = describe_files(run.outputs);
            manifest["metrics"] = run.metrics;
            write_text(anchor + ".manifest.json", manifest.dump(2) + "\n");
        }
    } catch (const std::exception& e) {
        std::string what = e.what();
        std::replace(what.begin(), what.end(), '\n', ' ');
        err << "error: " << what << "\n";
        return 1;
    }
    return 0;
}

int dispatch(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return dispatch(args, std::cout, std::cerr);
}

}  // namespace cnmt::cli
