#include "cnmt/probes.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include "cnmt/nn.hpp"
#include "cnmt/optim.hpp"

namespace cnmt::probes {

namespace {

constexpr std::uint32_t kDumpVersion = 1;

Tensor<float> gather_rows(const Tensor<float>& source, std::span<const std::size_t> rows) {
    Tensor<float> out({rows.size(), source.cols()});
    for (std::size_t r = 0; r < rows.size(); ++r) {
        out.mat().row(static_cast<Eigen::Index>(r)) = source.mat().row(static_cast<Eigen::Index>(rows[r]));
    }
    return out;
}

Tensor<float> stack(const std::vector<Vector<float>>& rows) {
    if (rows.empty()) throw ConfigError("probe received no examples");
    Tensor<float> out({rows.size(), static_cast<std::size_t>(rows.front().size())});
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != rows.front().size()) throw DimensionError("probe feature widths differ");
        out.mat().row(static_cast<Eigen::Index>(r)) = rows[r].transpose();
    }
    return out;
}

void tanh_inplace(Tensor<float>& t) {
    for (float& v : t.data()) v = std::tanh(v);
}

// dL/dz = dL/da * (1 - a^2) for a = tanh(z), written into a fresh tensor
Tensor<float> tanh_backward(const Tensor<float>& activated) {
    Tensor<float> dz(activated.shape());
    const auto g = activated.grad();
    for (std::size_t i = 0; i < dz.size(); ++i) dz[i] = g[i] * (1.0f - activated[i] * activated[i]);
    return dz;
}

Vector<float> final_state_of(const Seq2Seq<float>& model, const std::string& sentence) {
    return model.encode(encode_sentence(tokenize(sentence), model.source_vocab())).final_state();
}

}  // namespace

// ------------------------------------------------------------------- MLP

ProbeMlp::ProbeMlp(std::size_t input, std::size_t hidden, std::size_t output, std::uint64_t seed)
    : w1_({hidden, input}),
      b1_({hidden}),
      w2_({hidden, hidden}),
      b2_({hidden}),
      w3_({output, hidden}),
      b3_({output}) {
    init_uniform(w1_, input, derive_seed(seed, 1));
    init_uniform(w2_, hidden, derive_seed(seed, 2));
    init_uniform(w3_, hidden, derive_seed(seed, 3));
}

Tensor<float> ProbeMlp::forward(const Tensor<float>& x) const {
    Tensor<float> a1 = nn::linear_forward(x, w1_, b1_);
    tanh_inplace(a1);
    Tensor<float> a2 = nn::linear_forward(a1, w2_, b2_);
    tanh_inplace(a2);
    return nn::linear_forward(a2, w3_, b3_);
}

std::vector<double> ProbeMlp::fit(const Tensor<float>& inputs, const Tensor<float>& targets,
                                  const ProbeConfig& config) {
    if (inputs.rows() != targets.rows() || inputs.cols() != input_width() || targets.cols() != output_width()) {
        throw DimensionError("probe fit: inputs " + shape_to_string(inputs.shape()) + ", targets " +
                             shape_to_string(targets.shape()) + " for a " + std::to_string(input_width()) + "->" +
                             std::to_string(output_width()) + " probe");
    }
    std::vector<Tensor<float>*> params = {&w1_, &b1_, &w2_, &b2_, &w3_, &b3_};
    for (auto* p : params) p->enable_grad();
    AdamState<float> adam;
    adam.config.lr = config.lr;
    std::vector<std::size_t> order(inputs.rows());
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> losses;
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        Rng rng(derive_seed(config.seed, 3000 + epoch));
        rng.shuffle(order);
        double total = 0.0;
        for (std::size_t start = 0; start < order.size(); start += config.batch) {
            const std::size_t end = std::min(order.size(), start + config.batch);
            const std::span<const std::size_t> rows(order.data() + start, end - start);
            Tensor<float> x = gather_rows(inputs, rows);
            Tensor<float> y = gather_rows(targets, rows);
            for (auto* p : params) p->zero_grad();

            Tensor<float> a1 = nn::linear_forward(x, w1_, b1_);
            tanh_inplace(a1);
            Tensor<float> a2 = nn::linear_forward(a1, w2_, b2_);
            tanh_inplace(a2);
            Tensor<float> logits = nn::linear_forward(a2, w3_, b3_);
            logits.enable_grad();
            total += static_cast<double>(nn::bce_with_logits(logits, y)) * static_cast<double>(rows.size());

            a2.enable_grad();
            nn::linear_backward(a2, w3_, b3_, Tensor<float>(logits.shape(), logits.grad()));
            Tensor<float> dz2 = tanh_backward(a2);
            a1.enable_grad();
            nn::linear_backward(a1, w2_, b2_, dz2);
            Tensor<float> dz1 = tanh_backward(a1);
            nn::linear_backward(x, w1_, b1_, dz1);

            adam_step(params, adam);
        }
        losses.push_back(total / static_cast<double>(order.size()));
    }
    for (auto* p : params) p->drop_grad();
    return losses;
}

// ----------------------------------------------------------- bag of words

BowReport report_from_confusion(const Confusion& c, double threshold, std::string condition) {
    BowReport r;
    r.threshold = threshold;
    r.condition = std::move(condition);
    r.precision = c.tp + c.fp ? 100.0 * static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp) : 0.0;
    r.recall = c.tp + c.fn ? 100.0 * static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn) : 0.0;
    r.f1 = r.precision + r.recall > 0.0 ? 2.0 * r.precision * r.recall / (r.precision + r.recall) : 0.0;
    return r;
}

Vector<float> select_state(const TraceExample& example, StateSelector selector) {
    if (selector == StateSelector::kFinal) return example.trace.final_state();
    if (!example.boundary) throw ConfigError("intermediate-state probe needs a boundary index for every example");
    if (*example.boundary >= example.trace.length()) {
        throw ConfigError("boundary index " + std::to_string(*example.boundary) + " outside trace of length " +
                          std::to_string(example.trace.length()));
    }
    return example.trace.state(*example.boundary);
}

namespace {

Tensor<float> bow_targets(std::span<const TraceExample> examples) {
    const std::size_t width = examples.front().target.size();
    Tensor<float> y({examples.size(), width});
    for (std::size_t r = 0; r < examples.size(); ++r) {
        if (examples[r].target.size() != width) throw DimensionError("bag-of-words targets differ in width");
        for (std::size_t c = 0; c < width; ++c) y.at(r, c) = examples[r].target[c];
    }
    return y;
}

Tensor<float> selected_features(std::span<const TraceExample> examples, StateSelector selector) {
    std::vector<Vector<float>> rows;
    rows.reserve(examples.size());
    for (const auto& ex : examples) rows.push_back(select_state(ex, selector));
    return stack(rows);
}

std::size_t probe_hidden(const ProbeConfig& config, std::size_t encoder_hidden) {
    return config.hidden ? config.hidden : 2 * encoder_hidden;
}

float logit_threshold(double probability) {
    return static_cast<float>(std::log(probability / (1.0 - probability)));
}

}  // namespace

BowReport run_bow_probe(std::span<const TraceExample> train, std::span<const TraceExample> eval,
                        StateSelector selector, const ProbeConfig& config, const std::string& condition) {
    if (train.empty() || eval.empty()) throw ConfigError("bag-of-words probe needs non-empty train and eval splits");
    const Tensor<float> x_train = selected_features(train, selector);
    const Tensor<float> y_train = bow_targets(train);
    const Tensor<float> x_eval = selected_features(eval, selector);
    const Tensor<float> y_eval = bow_targets(eval);
    if (y_eval.cols() != y_train.cols()) throw DimensionError("train and eval bag-of-words widths differ");

    ProbeMlp mlp(x_train.cols(), probe_hidden(config, x_train.cols()), y_train.cols(), config.seed);
    mlp.fit(x_train, y_train, config);

    const Tensor<float> logits = mlp.forward(x_eval);
    // sigmoid(x) > threshold  <=>  x > logit(threshold)
    const float cut = logit_threshold(config.threshold);
    Confusion c;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        const bool predicted = logits[i] > cut;
        const bool actual = y_eval[i] > 0.5f;
        if (predicted && actual) ++c.tp;
        if (predicted && !actual) ++c.fp;
        if (!predicted && actual) ++c.fn;
    }
    return report_from_confusion(c, config.threshold, condition);
}

// ----------------------------------------------------------------- substring

std::vector<SubstringExample> build_substring_examples(const Seq2Seq<float>& model,
                                                       const std::vector<SentencePair>& singles,
                                                       const std::vector<ConcatExample>& concat,
                                                       std::uint64_t seed) {
    if (concat.size() < 2) throw ConfigError("substring probe needs at least two concatenations");
    std::vector<Vector<float>> alone(singles.size());
    std::vector<bool> encoded(singles.size(), false);
    auto single_state = [&](std::size_t i) -> const Vector<float>& {
        if (!encoded[i]) {
            alone[i] = model.encode(singles[i].source).final_state();
            encoded[i] = true;
        }
        return alone[i];
    };
    Rng rng(seed);
    std::vector<SubstringExample> out;
    for (std::size_t k = 0; k < concat.size(); ++k) {
        const auto& ex = concat[k];
        const Vector<float> whole = model.encode(ex.pair.source).final_state();
        out.push_back({single_state(ex.first), whole, true, 1});
        out.push_back({single_state(ex.second), whole, true, 2});
        for (int n = 0; n < 2; ++n) {
            std::size_t other = rng.below(concat.size() - 1);
            if (other >= k) ++other;
            const std::size_t pick = rng.below(2) == 0 ? concat[other].first : concat[other].second;
            out.push_back({single_state(pick), whole, false, 0});
        }
    }
    return out;
}

namespace {

void require_balanced(std::span<const SubstringExample> examples, const char* split) {
    std::size_t pos = 0;
    for (const auto& e : examples) pos += e.positive ? 1 : 0;
    const std::size_t neg = examples.size() - pos;
    if (pos == 0 || neg == 0 || pos != neg) {
        throw ConfigError(std::string("substring probe ") + split + " split is unbalanced: " + std::to_string(pos) +
                          " positives, " + std::to_string(neg) + " negatives");
    }
}

Tensor<float> pair_features(std::span<const SubstringExample> examples) {
    std::vector<Vector<float>> rows;
    rows.reserve(examples.size());
    for (const auto& e : examples) {
        Vector<float> row(e.candidate.size() + e.whole.size());
        row << e.candidate, e.whole;
        rows.push_back(std::move(row));
    }
    return stack(rows);
}

}  // namespace

SubstringReport run_substring_probe(std::span<const SubstringExample> train, std::span<const SubstringExample> eval,
                                    const ProbeConfig& config) {
    require_balanced(train, "train");
    require_balanced(eval, "eval");
    const Tensor<float> x_train = pair_features(train);
    Tensor<float> y_train({train.size(), 1});
    for (std::size_t i = 0; i < train.size(); ++i) y_train[i] = train[i].positive ? 1.0f : 0.0f;

    ProbeMlp mlp(x_train.cols(), probe_hidden(config, train.front().whole.size()), 1, config.seed);
    mlp.fit(x_train, y_train, config);

    const Tensor<float> logits = mlp.forward(pair_features(eval));
    const float cut = logit_threshold(config.threshold);
    std::size_t correct = 0, first_hit = 0, first_total = 0, second_hit = 0, second_total = 0;
    for (std::size_t i = 0; i < eval.size(); ++i) {
        const bool predicted = logits[i] > cut;
        if (predicted == eval[i].positive) ++correct;
        if (eval[i].position == 1) {
            ++first_total;
            first_hit += predicted ? 1 : 0;
        } else if (eval[i].position == 2) {
            ++second_total;
            second_hit += predicted ? 1 : 0;
        }
    }
    auto pct = [](std::size_t a, std::size_t b) { return b ? 100.0 * static_cast<double>(a) / static_cast<double>(b) : 0.0; };
    return {pct(correct, eval.size()), pct(first_hit, first_total), pct(second_hit, second_total)};
}

// ------------------------------------------------------------------ cosine

double cosine_similarity(const Vector<float>& a, const Vector<float>& b) {
    if (a.size() != b.size()) throw DimensionError("cosine of vectors with different sizes");
    const double na = a.cast<double>().norm();
    const double nb = b.cast<double>().norm();
    if (na == 0.0 || nb == 0.0) throw EvaluationError("cosine similarity of a zero vector");
    const double c = a.cast<double>().dot(b.cast<double>()) / (na * nb);
    return std::clamp(c, -1.0, 1.0);
}

CosineReport run_cosine_analysis(const Seq2Seq<float>& model, const TemplateSpec& spec) {
    if (spec.templates.empty() || spec.fillers.empty()) throw ConfigError("cosine analysis needs templates and fillers");
    CosineReport report;
    for (const auto& filler : spec.fillers) {
        const auto filler_tokens = tokenize(filler);
        if (filler_tokens.size() != 1) throw ConfigError("filler '" + filler + "' must be a single token");
        double sum = 0.0;
        for (const auto& tmpl : spec.templates) {
            const auto tokens = tokenize(render_template(tmpl, filler));
            const auto it = std::find(tokens.begin(), tokens.end(), filler_tokens.front());
            if (it == tokens.end()) {
                throw ConfigError("filler '" + filler + "' absent from rendered template '" + tmpl + "'");
            }
            // ids carry a leading <bos>, so token i sits at trace position i + 1
            const auto pos = static_cast<std::size_t>(it - tokens.begin()) + 1;
            const auto trace = model.encode(encode_sentence(tokens, model.source_vocab()));
            sum += cosine_similarity(trace.state(pos - 1), trace.state(pos));
        }
        report.average_similarity.push_back({filler, sum / static_cast<double>(spec.templates.size())});
    }
    return report;
}

// ------------------------------------------------------------- penultimate

PenultimateReport run_penultimate_probe(const Seq2Seq<float>& model, const std::vector<std::string>& train_templates,
                                        const std::vector<std::string>& eval_templates,
                                        const std::vector<std::string>& candidates, const PenultimateConfig& config,
                                        const std::vector<std::string>& eval_fillers) {
    if (candidates.empty()) throw ConfigError("penultimate probe needs at least one candidate");
    if (train_templates.empty() || eval_templates.empty()) throw ConfigError("penultimate probe needs templates");
    const auto& fillers = eval_fillers.empty() ? candidates : eval_fillers;
    auto label_of = [&](const std::string& w) {
        auto it = std::find(candidates.begin(), candidates.end(), w);
        if (it == candidates.end()) throw ConfigError("filler '" + w + "' is not in the candidate set");
        return static_cast<TokenId>(it - candidates.begin());
    };

    std::vector<Vector<float>> rows;
    std::vector<TokenId> labels;
    for (const auto& tmpl : train_templates) {
        for (const auto& w : candidates) {
            rows.push_back(final_state_of(model, render_template(tmpl, w)));
            labels.push_back(label_of(w));
        }
    }
    const Tensor<float> x = stack(rows);
    const std::size_t k = candidates.size();
    Tensor<float> weight({k, x.cols()});
    Tensor<float> bias({k});
    init_uniform(weight, x.cols(), derive_seed(config.seed, 4));
    std::vector<Tensor<float>*> params = {&weight, &bias};
    for (auto* p : params) p->enable_grad();
    AdamState<float> adam;
    adam.config.lr = config.lr;
    std::vector<std::size_t> order(x.rows());
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        Rng rng(derive_seed(config.seed, 4000 + epoch));
        rng.shuffle(order);
        for (std::size_t start = 0; start < order.size(); start += config.batch) {
            const std::size_t end = std::min(order.size(), start + config.batch);
            const std::span<const std::size_t> idx(order.data() + start, end - start);
            Tensor<float> xb = gather_rows(x, idx);
            std::vector<TokenId> yb;
            for (auto i : idx) yb.push_back(labels[i]);
            for (auto* p : params) p->zero_grad();
            Tensor<float> logits = nn::linear_forward(xb, weight, bias);
            logits.enable_grad();
            nn::softmax_cross_entropy(logits, yb, -1);
            nn::linear_backward(xb, weight, bias, Tensor<float>(logits.shape(), logits.grad()));
            adam_step(params, adam);
        }
    }

    PenultimateReport report;
    report.candidates = k;
    for (const auto& w : fillers) {
        const TokenId label = label_of(w);
        std::size_t hits = 0;
        for (const auto& tmpl : eval_templates) {
            Tensor<float> feat({1, x.cols()});
            feat.mat().row(0) = final_state_of(model, render_template(tmpl, w)).transpose();
            const Tensor<float> logits = nn::linear_forward(feat, weight, bias);
            Eigen::Index best = 0;
            logits.mat().row(0).maxCoeff(&best);
            hits += static_cast<TokenId>(best) == label ? 1 : 0;
        }
        report.accuracy.push_back({w, static_cast<double>(hits) / static_cast<double>(eval_templates.size())});
    }
    return report;
}

// ------------------------------------------------------------ seen/unseen

SeenUnseenReport run_seen_unseen_bow(const Seq2Seq<float>& model, const std::vector<std::string>& seen,
                                     const std::vector<std::string>& unseen, const std::string& tracked,
                                     const ProbeConfig& config) {
    const auto& vocab = model.source_vocab();
    const auto tracked_id = vocab.find(tracked);
    if (!tracked_id) throw ConfigError("tracked word '" + tracked + "' is not in the source vocabulary");
    auto build = [&](const std::vector<std::string>& sentences, const char* split) {
        std::vector<TraceExample> out;
        bool present = false;
        for (const auto& s : sentences) {
            const IdSequence ids = encode_sentence(tokenize(s), vocab);
            BowVector bow = bag_of_words_vector(ids, vocab);
            present = present || bow[static_cast<std::size_t>(*tracked_id)];
            out.push_back({model.encode(ids), std::nullopt, std::move(bow)});
        }
        if (!present) throw ConfigError("tracked word '" + tracked + "' absent from the " + split + " sentences");
        return out;
    };
    const auto seen_examples = build(seen, "seen");
    const auto unseen_examples = build(unseen, "unseen");

    const Tensor<float> x = selected_features(seen_examples, StateSelector::kFinal);
    const Tensor<float> y = bow_targets(seen_examples);
    ProbeMlp mlp(x.cols(), probe_hidden(config, x.cols()), y.cols(), config.seed);
    mlp.fit(x, y, config);

    const float cut = logit_threshold(config.threshold);
    const auto column = static_cast<Eigen::Index>(*tracked_id);
    auto score = [&](const std::vector<TraceExample>& examples) {
        const Tensor<float> logits = mlp.forward(selected_features(examples, StateSelector::kFinal));
        Confusion c;
        for (std::size_t r = 0; r < examples.size(); ++r) {
            const bool predicted = logits.mat()(static_cast<Eigen::Index>(r), column) > cut;
            const bool actual = examples[r].target[static_cast<std::size_t>(column)] != 0;
            if (predicted && actual) ++c.tp;
            if (predicted && !actual) ++c.fp;
            if (!predicted && actual) ++c.fn;
        }
        const BowReport pct = report_from_confusion(c, config.threshold, "");
        return TrackedWordReport{pct.precision / 100.0, pct.recall / 100.0, examples.size()};
    };
    return {tracked, score(seen_examples), score(unseen_examples)};
}

// ------------------------------------------------------------ state dumps

void write_hidden_dump(const std::filesystem::path& path, const std::vector<HiddenRecord>& records) {
    std::vector<unsigned char> bytes = {'H', 'S', 'D', 'P'};
    auto u32 = [&bytes](std::uint32_t v) {
        for (int k = 0; k < 4; ++k) bytes.push_back(static_cast<unsigned char>(v >> (8 * k)));
    };
    u32(kDumpVersion);
    for (const auto& r : records) {
        u32(r.id);
        u32(static_cast<std::uint32_t>(r.states.rows()));
        u32(static_cast<std::uint32_t>(r.states.cols()));
        for (Eigen::Index i = 0; i < r.states.size(); ++i) u32(std::bit_cast<std::uint32_t>(r.states.data()[i]));
        bytes.push_back(r.boundary ? 1 : 0);
        if (r.boundary) u32(*r.boundary);
    }
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw InputError("cannot write hidden-state dump " + tmp.string());
        out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    }
    std::filesystem::rename(tmp, path);
}

std::vector<HiddenRecord> read_hidden_dump(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open hidden-state dump " + path.string());
    const std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    std::size_t pos = 0;
    auto need = [&](std::size_t n, const char* what) {
        if (bytes.size() - pos < n) throw FormatError(std::string("truncated hidden-state dump reading ") + what, pos);
    };
    auto u32 = [&](const char* what) {
        need(4, what);
        std::uint32_t v = 0;
        for (int k = 0; k < 4; ++k) v |= static_cast<std::uint32_t>(bytes[pos + k]) << (8 * k);
        pos += 4;
        return v;
    };
    need(4, "magic");
    if (std::memcmp(bytes.data(), "HSDP", 4) != 0) throw FormatError("bad hidden-state dump magic", 0);
    pos = 4;
    const std::uint32_t version = u32("version");
    if (version != kDumpVersion) throw FormatError("unsupported hidden-state dump version " + std::to_string(version), 4);
    std::vector<HiddenRecord> out;
    while (pos < bytes.size()) {
        HiddenRecord r;
        r.id = u32("example id");
        const std::uint32_t t = u32("length");
        const std::uint32_t h = u32("hidden size");
        if (t == 0 || h == 0) throw FormatError("empty state matrix", pos);
        need(static_cast<std::size_t>(t) * h * 4, "states");
        r.states.resize(t, h);
        for (Eigen::Index i = 0; i < r.states.size(); ++i) r.states.data()[i] = std::bit_cast<float>(u32("state"));
        need(1, "boundary flag");
        const unsigned char flag = bytes[pos++];
        if (flag > 1) throw FormatError("bad boundary flag", pos - 1);
        if (flag) r.boundary = u32("boundary");
        out.push_back(std::move(r));
    }
    return out;
}

// --------------------------------------------------------------- reports

nlohmann::ordered_json to_json(const BowReport& r) {
    nlohmann::ordered_json j;
    j["condition"] = r.condition;
    j["precision"] = r.precision;
    j["recall"] = r.recall;
    j["f1"] = r.f1;
    j["threshold"] = r.threshold;
    return j;
}

nlohmann::ordered_json to_json(const SubstringReport& r) {
    nlohmann::ordered_json j;
    j["accuracy"] = r.accuracy;
    j["first_sentence_recall"] = r.first_recall;
    j["second_sentence_recall"] = r.second_recall;
    return j;
}

nlohmann::ordered_json to_json(const CosineReport& r) {
    nlohmann::ordered_json j = nlohmann::ordered_json::object();
    for (const auto& w : r.average_similarity) j[w.word] = w.value;
    return nlohmann::ordered_json{{"average_similarity", j}};
}

nlohmann::ordered_json to_json(const PenultimateReport& r) {
    nlohmann::ordered_json j = nlohmann::ordered_json::object();
    for (const auto& w : r.accuracy) j[w.word] = w.value;
    return nlohmann::ordered_json{{"accuracy", j}, {"candidates", r.candidates}};
}

nlohmann::ordered_json to_json(const SeenUnseenReport& r) {
    auto one = [](const TrackedWordReport& t) {
        return nlohmann::ordered_json{{"precision", t.precision}, {"recall", t.recall}, {"sentences", t.sentences}};
    };
    return nlohmann::ordered_json{{"tracked", r.tracked}, {"seen", one(r.seen)}, {"unseen", one(r.unseen)}};
}

}  // namespace cnmt::probes
