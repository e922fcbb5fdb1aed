#include "cnmt/seq2seq.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>

namespace cnmt {

namespace {

// Seed streams for parameter initialization. Encoder streams are shared
// with the pretraining path so both start from identical weights.
enum InitStream : std::uint64_t {
    kSrcEmbed = 1,
    kEncIh,
    kEncHh,
    kEncBias,
    kTgtEmbed,
    kDecIh,
    kDecHh,
    kDecBias,
    kAttnA,
    kAttnC,
    kAttnOut,
};

constexpr double kEmbeddingStd = 0.1;

}  // namespace

template <typename T>
std::vector<Tensor<T>*> param_list(const NamedParams<T>& named) {
    std::vector<Tensor<T>*> out;
    out.reserve(named.size());
    for (const auto& [name, t] : named) out.push_back(t);
    return out;
}

template <typename T>
void init_uniform(Tensor<T>& t, std::size_t hidden, std::uint64_t seed) {
    Rng rng(seed);
    const double bound = 1.0 / std::sqrt(static_cast<double>(hidden));
    for (T& v : t.data()) v = static_cast<T>(rng.uniform(-bound, bound));
}

template <typename T>
void init_normal(Tensor<T>& t, double stddev, std::uint64_t seed) {
    Rng rng(seed);
    for (T& v : t.data()) v = static_cast<T>(rng.normal(0.0, stddev));
}

// ---------------------------------------------------------------- encoder

template <typename T>
Encoder<T> Encoder<T>::init(std::size_t vocab_size, const ModelConfig& config) {
    if (config.hidden == 0 || config.embed == 0) throw ConfigError("hidden and embedding sizes must be positive");
    Encoder enc;
    enc.embedding = Tensor<T>({vocab_size, config.embed});
    enc.lstm = nn::LstmParams<T>::zeros(config.embed, config.hidden);
    init_normal(enc.embedding, kEmbeddingStd, derive_seed(config.seed, kSrcEmbed));
    init_uniform(enc.lstm.w_ih, config.hidden, derive_seed(config.seed, kEncIh));
    init_uniform(enc.lstm.w_hh, config.hidden, derive_seed(config.seed, kEncHh));
    init_uniform(enc.lstm.bias, config.hidden, derive_seed(config.seed, kEncBias));
    return enc;
}

template <typename T>
EncoderTrace<T> Encoder<T>::encode(const IdSequence& ids) const {
    Tape scratch;
    return encode(ids, scratch);
}

template <typename T>
EncoderTrace<T> Encoder<T>::encode(const IdSequence& ids, Tape& tape) const {
    if (ids.empty()) throw InputError("cannot encode an empty id sequence");
    const auto h = static_cast<Eigen::Index>(lstm.hidden_size());
    const auto vocab = static_cast<TokenId>(embedding.rows());
    for (TokenId id : ids) {
        if (id < 0 || id >= vocab) {
            throw IndexError("source id " + std::to_string(id) + " outside [0, " + std::to_string(vocab) + ")");
        }
    }
    tape.ids = ids;
    tape.steps.resize(ids.size());
    EncoderTrace<T> trace;
    trace.states.resize(static_cast<Eigen::Index>(ids.size()), h);
    Vector<T> h_prev = Vector<T>::Zero(h);
    Vector<T> c_prev = Vector<T>::Zero(h);
    for (std::size_t t = 0; t < ids.size(); ++t) {
        const Vector<T> x = embedding.mat().row(ids[t]).transpose();
        nn::lstm_forward(lstm, x, h_prev, c_prev, tape.steps[t]);
        h_prev = tape.steps[t].h;
        c_prev = tape.steps[t].c;
        trace.states.row(static_cast<Eigen::Index>(t)) = h_prev.transpose();
    }
    trace.final_cell = c_prev;
    return trace;
}

template <typename T>
void Encoder<T>::backward(const Tape& tape, const MatrixRM<T>& dstates, const Vector<T>& dcell) {
    const auto h = static_cast<Eigen::Index>(lstm.hidden_size());
    Vector<T> dh_next = Vector<T>::Zero(h);
    Vector<T> dc_next = dcell;
    Vector<T> dh_prev(h), dc_prev(h);
    Vector<T> dx(static_cast<Eigen::Index>(embedding.cols()));
    auto emb_grad = embedding.grad_mat();
    for (std::size_t t = tape.steps.size(); t-- > 0;) {
        Vector<T> dh = dstates.row(static_cast<Eigen::Index>(t)).transpose() + dh_next;
        dx.setZero();
        nn::lstm_backward(lstm, tape.steps[t], dh, dc_next, &dx, dh_prev, dc_prev);
        emb_grad.row(tape.ids[t]) += dx.transpose();
        dh_next = dh_prev;
        dc_next = dc_prev;
    }
}

template <typename T>
void Encoder<T>::append_params(NamedParams<T>& out, const std::string& prefix) {
    out.emplace_back(prefix + "embedding", &embedding);
    out.emplace_back(prefix + "w_ih", &lstm.w_ih);
    out.emplace_back(prefix + "w_hh", &lstm.w_hh);
    out.emplace_back(prefix + "bias", &lstm.bias);
}

// -------------------------------------------------------------- attention

template <typename T>
Vector<T> attention_weights(const Vector<T>& h_dec, const MatrixRM<T>& states, const Tensor<T>& w_a,
                            std::size_t valid_length) {
    const auto rows = states.rows();
    const auto valid = valid_length == 0 ? rows : static_cast<Eigen::Index>(valid_length);
    if (valid > rows || rows == 0) throw DimensionError("attention: valid length exceeds the number of states");
    if (w_a.rows() != w_a.cols() || static_cast<Eigen::Index>(w_a.rows()) != h_dec.size() ||
        states.cols() != h_dec.size()) {
        throw DimensionError("attention: decoder state [" + std::to_string(h_dec.size()) + "], states [" +
                             std::to_string(rows) + "x" + std::to_string(states.cols()) + "], W_a " +
                             shape_to_string(w_a.shape()));
    }
    Vector<T> weights = Vector<T>::Zero(rows);
    const Vector<T> query = w_a.mat().transpose() * h_dec;  // h_dec' W_a h_s = (W_a' h_dec) . h_s
    Vector<T> scores = states.topRows(valid) * query;
    nn::softmax_inplace<T>(scores);
    weights.head(valid) = scores;
    return weights;
}

template <typename T>
void attention_backward(const Vector<T>& h_dec, const MatrixRM<T>& states, Tensor<T>& w_a, const Vector<T>& alpha,
                        const Vector<T>& dalpha, Vector<T>& dh_dec, MatrixRM<T>& dstates) {
    const Vector<T> dscore = alpha.array() * (dalpha.array() - alpha.dot(dalpha));
    const Vector<T> weighted = states.transpose() * dscore;  // sum_s dscore_s h_s
    dh_dec.noalias() += w_a.mat() * weighted;
    dstates.noalias() += dscore * (w_a.mat().transpose() * h_dec).transpose();
    if (w_a.has_grad()) w_a.grad_mat().noalias() += h_dec * weighted.transpose();
}

// ------------------------------------------------------------------ model

template <typename T>
Seq2Seq<T>::Seq2Seq(Vocabulary source_vocab, Vocabulary target_vocab, ModelConfig config)
    : source_vocab_(std::move(source_vocab)), target_vocab_(std::move(target_vocab)), config_(config) {
    const std::size_t h = config.hidden;
    encoder = Encoder<T>::init(source_vocab_.size(), config);
    target_embedding = Tensor<T>({target_vocab_.size(), config.embed});
    decoder = nn::LstmParams<T>::zeros(config.embed, h);
    w_a = Tensor<T>({h, h});
    w_c = Tensor<T>({h, 2 * h});
    w_out = Tensor<T>({target_vocab_.size(), h});
    init_normal(target_embedding, kEmbeddingStd, derive_seed(config.seed, kTgtEmbed));
    init_uniform(decoder.w_ih, h, derive_seed(config.seed, kDecIh));
    init_uniform(decoder.w_hh, h, derive_seed(config.seed, kDecHh));
    init_uniform(decoder.bias, h, derive_seed(config.seed, kDecBias));
    init_uniform(w_a, h, derive_seed(config.seed, kAttnA));
    init_uniform(w_c, h, derive_seed(config.seed, kAttnC));
    init_uniform(w_out, h, derive_seed(config.seed, kAttnOut));
}

template <typename T>
DecoderState<T> Seq2Seq<T>::initial_state(const EncoderTrace<T>& trace) const {
    return {trace.final_state(), trace.final_cell};
}

template <typename T>
Vector<T> Seq2Seq<T>::decode_step(TokenId y_prev, DecoderState<T>& state, const EncoderTrace<T>& trace) const {
    if (y_prev < 0 || static_cast<std::size_t>(y_prev) >= target_vocab_.size()) {
        throw IndexError("target id " + std::to_string(y_prev) + " outside target vocabulary");
    }
    const auto h = static_cast<Eigen::Index>(config_.hidden);
    nn::LstmStep<T> step;
    const Vector<T> x = target_embedding.mat().row(y_prev).transpose();
    nn::lstm_forward(decoder, x, state.h, state.c, step);
    state.h = step.h;
    state.c = step.c;
    const Vector<T> alpha = attention_weights(step.h, trace.states, w_a);
    Vector<T> cat(2 * h);
    cat.head(h) = trace.states.transpose() * alpha;
    cat.tail(h) = step.h;
    const Vector<T> attentional = (w_c.mat() * cat).array().tanh();
    return w_out.mat() * attentional;
}

template <typename T>
IdSequence Seq2Seq<T>::greedy_translate(const IdSequence& source, std::size_t max_len) const {
    if (max_len == 0) throw ConfigError("max_len must be at least 1");
    const EncoderTrace<T> trace = encode(source);
    DecoderState<T> state = initial_state(trace);
    IdSequence out;
    TokenId prev = Vocabulary::kBos;
    while (out.size() < max_len) {
        const Vector<T> logits = decode_step(prev, state, trace);
        Eigen::Index best = 0;
        logits.maxCoeff(&best);
        const auto next = static_cast<TokenId>(best);
        if (next == Vocabulary::kEos) break;
        out.push_back(next);
        prev = next;
    }
    return out;
}

namespace {

template <typename T>
struct DecoderTapeStep {
    nn::LstmStep<T> lstm;
    Vector<T> alpha;
    Vector<T> cat;          // [context; h_dec]
    Vector<T> attentional;  // tanh(W_c cat)
    Vector<T> probs;
    TokenId input = 0;
    TokenId target = 0;
};

}  // namespace

template <typename T>
T Seq2Seq<T>::forward_backward(const SentencePair& pair, T scale, bool accumulate) {
    const auto& tgt = pair.target;
    if (tgt.size() < 2) throw InputError("target sequence needs at least <bos> and <eos>");
    const auto h = static_cast<Eigen::Index>(config_.hidden);
    const auto vt = static_cast<TokenId>(target_vocab_.size());

    typename Encoder<T>::Tape etape;
    const EncoderTrace<T> trace = encoder.encode(pair.source, etape);
    const MatrixRM<T>& states = trace.states;
    const MatrixRM<T> keys = states * w_a.mat().transpose();  // row s = (W_a h_s)'

    std::vector<DecoderTapeStep<T>> tape(tgt.size() - 1);
    Vector<T> h_prev = trace.final_state();
    Vector<T> c_prev = trace.final_cell;
    T loss = T(0);
    for (std::size_t k = 0; k + 1 < tgt.size(); ++k) {
        auto& st = tape[k];
        st.input = tgt[k];
        st.target = tgt[k + 1];
        if (st.input < 0 || st.input >= vt || st.target < 0 || st.target >= vt) {
            throw IndexError("target id outside target vocabulary");
        }
        const Vector<T> x = target_embedding.mat().row(st.input).transpose();
        nn::lstm_forward(decoder, x, h_prev, c_prev, st.lstm);
        h_prev = st.lstm.h;
        c_prev = st.lstm.c;
        st.alpha = keys * st.lstm.h;
        nn::softmax_inplace<T>(st.alpha);
        st.cat.resize(2 * h);
        st.cat.head(h) = states.transpose() * st.alpha;
        st.cat.tail(h) = st.lstm.h;
        st.attentional = (w_c.mat() * st.cat).array().tanh();
        st.probs = w_out.mat() * st.attentional;
        const T top = st.probs.maxCoeff();
        const T log_z = top + std::log((st.probs.array() - top).exp().sum());
        loss += log_z - st.probs[st.target];
        st.probs = (st.probs.array() - log_z).exp();
    }
    if (!accumulate) return loss;

    MatrixRM<T> dstates = MatrixRM<T>::Zero(states.rows(), h);
    MatrixRM<T> dkeys = MatrixRM<T>::Zero(states.rows(), h);
    Vector<T> dh_next = Vector<T>::Zero(h);
    Vector<T> dc_next = Vector<T>::Zero(h);
    Vector<T> dh_prev(h), dc_prev(h);
    Vector<T> dx(static_cast<Eigen::Index>(config_.embed));
    auto g_out = w_out.grad_mat();
    auto g_c = w_c.grad_mat();
    auto g_temb = target_embedding.grad_mat();
    for (std::size_t k = tape.size(); k-- > 0;) {
        const auto& st = tape[k];
        Vector<T> dlogits = st.probs * scale;
        dlogits[st.target] -= scale;
        g_out.noalias() += dlogits * st.attentional.transpose();
        const Vector<T> dz =
            (w_out.mat().transpose() * dlogits).array() * (T(1) - st.attentional.array().square());
        g_c.noalias() += dz * st.cat.transpose();
        const Vector<T> dcat = w_c.mat().transpose() * dz;
        const auto dctx = dcat.head(h);
        Vector<T> dh_dec = dcat.tail(h);

        const Vector<T> dalpha = states * dctx;
        dstates.noalias() += st.alpha * dctx.transpose();
        const T mean = st.alpha.dot(dalpha);
        const Vector<T> dscore = st.alpha.array() * (dalpha.array() - mean);
        dh_dec.noalias() += keys.transpose() * dscore;
        dkeys.noalias() += dscore * st.lstm.h.transpose();
        dh_dec += dh_next;

        dx.setZero();
        nn::lstm_backward(decoder, st.lstm, dh_dec, dc_next, &dx, dh_prev, dc_prev);
        g_temb.row(st.input) += dx.transpose();
        dh_next = dh_prev;
        dc_next = dc_prev;
    }
    // keys = states W_a'
    w_a.grad_mat().noalias() += dkeys.transpose() * states;
    dstates.noalias() += dkeys * w_a.mat();
    dstates.row(states.rows() - 1) += dh_next.transpose();
    encoder.backward(etape, dstates, dc_next);
    return loss;
}

template <typename T>
NamedParams<T> Seq2Seq<T>::named_parameters() {
    NamedParams<T> out;
    encoder.append_params(out, "encoder.");
    out.emplace_back("decoder.embedding", &target_embedding);
    out.emplace_back("decoder.w_ih", &decoder.w_ih);
    out.emplace_back("decoder.w_hh", &decoder.w_hh);
    out.emplace_back("decoder.bias", &decoder.bias);
    out.emplace_back("attention.w_a", &w_a);
    out.emplace_back("attention.w_c", &w_c);
    out.emplace_back("attention.w_out", &w_out);
    return out;
}

template <typename T>
std::vector<std::pair<std::string, const Tensor<T>*>> Seq2Seq<T>::named_parameters() const {
    std::vector<std::pair<std::string, const Tensor<T>*>> out;
    for (auto& [name, t] : const_cast<Seq2Seq*>(this)->named_parameters()) out.emplace_back(name, t);
    return out;
}

template <typename T>
void Seq2Seq<T>::enable_grads() {
    for (auto& [name, t] : named_parameters()) t->enable_grad();
}

template <typename T>
void Seq2Seq<T>::zero_grads() {
    for (auto& [name, t] : named_parameters()) t->zero_grad();
}

// --------------------------------------------------------------- training

template <typename T>
TrainingLog train(Seq2Seq<T>& model, const std::vector<SentencePair>& corpus, const TrainConfig& config,
                  const EpochCallback& on_epoch) {
    if (corpus.empty()) throw InputError("cannot train on an empty corpus");
    TrainingLog log;
    if (config.epochs == 0) return log;
    model.enable_grads();
    auto named = model.named_parameters();
    const auto params = param_list(named);
    AdamState<T> adam;
    adam.config = config.adam;

    std::vector<std::size_t> order(corpus.size());
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        if (config.shuffle) {
            Rng rng(derive_seed(config.seed, 1000 + epoch));
            rng.shuffle(order);
        }
        std::vector<SentencePair> shuffled;
        shuffled.reserve(corpus.size());
        for (auto i : order) shuffled.push_back(corpus[i]);

        double epoch_loss = 0.0;
        std::size_t epoch_tokens = 0;
        for (const Batch& batch : batch_pad(shuffled, config.batch)) {
            std::size_t tokens = 0;
            for (auto len : batch.target_lengths) tokens += len - 1;
            const T scale = T(1) / static_cast<T>(tokens);
            model.zero_grads();
            double batch_loss = 0.0;
            for (std::size_t b = 0; b < batch.size; ++b) {
                SentencePair row{batch.source_row(b), batch.target_row(b)};
                batch_loss += static_cast<double>(model.forward_backward(row, scale));
            }
            clip_grad_norm(params, config.clip);
            adam_step(params, adam);
            epoch_loss += batch_loss;
            epoch_tokens += tokens;
        }
        const double mean = epoch_loss / static_cast<double>(epoch_tokens);
        if (!std::isfinite(mean)) throw EvaluationError("training diverged: non-finite loss");
        log.epoch_loss.push_back(mean);
        if (on_epoch) on_epoch(epoch, mean);
    }
    for (auto* p : params) p->drop_grad();
    return log;
}

std::size_t default_max_len(const IdSequence& source) {
    const std::size_t content = source.size() >= 2 ? source.size() - 2 : source.size();
    return 2 + 2 * content;
}

template <typename T>
std::vector<std::vector<std::string>> translate_all(const Seq2Seq<T>& model, const std::vector<TextPair>& pairs,
                                                    std::size_t max_len) {
    std::vector<std::vector<std::string>> out;
    out.reserve(pairs.size());
    for (const auto& p : pairs) {
        const IdSequence src = encode_sentence(tokenize(p.source), model.source_vocab());
        const std::size_t cap = max_len ? max_len : default_max_len(src);
        out.push_back(decode_ids(model.greedy_translate(src, cap), model.target_vocab()));
    }
    return out;
}

template <typename T>
std::uint64_t parameter_hash(const std::vector<std::pair<std::string, const Tensor<T>*>>& params) {
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    auto mix = [&hash](const void* data, std::size_t n) {
        const auto* bytes = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < n; ++i) {
            hash ^= bytes[i];
            hash *= 0x100000001b3ULL;
        }
    };
    for (const auto& [name, t] : params) {
        mix(name.data(), name.size());
        for (auto d : t->shape()) mix(&d, sizeof d);
        mix(t->data().data(), t->size() * sizeof(T));
    }
    return hash;
}

#define CNMT_INSTANTIATE(T)                                                                                     \
    template std::vector<Tensor<T>*> param_list(const NamedParams<T>&);                                         \
    template void init_uniform(Tensor<T>&, std::size_t, std::uint64_t);                                        \
    template void init_normal(Tensor<T>&, double, std::uint64_t);                                               \
    template struct Encoder<T>;                                                                                 \
    template Vector<T> attention_weights(const Vector<T>&, const MatrixRM<T>&, const Tensor<T>&, std::size_t);  \
    template void attention_backward(const Vector<T>&, const MatrixRM<T>&, Tensor<T>&, const Vector<T>&,         \
                                     const Vector<T>&, Vector<T>&, MatrixRM<T>&);                                \
    template class Seq2Seq<T>;                                                                                  \
    template TrainingLog train(Seq2Seq<T>&, const std::vector<SentencePair>&, const TrainConfig&,               \
                               const EpochCallback&);                                                           \
    template std::vector<std::vector<std::string>> translate_all(const Seq2Seq<T>&,                             \
                                                                 const std::vector<TextPair>&, std::size_t);   \
    template std::uint64_t parameter_hash(const std::vector<std::pair<std::string, const Tensor<T>*>>&);

CNMT_INSTANTIATE(float)
CNMT_INSTANTIATE(double)

#undef CNMT_INSTANTIATE

}  // namespace cnmt
