#include "cnmt/pretrain.hpp"

#include <cmath>
#include <numeric>

#include "cnmt/checkpoint.hpp"

namespace cnmt {

namespace {
constexpr std::uint64_t kHeadStream = 12;
}

template <typename T>
StandaloneEncoder<T> StandaloneEncoder<T>::fresh(Vocabulary source_vocab, const ModelConfig& config) {
    StandaloneEncoder out;
    out.encoder = Encoder<T>::init(source_vocab.size(), config);
    out.source_vocab = std::move(source_vocab);
    out.config = config;
    return out;
}

template <typename T>
std::vector<std::pair<std::string, const Tensor<T>*>> StandaloneEncoder<T>::named_parameters() const {
    NamedParams<T> named;
    const_cast<Encoder<T>&>(encoder).append_params(named, "encoder.");
    std::vector<std::pair<std::string, const Tensor<T>*>> out;
    for (auto& [n, t] : named) out.emplace_back(n, t);
    return out;
}

template <typename T>
BowPretrainHead<T> make_pretrain_head(std::size_t vocab_size, const ModelConfig& config, bool zero) {
    BowPretrainHead<T> head{Tensor<T>({vocab_size, config.hidden}), Tensor<T>({vocab_size})};
    if (!zero) init_uniform(head.weight, config.hidden, derive_seed(config.seed, kHeadStream));
    return head;
}

template <typename T>
T bow_pretrain_loss(Encoder<T>& encoder, BowPretrainHead<T>& head, const IdSequence& source,
                    const BowVector& target, T scale, bool accumulate) {
    const std::size_t vocab = head.weight.rows();
    if (target.size() != vocab) {
        throw DimensionError("bag-of-words target has " + std::to_string(target.size()) + " entries, head has " +
                             std::to_string(vocab));
    }
    typename Encoder<T>::Tape tape;
    const EncoderTrace<T> trace = encoder.encode(source, tape);
    const Vector<T> h = trace.final_state();

    Tensor<T> logits({1, vocab});
    logits.mat().row(0) = (head.weight.mat() * h + head.bias.vec()).transpose();
    Tensor<T> y({1, vocab});
    for (std::size_t i = 0; i < vocab; ++i) y[i] = static_cast<T>(target[i]);
    if (accumulate) logits.enable_grad();
    const T loss = nn::bce_with_logits(logits, y);
    if (!accumulate) return loss;

    const Vector<T> dlogits = logits.grad_mat().row(0).transpose() * scale;
    head.weight.grad_mat().noalias() += dlogits * h.transpose();
    head.bias.grad_vec() += dlogits;
    MatrixRM<T> dstates = MatrixRM<T>::Zero(trace.states.rows(), trace.states.cols());
    dstates.row(dstates.rows() - 1) = (head.weight.mat().transpose() * dlogits).transpose();
    encoder.backward(tape, dstates, Vector<T>::Zero(trace.states.cols()));
    return loss;
}

template <typename T>
TrainingLog pretrain_encoder(StandaloneEncoder<T>& model, const std::vector<IdSequence>& sources,
                             const PretrainConfig& config, const EpochCallback& on_epoch) {
    if (sources.empty()) throw InputError("cannot pretrain on an empty corpus");
    if (config.batch == 0) throw ConfigError("batch size must be positive");
    TrainingLog log;
    if (config.epochs == 0) return log;

    BowPretrainHead<T> head = make_pretrain_head<T>(model.source_vocab.size(), model.config, config.zero_head);
    NamedParams<T> named;
    model.encoder.append_params(named, "encoder.");
    named.emplace_back("head.weight", &head.weight);
    named.emplace_back("head.bias", &head.bias);
    const auto params = param_list(named);
    for (auto* p : params) p->enable_grad();
    AdamState<T> adam;
    adam.config = config.adam;

    std::vector<BowVector> targets;
    targets.reserve(sources.size());
    for (const auto& s : sources) targets.push_back(bag_of_words_vector(s, model.source_vocab));

    std::vector<std::size_t> order(sources.size());
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        Rng rng(derive_seed(config.seed, 2000 + epoch));
        rng.shuffle(order);
        double total = 0.0;
        for (std::size_t start = 0; start < order.size(); start += config.batch) {
            const std::size_t end = std::min(order.size(), start + config.batch);
            const T scale = T(1) / static_cast<T>(end - start);
            for (auto* p : params) p->zero_grad();
            for (std::size_t k = start; k < end; ++k) {
                total += static_cast<double>(
                    bow_pretrain_loss(model.encoder, head, sources[order[k]], targets[order[k]], scale, true));
            }
            clip_grad_norm(params, config.clip);
            adam_step(params, adam);
        }
        const double mean = total / static_cast<double>(sources.size());
        if (!std::isfinite(mean)) throw EvaluationError("pretraining diverged: non-finite loss");
        log.epoch_loss.push_back(mean);
        if (on_epoch) on_epoch(epoch, mean);
    }
    for (auto* p : params) p->drop_grad();
    return log;
}

template <typename T>
void transfer_encoder(const StandaloneEncoder<T>& pretrained, Seq2Seq<T>& model) {
    if (pretrained.config.hidden != model.config().hidden) {
        throw TransferError("hidden size mismatch: pretrained encoder has " +
                            std::to_string(pretrained.config.hidden) + ", model has " +
                            std::to_string(model.config().hidden));
    }
    if (pretrained.config.embed != model.config().embed) {
        throw TransferError("embedding size mismatch: pretrained encoder has " +
                            std::to_string(pretrained.config.embed) + ", model has " +
                            std::to_string(model.config().embed));
    }
    if (!(pretrained.source_vocab == model.source_vocab())) {
        throw TransferError("source vocabulary mismatch between pretrained encoder (" +
                            std::to_string(pretrained.source_vocab.size()) + " tokens) and model (" +
                            std::to_string(model.source_vocab().size()) + " tokens)");
    }
    model.encoder.embedding = pretrained.encoder.embedding;
    model.encoder.lstm = pretrained.encoder.lstm;
    model.encoder.embedding.drop_grad();
    model.encoder.lstm.w_ih.drop_grad();
    model.encoder.lstm.w_hh.drop_grad();
    model.encoder.lstm.bias.drop_grad();
}

template <typename T>
void save_encoder_checkpoint(const StandaloneEncoder<T>& encoder, const std::filesystem::path& path) {
    Container c;
    c.metadata["format"] = "c2sq";
    c.metadata["component"] = "encoder_only";
    c.metadata["dtype"] = dtype_of<T>() == DType::kFloat32 ? "f32" : "f64";
    c.metadata["config"] = config_to_json(encoder.config);
    c.metadata["source_vocab"] = encoder.source_vocab.tokens();
    for (const auto& [name, t] : encoder.named_parameters()) c.tensors.push_back(to_raw(name, *t));
    write_container(path, c);
}

template <typename T>
StandaloneEncoder<T> load_encoder_checkpoint(const std::filesystem::path& path) {
    const Container c = read_container(path);
    if (c.metadata.value("component", std::string()) != "encoder_only") {
        throw FormatError("checkpoint " + path.string() + " does not hold a standalone encoder", 0);
    }
    const ModelConfig config = config_from_json(c.metadata.at("config"));
    Vocabulary vocab;
    try {
        vocab = Vocabulary::from_tokens(c.metadata.at("source_vocab").get<std::vector<std::string>>());
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("checkpoint vocabulary: ") + e.what(), 0);
    }
    auto out = StandaloneEncoder<T>::fresh(std::move(vocab), config);
    NamedParams<T> named;
    out.encoder.append_params(named, "encoder.");
    for (auto& [name, t] : named) *t = from_raw<T>(c.find(name), t->shape());
    return out;
}

#define CNMT_INSTANTIATE(T)                                                                                 \
    template struct StandaloneEncoder<T>;                                                                   \
    template BowPretrainHead<T> make_pretrain_head(std::size_t, const ModelConfig&, bool);                  \
    template T bow_pretrain_loss(Encoder<T>&, BowPretrainHead<T>&, const IdSequence&, const BowVector&, T,  \
                                 bool);                                                                     \
    template TrainingLog pretrain_encoder(StandaloneEncoder<T>&, const std::vector<IdSequence>&,            \
                                          const PretrainConfig&, const EpochCallback&);                     \
    template void transfer_encoder(const StandaloneEncoder<T>&, Seq2Seq<T>&);                               \
    template void save_encoder_checkpoint(const StandaloneEncoder<T>&, const std::filesystem::path&);       \
    template StandaloneEncoder<T> load_encoder_checkpoint(const std::filesystem::path&);

CNMT_INSTANTIATE(float)
CNMT_INSTANTIATE(double)

#undef CNMT_INSTANTIATE

}  // namespace cnmt
