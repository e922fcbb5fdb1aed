#include "cnmt/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "cnmt/errors.hpp"

namespace cnmt {

namespace {

constexpr char kMagic[4] = {'C', '2', 'S', 'Q'};

class Writer {
public:
    void bytes(const void* data, std::size_t n) {
        const auto* p = static_cast<const unsigned char*>(data);
        out_.insert(out_.end(), p, p + n);
    }
    void u8(std::uint8_t v) { out_.push_back(v); }
    void u32(std::uint32_t v) {
        for (int k = 0; k < 4; ++k) out_.push_back(static_cast<unsigned char>(v >> (8 * k)));
    }
    std::vector<unsigned char> take() { return std::move(out_); }

private:
    std::vector<unsigned char> out_;
};

class Reader {
public:
    explicit Reader(const std::vector<unsigned char>& data) : data_(data) {}

    std::size_t offset() const { return pos_; }
    bool done() const { return pos_ == data_.size(); }

    void need(std::size_t n, const char* what) const {
        if (data_.size() - pos_ < n) throw FormatError(std::string("truncated checkpoint reading ") + what, pos_);
    }
    std::uint8_t u8(const char* what) {
        need(1, what);
        return data_[pos_++];
    }
    std::uint32_t u32(const char* what) {
        need(4, what);
        std::uint32_t v = 0;
        for (int k = 0; k < 4; ++k) v |= static_cast<std::uint32_t>(data_[pos_ + k]) << (8 * k);
        pos_ += 4;
        return v;
    }
    std::vector<unsigned char> take(std::size_t n, const char* what) {
        need(n, what);
        std::vector<unsigned char> out(data_.begin() + static_cast<std::ptrdiff_t>(pos_),
                                       data_.begin() + static_cast<std::ptrdiff_t>(pos_ + n));
        pos_ += n;
        return out;
    }

private:
    const std::vector<unsigned char>& data_;
    std::size_t pos_ = 0;
};

std::size_t dtype_width(DType d) { return d == DType::kFloat32 ? 4 : 8; }

template <typename U>
void store_le(U bits, unsigned char* dst) {
    for (std::size_t k = 0; k < sizeof(U); ++k) dst[k] = static_cast<unsigned char>(bits >> (8 * k));
}

template <typename U>
U load_le(const unsigned char* src) {
    U bits = 0;
    for (std::size_t k = 0; k < sizeof(U); ++k) bits |= static_cast<U>(src[k]) << (8 * k);
    return bits;
}

template <typename T>
using BitsOf = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;

}  // namespace

const RawTensor& Container::find(const std::string& name) const {
    for (const auto& t : tensors) {
        if (t.name == name) return t;
    }
    throw FormatError("checkpoint has no tensor named '" + name + "'", 0);
}

template <typename T>
RawTensor to_raw(const std::string& name, const Tensor<T>& t) {
    RawTensor raw{name, dtype_of<T>(), t.shape(), {}};
    raw.payload.resize(t.size() * sizeof(T));
    for (std::size_t i = 0; i < t.size(); ++i) {
        store_le(std::bit_cast<BitsOf<T>>(t[i]), raw.payload.data() + i * sizeof(T));
    }
    return raw;
}

template <typename T>
Tensor<T> from_raw(const RawTensor& raw, const Shape& expected_shape) {
    if (raw.dtype != dtype_of<T>()) {
        throw FormatError("tensor '" + raw.name + "' has dtype " + std::to_string(static_cast<int>(raw.dtype)) +
                              ", expected " + std::to_string(static_cast<int>(dtype_of<T>())),
                          0);
    }
    if (raw.shape != expected_shape) {
        throw FormatError("tensor '" + raw.name + "' has shape " + shape_to_string(raw.shape) + ", expected " +
                              shape_to_string(expected_shape),
                          0);
    }
    Tensor<T> t(raw.shape);
    for (std::size_t i = 0; i < t.size(); ++i) {
        t[i] = std::bit_cast<T>(load_le<BitsOf<T>>(raw.payload.data() + i * sizeof(T)));
    }
    return t;
}

std::vector<unsigned char> serialize_container(const Container& container) {
    Writer w;
    w.bytes(kMagic, 4);
    w.u32(kCheckpointVersion);
    auto meta = container.metadata;
    meta["num_tensors"] = container.tensors.size();
    const std::string text = meta.dump();
    w.u32(static_cast<std::uint32_t>(text.size()));
    w.bytes(text.data(), text.size());
    for (const auto& t : container.tensors) {
        w.u32(static_cast<std::uint32_t>(t.name.size()));
        w.bytes(t.name.data(), t.name.size());
        w.u8(static_cast<std::uint8_t>(t.dtype));
        w.u32(static_cast<std::uint32_t>(t.shape.size()));
        for (auto d : t.shape) w.u32(static_cast<std::uint32_t>(d));
        w.bytes(t.payload.data(), t.payload.size());
    }
    return w.take();
}

Container parse_container(const std::vector<unsigned char>& bytes) {
    Reader r(bytes);
    const auto magic = r.take(4, "magic");
    if (std::memcmp(magic.data(), kMagic, 4) != 0) throw FormatError("bad checkpoint magic", 0);
    const std::uint32_t version = r.u32("version");
    if (version != kCheckpointVersion) {
        throw FormatError("unsupported checkpoint version " + std::to_string(version), 4);
    }
    const std::size_t meta_offset = r.offset();
    const std::uint32_t meta_len = r.u32("metadata length");
    const auto meta_bytes = r.take(meta_len, "metadata");
    Container c;
    try {
        c.metadata = nlohmann::ordered_json::parse(meta_bytes.begin(), meta_bytes.end());
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("invalid checkpoint metadata: ") + e.what(), meta_offset);
    }
    if (!c.metadata.is_object() || !c.metadata.contains("num_tensors") ||
        !c.metadata["num_tensors"].is_number_unsigned()) {
        throw FormatError("checkpoint metadata lacks num_tensors", meta_offset);
    }
    const auto count = c.metadata["num_tensors"].get<std::size_t>();
    for (std::size_t k = 0; k < count; ++k) {
        RawTensor t;
        const std::uint32_t name_len = r.u32("tensor name length");
        const auto name = r.take(name_len, "tensor name");
        t.name.assign(name.begin(), name.end());
        const std::size_t dtype_offset = r.offset();
        const std::uint8_t dtype = r.u8("dtype");
        if (dtype > 1) throw FormatError("unknown dtype tag " + std::to_string(dtype), dtype_offset);
        t.dtype = static_cast<DType>(dtype);
        const std::uint32_t rank = r.u32("rank");
        if (rank == 0 || rank > 8) throw FormatError("implausible tensor rank " + std::to_string(rank), r.offset());
        std::size_t elements = 1;
        for (std::uint32_t d = 0; d < rank; ++d) {
            const std::size_t dim = r.u32("dimension");
            if (dim == 0) throw FormatError("zero tensor dimension", r.offset());
            t.shape.push_back(dim);
            elements *= dim;
        }
        t.payload = r.take(elements * dtype_width(t.dtype), "tensor payload");
        c.tensors.push_back(std::move(t));
    }
    if (!r.done()) throw FormatError("trailing bytes after last tensor", r.offset());
    c.metadata.erase("num_tensors");
    return c;
}

void write_container(const std::filesystem::path& path, const Container& container) {
    const auto bytes = serialize_container(container);
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw InputError("cannot write checkpoint " + tmp.string());
        out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw InputError("failed writing checkpoint " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

Container read_container(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open checkpoint " + path.string());
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_container(bytes);
}

nlohmann::ordered_json config_to_json(const ModelConfig& config) {
    nlohmann::ordered_json j;
    j["hidden"] = config.hidden;
    j["embed"] = config.embed;
    j["seed"] = config.seed;
    return j;
}

ModelConfig config_from_json(const nlohmann::ordered_json& meta) {
    try {
        ModelConfig c;
        c.hidden = meta.at("hidden").get<std::size_t>();
        c.embed = meta.at("embed").get<std::size_t>();
        c.seed = meta.at("seed").get<std::uint64_t>();
        return c;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("checkpoint metadata: ") + e.what(), 0);
    }
}

template <typename T>
void save_checkpoint(const Seq2Seq<T>& model, const std::filesystem::path& path) {
    Container c;
    c.metadata["format"] = "c2sq";
    c.metadata["component"] = "full";
    c.metadata["dtype"] = dtype_of<T>() == DType::kFloat32 ? "f32" : "f64";
    c.metadata["config"] = config_to_json(model.config());
    c.metadata["source_vocab"] = model.source_vocab().tokens();
    c.metadata["target_vocab"] = model.target_vocab().tokens();
    for (const auto& [name, t] : model.named_parameters()) c.tensors.push_back(to_raw(name, *t));
    write_container(path, c);
}

template <typename T>
Seq2Seq<T> load_checkpoint(const std::filesystem::path& path, const std::optional<ModelConfig>& expected) {
    const Container c = read_container(path);
    const auto& meta = c.metadata;
    if (meta.value("component", std::string()) != "full") {
        throw FormatError("checkpoint " + path.string() + " does not hold a full translation model", 0);
    }
    const ModelConfig config = config_from_json(meta.at("config"));
    if (expected && (expected->hidden != config.hidden || expected->embed != config.embed)) {
        throw ConfigError("checkpoint " + path.string() + " has hidden=" + std::to_string(config.hidden) +
                          " embed=" + std::to_string(config.embed) + ", expected hidden=" +
                          std::to_string(expected->hidden) + " embed=" + std::to_string(expected->embed));
    }
    Vocabulary src, tgt;
    try {
        src = Vocabulary::from_tokens(meta.at("source_vocab").get<std::vector<std::string>>());
        tgt = Vocabulary::from_tokens(meta.at("target_vocab").get<std::vector<std::string>>());
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("checkpoint vocabulary: ") + e.what(), 0);
    }
    Seq2Seq<T> model(std::move(src), std::move(tgt), config);
    for (auto& [name, t] : model.named_parameters()) *t = from_raw<T>(c.find(name), t->shape());
    return model;
}

template RawTensor to_raw(const std::string&, const Tensor<float>&);
template RawTensor to_raw(const std::string&, const Tensor<double>&);
template Tensor<float> from_raw(const RawTensor&, const Shape&);
template Tensor<double> from_raw(const RawTensor&, const Shape&);
template void save_checkpoint(const Seq2Seq<float>&, const std::filesystem::path&);
template void save_checkpoint(const Seq2Seq<double>&, const std::filesystem::path&);
template Seq2Seq<float> load_checkpoint(const std::filesystem::path&, const std::optional<ModelConfig>&);
template Seq2Seq<double> load_checkpoint(const std::filesystem::path&, const std::optional<ModelConfig>&);

}  // namespace cnmt
