#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "cnmt/seq2seq.hpp"
#include "cnmt/tensor.hpp"

// Checkpoint container layout (all integers little-endian):
//
//   "C2SQ" | u32 version | u32 metadata length | metadata (UTF-8 JSON)
//   then metadata["num_tensors"] records, each:
//   u32 name length | name | u8 dtype (0 = f32, 1 = f64) | u32 rank |
//   u32 dims[rank] | row-major payload
namespace cnmt {

inline constexpr std::uint32_t kCheckpointVersion = 1;

enum class DType : std::uint8_t { kFloat32 = 0, kFloat64 = 1 };

template <typename T>
constexpr DType dtype_of();
template <>
constexpr DType dtype_of<float>() {
    return DType::kFloat32;
}
template <>
constexpr DType dtype_of<double>() {
    return DType::kFloat64;
}

struct RawTensor {
    std::string name;
    DType dtype = DType::kFloat32;
    Shape shape;
    std::vector<unsigned char> payload;  // little-endian element bytes
};

struct Container {
    nlohmann::ordered_json metadata;
    std::vector<RawTensor> tensors;

    const RawTensor& find(const std::string& name) const;
};

template <typename T>
RawTensor to_raw(const std::string& name, const Tensor<T>& t);

/// Throws FormatError unless dtype and shape match `expected_shape`.
template <typename T>
Tensor<T> from_raw(const RawTensor& raw, const Shape& expected_shape);

/// Writes via a temporary file and rename, so readers never see a partial file.
void write_container(const std::filesystem::path& path, const Container& container);
Container read_container(const std::filesystem::path& path);
Container parse_container(const std::vector<unsigned char>& bytes);
std::vector<unsigned char> serialize_container(const Container& container);

nlohmann::ordered_json config_to_json(const ModelConfig& config);
ModelConfig config_from_json(const nlohmann::ordered_json& meta);

template <typename T>
void save_checkpoint(const Seq2Seq<T>& model, const std::filesystem::path& path);

/// When `expected` is given, a mismatch in hidden or embedding size is an
/// error.
template <typename T>
Seq2Seq<T> load_checkpoint(const std::filesystem::path& path,
                           const std::optional<ModelConfig>& expected = std::nullopt);

}  // namespace cnmt
