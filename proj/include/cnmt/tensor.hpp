#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "cnmt/errors.hpp"

namespace cnmt {

template <typename T>
using MatrixRM = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using Vector = Eigen::Matrix<T, Eigen::Dynamic, 1>;
template <typename T>
using MatMap = Eigen::Map<MatrixRM<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const MatrixRM<T>>;
template <typename T>
using VecMap = Eigen::Map<Vector<T>>;
template <typename T>
using ConstVecMap = Eigen::Map<const Vector<T>>;

using Shape = std::vector<std::size_t>;

std::string shape_to_string(const Shape& shape);

/// Dense row-major array with an optional same-shape gradient buffer.
///
/// Storage is aligned so that the vectorized kernels take the same code path
/// on every run, which keeps float training bit-reproducible.
template <typename T>
class Tensor {
public:
    using Scalar = T;
    using Storage = std::vector<T, Eigen::aligned_allocator<T>>;

    Tensor() = default;
    explicit Tensor(Shape shape, T fill = T(0));
    Tensor(Shape shape, std::initializer_list<T> values);
    Tensor(Shape shape, std::span<const T> values);

    /// Two-dimensional convenience constructor: {{1,2},{3,4}}.
    static Tensor matrix(std::initializer_list<std::initializer_list<T>> rows);

    const Shape& shape() const noexcept { return shape_; }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t size() const noexcept { return data_.size(); }
    std::size_t dim(std::size_t axis) const;
    std::size_t rows() const { return dim(0); }
    std::size_t cols() const { return rank() == 1 ? 1 : dim(1); }

    std::span<T> data() noexcept { return {data_.data(), data_.size()}; }
    std::span<const T> data() const noexcept { return {data_.data(), data_.size()}; }

    T& operator[](std::size_t i) { return data_[i]; }
    const T& operator[](std::size_t i) const { return data_[i]; }
    T& at(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
    const T& at(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }

    bool has_grad() const noexcept { return !data_.empty() && grad_.size() == data_.size(); }
    /// Allocates a zeroed gradient buffer if there is none yet.
    void enable_grad();
    void zero_grad();
    void drop_grad() { grad_.clear(); grad_.shrink_to_fit(); }
    std::span<T> grad();
    std::span<const T> grad() const;

    MatMap<T> mat();
    ConstMatMap<T> mat() const;
    MatMap<T> grad_mat();
    VecMap<T> vec() { return VecMap<T>(data_.data(), static_cast<Eigen::Index>(data_.size())); }
    ConstVecMap<T> vec() const {
        return ConstVecMap<T>(data_.data(), static_cast<Eigen::Index>(data_.size()));
    }
    VecMap<T> grad_vec();

    bool all_finite() const;
    void fill(T value);

    bool operator==(const Tensor& other) const {
        return shape_ == other.shape_ && data_ == other.data_;
    }

private:
    void require_grad() const;

    Shape shape_;
    Storage data_;
    Storage grad_;
};

std::size_t shape_product(const Shape& shape);

/// Throws DimensionError naming both shapes when they differ.
void require_same_shape(const Shape& a, const Shape& b, const char* what);

}  // namespace cnmt
