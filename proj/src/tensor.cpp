#include "cnmt/tensor.hpp"

#include <algorithm>
#include <sstream>

namespace cnmt {

std::string shape_to_string(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << 'x';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

std::size_t shape_product(const Shape& shape) {
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    return n;
}

void require_same_shape(const Shape& a, const Shape& b, const char* what) {
    if (a != b) {
        throw DimensionError(std::string(what) + ": shape " + shape_to_string(a) + " vs " +
                             shape_to_string(b));
    }
}

namespace {
void check_shape(const Shape& shape) {
    for (auto d : shape) {
        if (d == 0) throw DimensionError("tensor dimensions must be positive, got " + shape_to_string(shape));
    }
}
}  // namespace

template <typename T>
Tensor<T>::Tensor(Shape shape, T fill) : shape_(std::move(shape)) {
    check_shape(shape_);
    data_.assign(shape_product(shape_), fill);
}

template <typename T>
Tensor<T>::Tensor(Shape shape, std::initializer_list<T> values)
    : Tensor(std::move(shape), std::span<const T>(values.begin(), values.size())) {}

template <typename T>
Tensor<T>::Tensor(Shape shape, std::span<const T> values) : shape_(std::move(shape)) {
    check_shape(shape_);
    if (shape_product(shape_) != values.size()) {
        throw DimensionError("tensor of shape " + shape_to_string(shape_) + " given " +
                             std::to_string(values.size()) + " values");
    }
    data_.assign(values.begin(), values.end());
}

template <typename T>
Tensor<T> Tensor<T>::matrix(std::initializer_list<std::initializer_list<T>> rows) {
    if (rows.size() == 0) throw DimensionError("empty matrix literal");
    const std::size_t cols = rows.begin()->size();
    std::vector<T> flat;
    for (const auto& r : rows) {
        if (r.size() != cols) throw DimensionError("ragged matrix literal");
        flat.insert(flat.end(), r.begin(), r.end());
    }
    return Tensor({rows.size(), cols}, std::span<const T>(flat));
}

template <typename T>
std::size_t Tensor<T>::dim(std::size_t axis) const {
    if (axis >= shape_.size()) {
        throw DimensionError("axis " + std::to_string(axis) + " out of range for shape " +
                             shape_to_string(shape_));
    }
    return shape_[axis];
}

template <typename T>
void Tensor<T>::enable_grad() {
    if (grad_.size() != data_.size()) grad_.assign(data_.size(), T(0));
}

template <typename T>
void Tensor<T>::zero_grad() {
    std::fill(grad_.begin(), grad_.end(), T(0));
}

template <typename T>
void Tensor<T>::require_grad() const {
    if (grad_.size() != data_.size()) {
        throw Error("tensor of shape " + shape_to_string(shape_) + " has no gradient buffer");
    }
}

template <typename T>
std::span<T> Tensor<T>::grad() {
    require_grad();
    return {grad_.data(), grad_.size()};
}

template <typename T>
std::span<const T> Tensor<T>::grad() const {
    require_grad();
    return {grad_.data(), grad_.size()};
}

template <typename T>
MatMap<T> Tensor<T>::mat() {
    return MatMap<T>(data_.data(), static_cast<Eigen::Index>(rows()), static_cast<Eigen::Index>(cols()));
}

template <typename T>
ConstMatMap<T> Tensor<T>::mat() const {
    return ConstMatMap<T>(data_.data(), static_cast<Eigen::Index>(rows()),
                          static_cast<Eigen::Index>(cols()));
}

template <typename T>
MatMap<T> Tensor<T>::grad_mat() {
    require_grad();
    return MatMap<T>(grad_.data(), static_cast<Eigen::Index>(rows()), static_cast<Eigen::Index>(cols()));
}

template <typename T>
VecMap<T> Tensor<T>::grad_vec() {
    require_grad();
    return VecMap<T>(grad_.data(), static_cast<Eigen::Index>(grad_.size()));
}

template <typename T>
bool Tensor<T>::all_finite() const {
    for (T v : data_) {
        if (!std::isfinite(v)) return false;
    }
    for (T v : grad_) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

template <typename T>
void Tensor<T>::fill(T value) {
    std::fill(data_.begin(), data_.end(), value);
}

template class Tensor<float>;
template class Tensor<double>;

}  // namespace cnmt
