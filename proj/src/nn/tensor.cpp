#include "fstl/nn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <stdexcept>

namespace fstl {

std::size_t shape_elements(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_to_string(const Shape& shape) {
    std::string out = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(shape[i]);
    }
    return out + "]";
}

Tensor::Tensor(Shape shape, float fill) : shape_(std::move(shape)) {
    for (auto d : shape_)
        if (d == 0) throw std::invalid_argument("tensor dimensions must be positive: " + shape_to_string(shape_));
    data_.assign(shape_elements(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<float> data) : shape_(std::move(shape)), data_(std::move(data)) {
    for (auto d : shape_)
        if (d == 0) throw std::invalid_argument("tensor dimensions must be positive: " + shape_to_string(shape_));
    if (shape_elements(shape_) != data_.size())
        throw std::invalid_argument("tensor data length " + std::to_string(data_.size()) +
                                    " does not match shape " + shape_to_string(shape_));
}

std::size_t Tensor::row_size() const {
    if (shape_.empty()) return 0;
    return data_.size() / shape_[0];
}

std::span<const float> Tensor::row(std::size_t r) const {
    const auto n = row_size();
    return std::span<const float>(data_).subspan(r * n, n);
}

std::span<float> Tensor::row(std::size_t r) {
    const auto n = row_size();
    return std::span<float>(data_).subspan(r * n, n);
}

Tensor Tensor::reshaped(Shape shape) const {
    if (shape_elements(shape) != data_.size())
        throw std::invalid_argument("cannot reshape " + shape_to_string(shape_) + " to " + shape_to_string(shape));
    return Tensor(std::move(shape), data_);
}

Tensor Tensor::gather_rows(std::span<const std::size_t> indices) const {
    if (indices.empty()) throw std::invalid_argument("gather_rows needs at least one index");
    Shape out_shape = shape_;
    out_shape[0] = indices.size();
    const auto n = row_size();
    std::vector<float> out(indices.size() * n);
    for (std::size_t i = 0; i < indices.size(); ++i) {
        if (indices[i] >= rows()) throw std::out_of_range("row index out of range");
        std::copy_n(data_.begin() + static_cast<std::ptrdiff_t>(indices[i] * n), n,
                    out.begin() + static_cast<std::ptrdiff_t>(i * n));
    }
    return Tensor(std::move(out_shape), std::move(out));
}

void Tensor::fill(float v) { std::fill(data_.begin(), data_.end(), v); }

bool Tensor::all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](float v) { return std::isfinite(v); });
}

}  // namespace fstl
