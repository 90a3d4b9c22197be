#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace fstl {

using Shape = std::vector<std::size_t>;

std::size_t shape_elements(const Shape& shape);
std::string shape_to_string(const Shape& shape);

/// Dense row-major float32 tensor. The leading dimension is the batch
/// dimension whenever a tensor carries samples.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape, float fill = 0.0f);
    Tensor(Shape shape, std::vector<float> data);

    const Shape& shape() const { return shape_; }
    std::size_t size() const { return data_.size(); }
    std::size_t rank() const { return shape_.size(); }
    std::size_t dim(std::size_t i) const { return shape_.at(i); }
    bool empty() const { return data_.empty(); }

    /// Elements per leading-dimension row.
    std::size_t row_size() const;
    std::size_t rows() const { return shape_.empty() ? 0 : shape_[0]; }

    std::span<float> values() { return data_; }
    std::span<const float> values() const { return data_; }
    float* data() { return data_.data(); }
    const float* data() const { return data_.data(); }

    float& operator[](std::size_t i) { return data_[i]; }
    float operator[](std::size_t i) const { return data_[i]; }

    std::span<const float> row(std::size_t r) const;
    std::span<float> row(std::size_t r);

    /// Same data, new shape with equal element count.
    Tensor reshaped(Shape shape) const;

    /// Copy of the rows listed in `indices`, in that order.
    Tensor gather_rows(std::span<const std::size_t> indices) const;

    void fill(float v);
    bool all_finite() const;

    friend bool operator==(const Tensor&, const Tensor&) = default;

private:
    Shape shape_;
    std::vector<float> data_;
};

}  // namespace fstl
