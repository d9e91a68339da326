#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace scalpnet {

using Shape = std::vector<size_t>;

std::string shape_to_string(const Shape& shape);

// Dense N-dimensional array of 32-bit reals, row-major, fixed layout.
// Rank-0 tensors hold exactly one value and act as scalars in elementwise
// ops. Tensors are plain values: copy/move semantics, no views.
class Tensor {
public:
    Tensor() : data_(1, 0.0f) {}  // rank-0 zero

    static Tensor zeros(Shape shape);
    static Tensor full(Shape shape, float value);
    static Tensor scalar(float value);
    static Tensor from_data(Shape shape, std::vector<float> data);

    const Shape& shape() const { return shape_; }
    size_t rank() const { return shape_.size(); }
    size_t size() const { return data_.size(); }

    std::span<const float> data() const { return data_; }
    std::span<float> data() { return data_; }
    const float* raw() const { return data_.data(); }
    float* raw() { return data_.data(); }

    float operator[](size_t flat) const { return data_[flat]; }
    float& operator[](size_t flat) { return data_[flat]; }

    // Multi-index access, row-major.
    float at(std::initializer_list<size_t> idx) const;
    float& at(std::initializer_list<size_t> idx);

    // Same data, new shape; products must match.
    Tensor reshaped(Shape new_shape) const;

    bool all_finite() const;

private:
    Shape shape_;              // empty = rank-0
    std::vector<float> data_;  // length = product of extents
};

enum class EwOp { add, sub, mul, div };
enum class ReduceOp { sum, max, argmax };

// Pairwise op over equal shapes; a rank-0 operand broadcasts as a scalar.
// Division by a zero divisor entry is an error.
Tensor elementwise(const Tensor& a, const Tensor& b, EwOp op);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);

// Standard (m x k) * (k x n) matrix product over rank-2 tensors.
Tensor matmul(const Tensor& a, const Tensor& b);

// Rank-2 transpose; used by tests and dense backprop oracles.
Tensor transpose(const Tensor& a);

// Removes `axis` from the shape. argmax stores the lowest index on ties.
Tensor reduce(const Tensor& a, ReduceOp op, size_t axis);

}  // namespace scalpnet
