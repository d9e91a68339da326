#include "scalpnet/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "scalpnet/error.hpp"

namespace scalpnet {

namespace {

size_t shape_product(const Shape& shape) {
    size_t n = 1;
    for (size_t e : shape) n *= e;
    return n;
}

}  // namespace

std::string shape_to_string(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ',';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

Tensor Tensor::zeros(Shape shape) { return full(std::move(shape), 0.0f); }

Tensor Tensor::full(Shape shape, float value) {
    Tensor t;
    size_t n = shape_product(shape);
    t.shape_ = std::move(shape);
    t.data_.assign(n, value);
    return t;
}

Tensor Tensor::scalar(float value) {
    Tensor t;
    t.data_[0] = value;
    return t;
}

Tensor Tensor::from_data(Shape shape, std::vector<float> data) {
    if (data.size() != shape_product(shape))
        throw Error("tensor data length " + std::to_string(data.size()) +
                    " does not match shape " + shape_to_string(shape));
    Tensor t;
    t.shape_ = std::move(shape);
    t.data_ = std::move(data);
    return t;
}

float Tensor::at(std::initializer_list<size_t> idx) const {
    return const_cast<Tensor*>(this)->at(idx);
}

float& Tensor::at(std::initializer_list<size_t> idx) {
    if (idx.size() != shape_.size())
        throw Error("index rank " + std::to_string(idx.size()) + " does not match tensor rank " +
                    std::to_string(shape_.size()));
    size_t flat = 0;
    size_t d = 0;
    for (size_t i : idx) {
        if (i >= shape_[d])
            throw Error("index " + std::to_string(i) + " out of range for axis " +
                        std::to_string(d) + " with extent " + std::to_string(shape_[d]));
        flat = flat * shape_[d] + i;
        ++d;
    }
    return data_[flat];
}

Tensor Tensor::reshaped(Shape new_shape) const {
    if (shape_product(new_shape) != data_.size())
        throw Error("cannot reshape " + shape_to_string(shape_) + " to " +
                    shape_to_string(new_shape) + ": element count differs");
    Tensor t;
    t.shape_ = std::move(new_shape);
    t.data_ = data_;
    return t;
}

bool Tensor::all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](float v) { return std::isfinite(v); });
}

namespace {

float apply_ew(float x, float y, EwOp op) {
    switch (op) {
        case EwOp::add: return x + y;
        case EwOp::sub: return x - y;
        case EwOp::mul: return x * y;
        case EwOp::div: return x / y;
    }
    return 0.0f;
}

}  // namespace

Tensor elementwise(const Tensor& a, const Tensor& b, EwOp op) {
    const bool a_scalar = a.rank() == 0;
    const bool b_scalar = b.rank() == 0;
    if (!a_scalar && !b_scalar && a.shape() != b.shape())
        throw Error("elementwise shape mismatch: " + shape_to_string(a.shape()) + " vs " +
                    shape_to_string(b.shape()));

    if (op == EwOp::div) {
        for (float v : b.data())
            if (v == 0.0f) throw Error("elementwise division by zero divisor entry");
    }

    const Tensor& out_like = a_scalar ? b : a;
    Tensor out = Tensor::zeros(out_like.shape());
    const size_t n = out.size();
    for (size_t i = 0; i < n; ++i) {
        float x = a_scalar ? a[0] : a[i];
        float y = b_scalar ? b[0] : b[i];
        out[i] = apply_ew(x, y, op);
    }
    return out;
}

Tensor add(const Tensor& a, const Tensor& b) { return elementwise(a, b, EwOp::add); }
Tensor sub(const Tensor& a, const Tensor& b) { return elementwise(a, b, EwOp::sub); }
Tensor mul(const Tensor& a, const Tensor& b) { return elementwise(a, b, EwOp::mul); }
Tensor div(const Tensor& a, const Tensor& b) { return elementwise(a, b, EwOp::div); }

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2)
        throw Error("matmul requires rank-2 tensors, got " + shape_to_string(a.shape()) +
                    " and " + shape_to_string(b.shape()));
    const size_t m = a.shape()[0], k = a.shape()[1];
    const size_t k2 = b.shape()[0], n = b.shape()[1];
    if (k != k2)
        throw Error("matmul inner dimension mismatch: " + shape_to_string(a.shape()) + " x " +
                    shape_to_string(b.shape()));

    Tensor out = Tensor::zeros({m, n});
    const float* pa = a.raw();
    const float* pb = b.raw();
    float* po = out.raw();
    for (size_t i = 0; i < m; ++i) {
        for (size_t l = 0; l < k; ++l) {
            const float av = pa[i * k + l];
            const float* brow = pb + l * n;
            float* orow = po + i * n;
            for (size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
        }
    }
    return out;
}

Tensor transpose(const Tensor& a) {
    if (a.rank() != 2) throw Error("transpose requires a rank-2 tensor");
    const size_t m = a.shape()[0], n = a.shape()[1];
    Tensor out = Tensor::zeros({n, m});
    for (size_t i = 0; i < m; ++i)
        for (size_t j = 0; j < n; ++j) out[j * m + i] = a[i * n + j];
    return out;
}

Tensor reduce(const Tensor& a, ReduceOp op, size_t axis) {
    if (axis >= a.rank())
        throw Error("reduce axis " + std::to_string(axis) + " out of range for rank " +
                    std::to_string(a.rank()));
    const Shape& in_shape = a.shape();
    const size_t extent = in_shape[axis];
    if (extent == 0 && op != ReduceOp::sum)
        throw Error("reduce over an empty axis has no max/argmax");

    Shape out_shape;
    out_shape.reserve(in_shape.size() - 1);
    size_t outer = 1, inner = 1;
    for (size_t d = 0; d < in_shape.size(); ++d) {
        if (d < axis) outer *= in_shape[d];
        if (d > axis) inner *= in_shape[d];
        if (d != axis) out_shape.push_back(in_shape[d]);
    }

    Tensor out = Tensor::zeros(std::move(out_shape));
    for (size_t o = 0; o < outer; ++o) {
        for (size_t i = 0; i < inner; ++i) {
            const size_t base = o * extent * inner + i;
            switch (op) {
                case ReduceOp::sum: {
                    float acc = 0.0f;
                    for (size_t e = 0; e < extent; ++e) acc += a[base + e * inner];
                    out[o * inner + i] = acc;
                    break;
                }
                case ReduceOp::max: {
                    float best = a[base];
                    for (size_t e = 1; e < extent; ++e)
                        best = std::max(best, a[base + e * inner]);
                    out[o * inner + i] = best;
                    break;
                }
                case ReduceOp::argmax: {
                    float best = a[base];
                    size_t best_e = 0;
                    for (size_t e = 1; e < extent; ++e) {
                        float v = a[base + e * inner];
                        if (v > best) {  // strict: ties keep the lowest index
                            best = v;
                            best_e = e;
                        }
                    }
                    out[o * inner + i] = static_cast<float>(best_e);
                    break;
                }
            }
        }
    }
    return out;
}

}  // namespace scalpnet
