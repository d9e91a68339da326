#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "scalpnet/detail/net_impl.hpp"
#include "scalpnet/tensor.hpp"

namespace scalpnet {

enum class Padding { valid, same };

struct Conv2DSpec {
    int filters = 1;
    int kernel = 3;  // k x k
    int stride = 1;
    Padding padding = Padding::valid;
};
struct ReLUSpec {};
struct MaxPool2DSpec {
    int pool = 2;  // p x p
    int stride = 2;
};
struct FlattenSpec {};
struct DenseSpec {
    int units = 1;
};
struct SoftmaxSpec {};

using LayerSpec = std::variant<Conv2DSpec, ReLUSpec, MaxPool2DSpec, FlattenSpec, DenseSpec, SoftmaxSpec>;

// Declarative sequential layer stack. The final layer must be Softmax,
// preceded by Dense{units = |class_names|}.
struct ModelSpec {
    std::array<int, 3> input_shape = {0, 0, 0};  // H, W, C
    std::vector<LayerSpec> layers;
    std::vector<std::string> class_names;
};

// Weight/bias pair; empty tensors for parameterless layers. Also reused for
// gradients and optimizer moments, which mirror parameter shapes.
struct LayerParams {
    Tensor weights;
    Tensor bias;
};

using Gradients = std::vector<LayerParams>;

struct Model {
    ModelSpec spec;
    std::vector<LayerParams> params;  // aligned with spec.layers
    uint64_t rng_seed = 0;
};

// Activation record produced by a training-mode forward pass.
struct ForwardCache {
    detail::NetCache<float> net;
};

struct ForwardResult {
    Tensor probs;   // N x n_classes
    Tensor logits;  // N x n_classes, input of the final softmax layer
    ForwardCache cache;
};

// Per-layer output shapes (batch dimension excluded). Throws on any
// non-positive inferred extent.
std::vector<Shape> infer_shapes(const ModelSpec& spec);

// Shape inference plus the structural rules: non-empty class list and a
// trailing Dense{n_classes} + Softmax pair.
void validate_spec(const ModelSpec& spec);

// Resolved per-layer geometry; shared with the double-precision check mode.
std::vector<detail::LayerPlan> build_layer_plan(const ModelSpec& spec);

// He-uniform initialization, weights ~ U(-b, b) with b = sqrt(6/fan_in),
// biases zero. Deterministic for a fixed seed.
Model init_model(const ModelSpec& spec, uint64_t seed);

// The default architecture for a square input: 3x3 valid convolutions with
// filter counts {32,64,64,64,64,64}, each followed by ReLU and 2x2/2
// max-pooling, applied while the spatial extent stays >= 4 (so every block
// keeps at least a 2x2 map); then Flatten, Dense(64), ReLU, Dense(K),
// Softmax. At 256 this yields all six blocks.
ModelSpec default_model_spec(int image_size, std::vector<std::string> class_names);

// Applies the layers in order. training=true retains the activation record
// backward() needs; training=false returns an empty cache.
ForwardResult forward(const Model& model, const Tensor& batch, bool training);

// Backpropagates the loss gradient w.r.t. the logits (as produced by
// sparse_cce) through the stack; returns gradients shaped like the
// parameters.
Gradients backward(const Model& model, const ForwardCache& cache, const Tensor& grad_logits);

}  // namespace scalpnet
