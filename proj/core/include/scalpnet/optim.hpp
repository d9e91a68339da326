#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "scalpnet/nn.hpp"
#include "scalpnet/tensor.hpp"

namespace scalpnet {

struct AdamConfig {
    float lr = 1e-3f;
    float beta1 = 0.9f;
    float beta2 = 0.999f;
    float epsilon = 1e-7f;
};

// Bias-corrected first/second moment state, mirroring the parameter shapes.
struct AdamState {
    uint64_t step_count = 0;
    std::vector<LayerParams> m;
    std::vector<LayerParams> v;
    AdamConfig hyper;
};

AdamState init_adam(const std::vector<LayerParams>& params, AdamConfig hyper);

// One Adam update: t += 1; m,v exponential moments of g and g^2; parameters
// move by lr * m_hat / (sqrt(v_hat) + eps). Mutates params and state.
void adam_step(std::vector<LayerParams>& params, const Gradients& grads, AdamState& state);

struct CceResult {
    float loss = 0.0f;
    Tensor grad_logits;  // N x K, rows (p - onehot(y)) / N
};

// Sparse categorical cross-entropy on softmax probabilities:
// loss = -(1/N) sum log p[i, y_i]. The returned gradient is w.r.t. the
// logits that produced the probabilities (fused softmax+CCE identity).
CceResult sparse_cce(const Tensor& probs, std::span<const int> labels);

struct CceLogitsResult {
    float loss = 0.0f;
    Tensor probs;
    Tensor grad_logits;
};

// The numerically stable log-space path used during training: consumes the
// pre-softmax logits directly so saturated predictions never hit log(0).
CceLogitsResult sparse_cce_from_logits(const Tensor& logits, std::span<const int> labels);

// Fraction of rows whose argmax (lowest index on ties) equals the label.
float accuracy(const Tensor& probs, std::span<const int> labels);

}  // namespace scalpnet
