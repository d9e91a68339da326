#include "scalpnet/optim.hpp"

#include <cmath>
#include <limits>

#include "scalpnet/error.hpp"

namespace scalpnet {

namespace {

void check_labels(size_t n, size_t k, std::span<const int> labels) {
    if (n == 0) throw Error("empty batch");
    if (labels.size() != n)
        throw Error("label count " + std::to_string(labels.size()) + " does not match batch size " +
                    std::to_string(n));
    for (int y : labels)
        if (y < 0 || static_cast<size_t>(y) >= k)
            throw Error("label " + std::to_string(y) + " out of range for " + std::to_string(k) +
                        " classes");
}

}  // namespace

AdamState init_adam(const std::vector<LayerParams>& params, AdamConfig hyper) {
    AdamState state;
    state.hyper = hyper;
    state.m.resize(params.size());
    state.v.resize(params.size());
    for (size_t i = 0; i < params.size(); ++i) {
        if (params[i].weights.rank() == 0) continue;
        state.m[i].weights = Tensor::zeros(params[i].weights.shape());
        state.m[i].bias = Tensor::zeros(params[i].bias.shape());
        state.v[i].weights = Tensor::zeros(params[i].weights.shape());
        state.v[i].bias = Tensor::zeros(params[i].bias.shape());
    }
    return state;
}

namespace {

void adam_update(float* theta, const float* g, float* m, float* v, size_t len,
                 const AdamConfig& h, float bc1, float bc2) {
    for (size_t i = 0; i < len; ++i) {
        if (!std::isfinite(g[i])) throw Error("non-finite gradient in adam_step");
        m[i] = h.beta1 * m[i] + (1.0f - h.beta1) * g[i];
        v[i] = h.beta2 * v[i] + (1.0f - h.beta2) * g[i] * g[i];
        const float m_hat = m[i] / bc1;
        const float v_hat = v[i] / bc2;
        theta[i] -= h.lr * m_hat / (std::sqrt(v_hat) + h.epsilon);
    }
}

}  // namespace

void adam_step(std::vector<LayerParams>& params, const Gradients& grads, AdamState& state) {
    if (grads.size() != params.size() || state.m.size() != params.size())
        throw Error("adam_step: gradient/state layout does not match parameters");

    state.step_count += 1;
    const auto t = static_cast<double>(state.step_count);
    const float bc1 = static_cast<float>(1.0 - std::pow(static_cast<double>(state.hyper.beta1), t));
    const float bc2 = static_cast<float>(1.0 - std::pow(static_cast<double>(state.hyper.beta2), t));

    for (size_t i = 0; i < params.size(); ++i) {
        if (params[i].weights.rank() == 0) continue;
        if (grads[i].weights.shape() != params[i].weights.shape() ||
            grads[i].bias.shape() != params[i].bias.shape())
            throw Error("adam_step: gradient shapes do not match parameters at layer " +
                        std::to_string(i));
        adam_update(params[i].weights.raw(), grads[i].weights.raw(), state.m[i].weights.raw(),
                    state.v[i].weights.raw(), params[i].weights.size(), state.hyper, bc1, bc2);
        adam_update(params[i].bias.raw(), grads[i].bias.raw(), state.m[i].bias.raw(),
                    state.v[i].bias.raw(), params[i].bias.size(), state.hyper, bc1, bc2);
    }
}

CceResult sparse_cce(const Tensor& probs, std::span<const int> labels) {
    if (probs.rank() != 2)
        throw Error("sparse_cce expects NxK probabilities, got " + shape_to_string(probs.shape()));
    const size_t n = probs.shape()[0];
    const size_t k = probs.shape()[1];
    check_labels(n, k, labels);

    CceResult result;
    result.grad_logits = Tensor::zeros({n, k});
    double total = 0.0;
    for (size_t i = 0; i < n; ++i) {
        const auto y = static_cast<size_t>(labels[i]);
        // Probabilities can round to exactly 0 at saturation; floor the log
        // argument at the smallest positive float to stay finite.
        const double p = std::max(static_cast<double>(probs[i * k + y]),
                                  static_cast<double>(std::numeric_limits<float>::min()));
        total -= std::log(p);
        for (size_t j = 0; j < k; ++j) {
            float g = probs[i * k + j];
            if (j == y) g -= 1.0f;
            result.grad_logits[i * k + j] = g / static_cast<float>(n);
        }
    }
    result.loss = static_cast<float>(total / static_cast<double>(n));
    return result;
}

CceLogitsResult sparse_cce_from_logits(const Tensor& logits, std::span<const int> labels) {
    if (logits.rank() != 2)
        throw Error("sparse_cce_from_logits expects NxK logits, got " +
                    shape_to_string(logits.shape()));
    const size_t n = logits.shape()[0];
    const size_t k = logits.shape()[1];
    check_labels(n, k, labels);

    CceLogitsResult result;
    result.probs = Tensor::zeros({n, k});
    result.grad_logits = Tensor::zeros({n, k});
    result.loss = detail::sparse_cce_logits_kernel<float>(
        logits.raw(), labels.data(), static_cast<int>(n), static_cast<int>(k), result.probs.raw(),
        result.grad_logits.raw());
    return result;
}

float accuracy(const Tensor& probs, std::span<const int> labels) {
    if (probs.rank() != 2)
        throw Error("accuracy expects NxK probabilities, got " + shape_to_string(probs.shape()));
    const size_t n = probs.shape()[0];
    const size_t k = probs.shape()[1];
    check_labels(n, k, labels);

    size_t correct = 0;
    for (size_t i = 0; i < n; ++i) {
        size_t best = 0;
        for (size_t j = 1; j < k; ++j)
            if (probs[i * k + j] > probs[i * k + best]) best = j;
        if (best == static_cast<size_t>(labels[i])) ++correct;
    }
    return static_cast<float>(correct) / static_cast<float>(n);
}

}  // namespace scalpnet
