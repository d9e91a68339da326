#pragma once

// Finite-difference gradient checking at double precision. The analytic
// side runs the production layer code instantiated at double; the oracle
// side uses central differences of forward evaluations only, restarting
// from the layer under perturbation so unperturbed prefixes are not
// recomputed.

#include <algorithm>
#include <cmath>
#include <vector>

#include "scalpnet/nn.hpp"
#include "scalpnet/optim.hpp"

namespace gradcheck {

using scalpnet::detail::GradView;
using scalpnet::detail::LayerPlan;
using scalpnet::detail::NetCache;
using scalpnet::detail::ParamView;

struct DoubleNet {
    std::vector<LayerPlan> plan;
    std::vector<std::vector<double>> weights;  // per layer, empty when none
    std::vector<std::vector<double>> biases;

    explicit DoubleNet(const scalpnet::Model& model)
        : plan(scalpnet::build_layer_plan(model.spec)) {
        weights.resize(plan.size());
        biases.resize(plan.size());
        for (size_t li = 0; li < plan.size(); ++li) {
            if (plan[li].w_count == 0) continue;
            const auto w = model.params[li].weights.data();
            const auto b = model.params[li].bias.data();
            weights[li].assign(w.begin(), w.end());
            biases[li].assign(b.begin(), b.end());
        }
    }

    std::vector<ParamView<double>> views() const {
        std::vector<ParamView<double>> v(plan.size());
        for (size_t li = 0; li < plan.size(); ++li) {
            if (plan[li].w_count == 0) continue;
            v[li] = {weights[li].data(), biases[li].data()};
        }
        return v;
    }

    size_t param_count() const {
        size_t n = 0;
        for (size_t li = 0; li < plan.size(); ++li) n += weights[li].size() + biases[li].size();
        return n;
    }
};

inline double loss_of_probs(const std::vector<double>& probs, const std::vector<int>& labels,
                            size_t k) {
    double total = 0.0;
    for (size_t i = 0; i < labels.size(); ++i)
        total -= std::log(probs[i * k + static_cast<size_t>(labels[i])]);
    return total / static_cast<double>(labels.size());
}

struct CheckStats {
    double max_rel = 0.0;
    double median_rel = 0.0;
    size_t coordinates = 0;
    // Coordinates whose +-eps stencil provably crossed a maxpool/relu
    // routing boundary; central differences do not estimate the gradient
    // there, so they are excluded (and counted).
    size_t kinks_excluded = 0;
    size_t audited = 0;
};

inline double rel_err(double a, double b) {
    const double denom = std::max({std::fabs(a), std::fabs(b), 1e-8});
    return std::fabs(a - b) / denom;
}

inline CheckStats finalize(std::vector<double>& errs) {
    CheckStats stats;
    stats.coordinates = errs.size();
    if (errs.empty()) return stats;
    stats.max_rel = *std::max_element(errs.begin(), errs.end());
    auto mid = errs.begin() + errs.size() / 2;
    std::nth_element(errs.begin(), mid, errs.end());
    stats.median_rel = *mid;
    return stats;
}

// Routing signature of a forward pass: which input wins each pool window
// and which relu entries are active. Two evaluations with the same routing
// lie on the same smooth piece of the loss.
struct Routing {
    std::vector<size_t> pool_routes;
    std::vector<uint8_t> relu_gates;

    bool operator==(const Routing&) const = default;
};

inline Routing routing_from(const std::vector<LayerPlan>& plan,
                            std::span<const ParamView<double>> params, size_t start,
                            const double* act_in, int n) {
    Routing r;
    std::vector<double> bufs[2];
    const double* cur = act_in;
    for (size_t li = start; li < plan.size(); ++li) {
        const LayerPlan& lp = plan[li];
        if (lp.kind == scalpnet::detail::LayerKind::relu) {
            const size_t len = static_cast<size_t>(n) * lp.in_elems;
            for (size_t i = 0; i < len; ++i) r.relu_gates.push_back(cur[i] > 0.0 ? 1 : 0);
        }
        std::vector<double>& out = bufs[li % 2];
        out.resize(static_cast<size_t>(n) * lp.out_elems);
        std::vector<size_t> am;
        scalpnet::detail::run_layer<double>(lp, params[li], cur, out.data(), n, &am);
        if (lp.kind == scalpnet::detail::LayerKind::maxpool2d)
            r.pool_routes.insert(r.pool_routes.end(), am.begin(), am.end());
        cur = out.data();
    }
    return r;
}

// Checks every parameter of the model against central finite differences of
// the cross-entropy loss on (input, labels). Returns max/median relative
// error across all coordinates. Coordinates whose stencil changes the
// pool/relu routing (audited only when the error is noticeable) are
// excluded as kink crossings.
inline CheckStats check_model_gradients(const scalpnet::Model& model,
                                        const std::vector<double>& input, int n,
                                        const std::vector<int>& labels, double eps,
                                        double audit_threshold = 1e-3) {
    DoubleNet net(model);
    const auto views = net.views();
    const size_t k = net.plan.back().out_elems;
    const size_t out_len = static_cast<size_t>(n) * k;

    // Analytic gradients from the production backward pass (double mode).
    NetCache<double> cache;
    std::vector<double> probs(out_len), logits(out_len);
    scalpnet::detail::net_forward<double>(net.plan, views, input.data(), n, probs.data(),
                                          logits.data(), &cache, false);
    std::vector<double> grad_logits(out_len);
    scalpnet::detail::sparse_cce_logits_kernel<double>(logits.data(), labels.data(), n,
                                                       static_cast<int>(k), nullptr,
                                                       grad_logits.data());
    std::vector<std::vector<double>> gw(net.plan.size()), gb(net.plan.size());
    std::vector<GradView<double>> gviews(net.plan.size());
    for (size_t li = 0; li < net.plan.size(); ++li) {
        gw[li].assign(net.weights[li].size(), 0.0);
        gb[li].assign(net.biases[li].size(), 0.0);
        if (!gw[li].empty()) gviews[li] = {gw[li].data(), gb[li].data()};
    }
    scalpnet::detail::net_backward<double>(net.plan, views, cache, grad_logits.data(), n, gviews,
                                           nullptr);

    // Finite differences, restarting the forward pass at the perturbed layer.
    std::vector<double> errs;
    errs.reserve(net.param_count());
    std::vector<double> fd_probs(out_len);
    const auto loss_from = [&](size_t layer) {
        scalpnet::detail::net_forward_from<double>(net.plan, views, layer,
                                                   cache.acts[layer].data(), n, fd_probs.data());
        return loss_of_probs(fd_probs, labels, k);
    };

    size_t kinks = 0, audited = 0;
    for (size_t li = 0; li < net.plan.size(); ++li) {
        for (auto* vec : {&net.weights[li], &net.biases[li]}) {
            auto& analytic = vec == &net.weights[li] ? gw[li] : gb[li];
            for (size_t i = 0; i < vec->size(); ++i) {
                const double saved = (*vec)[i];
                (*vec)[i] = saved + eps;
                const double up = loss_from(li);
                (*vec)[i] = saved - eps;
                const double down = loss_from(li);
                (*vec)[i] = saved;
                const double fd = (up - down) / (2.0 * eps);
                const double err = rel_err(analytic[i], fd);

                if (err > audit_threshold) {
                    ++audited;
                    (*vec)[i] = saved + eps;
                    const Routing above =
                        routing_from(net.plan, views, li, cache.acts[li].data(), n);
                    (*vec)[i] = saved - eps;
                    const Routing below =
                        routing_from(net.plan, views, li, cache.acts[li].data(), n);
                    (*vec)[i] = saved;
                    if (!(above == below)) {
                        ++kinks;  // stencil straddles a non-differentiable point
                        continue;
                    }
                }
                errs.push_back(err);
            }
        }
    }
    CheckStats stats = finalize(errs);
    stats.kinks_excluded = kinks;
    stats.audited = audited;
    return stats;
}

// FD check of a single layer under the quadratic loss L = 0.5*sum(out^2),
// whose output gradient is the output itself. Exercises one kernel pair in
// isolation.
struct SingleLayerCheck {
    LayerPlan plan;
    std::vector<double> input;   // n * in_elems
    std::vector<double> weights;
    std::vector<double> biases;
    int n = 1;

    CheckStats run(double eps) const {
        const size_t out_len = static_cast<size_t>(n) * plan.out_elems;
        const size_t in_len = static_cast<size_t>(n) * plan.in_elems;
        std::vector<double> out(out_len);
        std::vector<size_t> argmax;

        const auto eval = [&](const std::vector<double>& w, const std::vector<double>& b,
                              const std::vector<double>& in) {
            ParamView<double> pv{w.empty() ? nullptr : w.data(), b.empty() ? nullptr : b.data()};
            std::vector<size_t> am;
            scalpnet::detail::run_layer<double>(plan, pv, in.data(), out.data(), n, &am);
            double loss = 0.0;
            for (double v : out) loss += 0.5 * v * v;
            return loss;
        };

        // Analytic gradients.
        ParamView<double> pv{weights.empty() ? nullptr : weights.data(),
                             biases.empty() ? nullptr : biases.data()};
        scalpnet::detail::run_layer<double>(plan, pv, input.data(), out.data(), n, &argmax);
        std::vector<double> gout = out;
        std::vector<double> gin(in_len, 0.0), gw(weights.size(), 0.0), gb(biases.size(), 0.0);
        switch (plan.kind) {
            case scalpnet::detail::LayerKind::conv2d:
                scalpnet::detail::conv2d_backward(input.data(), weights.data(), gout.data(),
                                                  gin.data(), gw.data(), gb.data(), n, plan.conv);
                break;
            case scalpnet::detail::LayerKind::relu:
                scalpnet::detail::relu_backward(input.data(), gout.data(), gin.data(), in_len);
                break;
            case scalpnet::detail::LayerKind::maxpool2d:
                scalpnet::detail::maxpool_backward(argmax.data(), gout.data(), gin.data(), out_len);
                break;
            case scalpnet::detail::LayerKind::flatten:
                gin = gout;
                break;
            case scalpnet::detail::LayerKind::dense:
                scalpnet::detail::dense_backward(input.data(), weights.data(), gout.data(),
                                                 gin.data(), gw.data(), gb.data(), n, plan.dense);
                break;
            case scalpnet::detail::LayerKind::softmax:
                break;  // checked through the fused loss instead
        }

        std::vector<double> errs;
        auto check_vec = [&](std::vector<double> v, const std::vector<double>& analytic,
                             bool is_weights, bool is_input) {
            for (size_t i = 0; i < v.size(); ++i) {
                const double saved = v[i];
                double up, down;
                v[i] = saved + eps;
                up = is_input ? eval(weights, biases, v)
                              : (is_weights ? eval(v, biases, input) : eval(weights, v, input));
                v[i] = saved - eps;
                down = is_input ? eval(weights, biases, v)
                                : (is_weights ? eval(v, biases, input) : eval(weights, v, input));
                v[i] = saved;
                errs.push_back(rel_err(analytic[i], (up - down) / (2.0 * eps)));
            }
        };
        check_vec(input, gin, false, true);
        if (!weights.empty()) check_vec(weights, gw, true, false);
        if (!biases.empty()) check_vec(biases, gb, false, false);
        return finalize(errs);
    }
};

}  // namespace gradcheck
