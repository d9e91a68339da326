#include "scalpnet/nn.hpp"

#include <cmath>

#include "scalpnet/error.hpp"
#include "scalpnet/rng.hpp"

namespace scalpnet {

using detail::LayerKind;
using detail::LayerPlan;

namespace {

int spatial_out(int in, int k, int stride, Padding padding, size_t layer_idx, const char* what) {
    int out;
    if (padding == Padding::valid) {
        out = (in - k) / stride + 1;
        if (in < k) out = 0;
    } else {
        out = (in + stride - 1) / stride;  // ceil(in/stride)
    }
    if (out < 1)
        throw Error(std::string(what) + " at layer " + std::to_string(layer_idx) +
                    " produces a non-positive extent (input " + std::to_string(in) + ")");
    return out;
}

}  // namespace

std::vector<LayerPlan> build_layer_plan(const ModelSpec& spec) {
    if (spec.layers.empty()) throw Error("model spec has no layers");
    if (spec.input_shape[0] < 1 || spec.input_shape[1] < 1 || spec.input_shape[2] < 1)
        throw Error("model input shape must be positive, got " +
                    std::to_string(spec.input_shape[0]) + "x" + std::to_string(spec.input_shape[1]) +
                    "x" + std::to_string(spec.input_shape[2]));

    std::vector<LayerPlan> plan;
    plan.reserve(spec.layers.size());
    // Current activation shape: spatial {H,W,C} or flattened {D}.
    std::vector<int> cur = {spec.input_shape[0], spec.input_shape[1], spec.input_shape[2]};

    for (size_t li = 0; li < spec.layers.size(); ++li) {
        LayerPlan lp{};
        lp.in_elems = 1;
        for (int e : cur) lp.in_elems *= static_cast<size_t>(e);

        const LayerSpec& ls = spec.layers[li];
        if (const auto* conv = std::get_if<Conv2DSpec>(&ls)) {
            if (cur.size() != 3)
                throw Error("conv2d at layer " + std::to_string(li) + " needs an HxWxC input");
            if (conv->filters < 1 || conv->kernel < 1 || conv->stride < 1)
                throw Error("conv2d at layer " + std::to_string(li) + " has non-positive hyperparameters");
            lp.kind = LayerKind::conv2d;
            auto& g = lp.conv;
            g.in_h = cur[0];
            g.in_w = cur[1];
            g.in_c = cur[2];
            g.kernel = conv->kernel;
            g.stride = conv->stride;
            g.filters = conv->filters;
            g.out_h = spatial_out(g.in_h, g.kernel, g.stride, conv->padding, li, "conv2d");
            g.out_w = spatial_out(g.in_w, g.kernel, g.stride, conv->padding, li, "conv2d");
            if (conv->padding == Padding::same) {
                const int pad_h = std::max((g.out_h - 1) * g.stride + g.kernel - g.in_h, 0);
                const int pad_w = std::max((g.out_w - 1) * g.stride + g.kernel - g.in_w, 0);
                g.pad_top = pad_h / 2;
                g.pad_left = pad_w / 2;
            }
            lp.w_count = static_cast<size_t>(g.kernel) * g.kernel * g.in_c * g.filters;
            lp.b_count = static_cast<size_t>(g.filters);
            cur = {g.out_h, g.out_w, g.filters};
        } else if (std::holds_alternative<ReLUSpec>(ls)) {
            lp.kind = LayerKind::relu;
        } else if (const auto* pool = std::get_if<MaxPool2DSpec>(&ls)) {
            if (cur.size() != 3)
                throw Error("maxpool2d at layer " + std::to_string(li) + " needs an HxWxC input");
            if (pool->pool < 1 || pool->stride < 1)
                throw Error("maxpool2d at layer " + std::to_string(li) + " has non-positive hyperparameters");
            lp.kind = LayerKind::maxpool2d;
            auto& g = lp.pool;
            g.in_h = cur[0];
            g.in_w = cur[1];
            g.channels = cur[2];
            g.pool = pool->pool;
            g.stride = pool->stride;
            g.out_h = spatial_out(g.in_h, g.pool, g.stride, Padding::valid, li, "maxpool2d");
            g.out_w = spatial_out(g.in_w, g.pool, g.stride, Padding::valid, li, "maxpool2d");
            cur = {g.out_h, g.out_w, g.channels};
        } else if (std::holds_alternative<FlattenSpec>(ls)) {
            lp.kind = LayerKind::flatten;
            cur = {static_cast<int>(lp.in_elems)};
        } else if (const auto* dense = std::get_if<DenseSpec>(&ls)) {
            if (cur.size() != 1)
                throw Error("dense at layer " + std::to_string(li) + " needs a flattened input");
            if (dense->units < 1)
                throw Error("dense at layer " + std::to_string(li) + " has non-positive units");
            lp.kind = LayerKind::dense;
            lp.dense.in_dim = cur[0];
            lp.dense.units = dense->units;
            lp.w_count = static_cast<size_t>(cur[0]) * dense->units;
            lp.b_count = static_cast<size_t>(dense->units);
            cur = {dense->units};
        } else {
            if (cur.size() != 1)
                throw Error("softmax at layer " + std::to_string(li) + " needs a flattened input");
            lp.kind = LayerKind::softmax;
        }

        lp.out_elems = 1;
        for (int e : cur) lp.out_elems *= static_cast<size_t>(e);
        plan.push_back(lp);
    }
    return plan;
}

std::vector<Shape> infer_shapes(const ModelSpec& spec) {
    const auto plan = build_layer_plan(spec);
    std::vector<Shape> shapes;
    shapes.reserve(plan.size());
    for (const LayerPlan& lp : plan) {
        switch (lp.kind) {
            case LayerKind::conv2d:
                shapes.push_back({static_cast<size_t>(lp.conv.out_h),
                                  static_cast<size_t>(lp.conv.out_w),
                                  static_cast<size_t>(lp.conv.filters)});
                break;
            case LayerKind::maxpool2d:
                shapes.push_back({static_cast<size_t>(lp.pool.out_h),
                                  static_cast<size_t>(lp.pool.out_w),
                                  static_cast<size_t>(lp.pool.channels)});
                break;
            case LayerKind::flatten:
            case LayerKind::dense:
            case LayerKind::softmax:
                shapes.push_back({lp.out_elems});
                break;
            case LayerKind::relu:
                shapes.push_back(shapes.empty()
                                     ? Shape{static_cast<size_t>(spec.input_shape[0]),
                                             static_cast<size_t>(spec.input_shape[1]),
                                             static_cast<size_t>(spec.input_shape[2])}
                                     : shapes.back());
                break;
        }
    }
    return shapes;
}

void validate_spec(const ModelSpec& spec) {
    if (spec.class_names.empty()) throw Error("model spec has no class names");
    build_layer_plan(spec);  // shape inference must succeed

    const size_t n = spec.layers.size();
    if (n < 2 || !std::holds_alternative<SoftmaxSpec>(spec.layers[n - 1]))
        throw Error("model spec must end with a softmax layer");
    const auto* dense = std::get_if<DenseSpec>(&spec.layers[n - 2]);
    if (!dense)
        throw Error("the softmax layer must be preceded by a dense layer");
    if (static_cast<size_t>(dense->units) != spec.class_names.size())
        throw Error("final dense layer has " + std::to_string(dense->units) + " units but " +
                    std::to_string(spec.class_names.size()) + " classes are declared");
    for (size_t i = 0; i + 1 < n; ++i)
        if (std::holds_alternative<SoftmaxSpec>(spec.layers[i]))
            throw Error("softmax is only allowed as the final layer");
}

Model init_model(const ModelSpec& spec, uint64_t seed) {
    validate_spec(spec);
    const auto plan = build_layer_plan(spec);

    Model model;
    model.spec = spec;
    model.rng_seed = seed;
    model.params.resize(plan.size());

    Xoshiro256ss rng(seed);
    for (size_t li = 0; li < plan.size(); ++li) {
        const LayerPlan& lp = plan[li];
        if (lp.w_count == 0) continue;
        size_t fan_in = 0;
        Shape w_shape, b_shape;
        if (lp.kind == LayerKind::conv2d) {
            const auto& g = lp.conv;
            fan_in = static_cast<size_t>(g.kernel) * g.kernel * g.in_c;
            w_shape = {static_cast<size_t>(g.kernel), static_cast<size_t>(g.kernel),
                       static_cast<size_t>(g.in_c), static_cast<size_t>(g.filters)};
            b_shape = {static_cast<size_t>(g.filters)};
        } else {
            fan_in = static_cast<size_t>(lp.dense.in_dim);
            w_shape = {static_cast<size_t>(lp.dense.in_dim), static_cast<size_t>(lp.dense.units)};
            b_shape = {static_cast<size_t>(lp.dense.units)};
        }
        const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
        Tensor w = Tensor::zeros(std::move(w_shape));
        for (size_t i = 0; i < w.size(); ++i)
            w[i] = static_cast<float>((2.0 * rng.next_double() - 1.0) * bound);
        model.params[li].weights = std::move(w);
        model.params[li].bias = Tensor::zeros(std::move(b_shape));
    }
    return model;
}

ModelSpec default_model_spec(int image_size, std::vector<std::string> class_names) {
    static constexpr int kBlockFilters[] = {32, 64, 64, 64, 64, 64};
    ModelSpec spec;
    spec.input_shape = {image_size, image_size, 3};
    spec.class_names = std::move(class_names);

    int extent = image_size;
    for (int filters : kBlockFilters) {
        if (extent < 4) break;  // conv then pool would drop below 1x1
        spec.layers.push_back(Conv2DSpec{filters, 3, 1, Padding::valid});
        spec.layers.push_back(ReLUSpec{});
        spec.layers.push_back(MaxPool2DSpec{2, 2});
        extent = ((extent - 3) + 1 - 2) / 2 + 1;
    }
    spec.layers.push_back(FlattenSpec{});
    spec.layers.push_back(DenseSpec{64});
    spec.layers.push_back(ReLUSpec{});
    spec.layers.push_back(DenseSpec{static_cast<int>(spec.class_names.size())});
    spec.layers.push_back(SoftmaxSpec{});
    return spec;
}

namespace {

std::vector<detail::ParamView<float>> param_views(const Model& model) {
    std::vector<detail::ParamView<float>> views(model.params.size());
    for (size_t i = 0; i < model.params.size(); ++i) {
        if (model.params[i].weights.size() > 0 && model.params[i].weights.rank() > 0) {
            views[i].w = model.params[i].weights.raw();
            views[i].b = model.params[i].bias.raw();
        }
    }
    return views;
}

}  // namespace

ForwardResult forward(const Model& model, const Tensor& batch, bool training) {
    const auto plan = build_layer_plan(model.spec);
    if (batch.rank() != 4)
        throw Error("forward expects an NxHxWxC batch, got " + shape_to_string(batch.shape()));
    const Shape expect = {batch.shape()[0], static_cast<size_t>(model.spec.input_shape[0]),
                          static_cast<size_t>(model.spec.input_shape[1]),
                          static_cast<size_t>(model.spec.input_shape[2])};
    if (batch.shape() != expect)
        throw Error("batch shape " + shape_to_string(batch.shape()) +
                    " does not match model input " + shape_to_string(expect));
    const int n = static_cast<int>(batch.shape()[0]);
    if (n < 1) throw Error("forward needs at least one sample");

    ForwardResult result;
    result.probs = Tensor::zeros({static_cast<size_t>(n), plan.back().out_elems});
    result.logits = Tensor::zeros({static_cast<size_t>(n), plan.back().out_elems});
    const auto views = param_views(model);
    detail::net_forward<float>(plan, views, batch.raw(), n, result.probs.raw(),
                               result.logits.raw(), training ? &result.cache.net : nullptr, true);
    return result;
}

Gradients backward(const Model& model, const ForwardCache& cache, const Tensor& grad_logits) {
    const auto plan = build_layer_plan(model.spec);
    if (!cache.net.training || cache.net.acts.size() != plan.size())
        throw Error("backward requires the cache of a training-mode forward pass");
    if (grad_logits.rank() != 2 ||
        grad_logits.shape()[0] != static_cast<size_t>(cache.net.n) ||
        grad_logits.shape()[1] != plan.back().out_elems)
        throw Error("grad_logits shape " + shape_to_string(grad_logits.shape()) +
                    " does not match the cached forward pass");

    Gradients grads(plan.size());
    std::vector<detail::GradView<float>> gviews(plan.size());
    for (size_t li = 0; li < plan.size(); ++li) {
        if (plan[li].w_count == 0) continue;
        grads[li].weights = Tensor::zeros(model.params[li].weights.shape());
        grads[li].bias = Tensor::zeros(model.params[li].bias.shape());
        gviews[li].w = grads[li].weights.raw();
        gviews[li].b = grads[li].bias.raw();
    }
    const auto views = param_views(model);
    detail::net_backward<float>(plan, views, cache.net, grad_logits.raw(), cache.net.n, gviews,
                                nullptr);
    return grads;
}

}  // namespace scalpnet
