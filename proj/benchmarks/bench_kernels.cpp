// Microbenchmarks for the hot kernels: convolution, dense products, the
// image pipeline and the optimizer update.

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "scalpnet/data.hpp"
#include "scalpnet/image.hpp"
#include "scalpnet/nn.hpp"
#include "scalpnet/optim.hpp"
#include "scalpnet/tensor.hpp"

namespace {

using namespace scalpnet;

Tensor random_tensor(Shape shape, uint32_t seed, float lo = 0.0f, float hi = 1.0f) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<float> dist(lo, hi);
    Tensor t = Tensor::zeros(std::move(shape));
    for (size_t i = 0; i < t.size(); ++i) t[i] = dist(rng);
    return t;
}

RawImage random_image(int w, int h, uint32_t seed) {
    std::mt19937 rng(seed);
    std::uniform_int_distribution<int> dist(0, 255);
    RawImage img;
    img.width = w;
    img.height = h;
    img.channels = 3;
    img.pixels.resize(static_cast<size_t>(w) * h * 3);
    for (auto& p : img.pixels) p = static_cast<uint8_t>(dist(rng));
    return img;
}

void BM_Conv2DForward(benchmark::State& state) {
    const int size = static_cast<int>(state.range(0));
    ModelSpec spec;
    spec.input_shape = {size, size, 3};
    spec.class_names = {"a", "b"};
    spec.layers = {Conv2DSpec{32, 3, 1, Padding::valid}, FlattenSpec{}, DenseSpec{2}, SoftmaxSpec{}};
    const auto plan = build_layer_plan(spec);
    const Model model = init_model(spec, 1);

    const Tensor in = random_tensor({1, size_t(size), size_t(size), 3}, 2);
    std::vector<float> out(plan[0].out_elems);
    for (auto _ : state) {
        detail::conv2d_forward<float>(in.raw(), model.params[0].weights.raw(),
                                      model.params[0].bias.raw(), out.data(), 1, plan[0].conv);
        benchmark::DoNotOptimize(out.data());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(plan[0].out_elems));
}
BENCHMARK(BM_Conv2DForward)->Arg(64)->Arg(128)->Arg(256);

void BM_Matmul(benchmark::State& state) {
    const size_t n = static_cast<size_t>(state.range(0));
    const Tensor a = random_tensor({n, n}, 3, -1.0f, 1.0f);
    const Tensor b = random_tensor({n, n}, 4, -1.0f, 1.0f);
    for (auto _ : state) {
        Tensor c = matmul(a, b);
        benchmark::DoNotOptimize(c.raw());
    }
}
BENCHMARK(BM_Matmul)->Arg(64)->Arg(256);

void BM_ResizeBilinear(benchmark::State& state) {
    const RawImage img = random_image(512, 512, 5);
    for (auto _ : state) {
        RawImage out = resize_bilinear(img, 256, 256);
        benchmark::DoNotOptimize(out.pixels.data());
    }
}
BENCHMARK(BM_ResizeBilinear);

void BM_GaussianLowpass(benchmark::State& state) {
    const Tensor t = random_tensor({256, 256, 3}, 6);
    const float sigma = static_cast<float>(state.range(0));
    for (auto _ : state) {
        Tensor out = gaussian_lowpass(t, sigma);
        benchmark::DoNotOptimize(out.raw());
    }
}
BENCHMARK(BM_GaussianLowpass)->Arg(1)->Arg(2);

void BM_EqualizeHist(benchmark::State& state) {
    const RawImage img = random_image(256, 256, 7);
    for (auto _ : state) {
        RawImage out = equalize_hist(img);
        benchmark::DoNotOptimize(out.pixels.data());
    }
}
BENCHMARK(BM_EqualizeHist);

void BM_SoftmaxCce(benchmark::State& state) {
    const Tensor logits = random_tensor({32, 1000}, 8, -5.0f, 5.0f);
    std::vector<int> labels(32);
    std::mt19937 rng(9);
    for (auto& y : labels) y = static_cast<int>(rng() % 1000);
    for (auto _ : state) {
        auto r = sparse_cce_from_logits(logits, labels);
        benchmark::DoNotOptimize(r.loss);
    }
}
BENCHMARK(BM_SoftmaxCce);

void BM_AdamStep(benchmark::State& state) {
    const size_t n = 1 << 20;
    std::vector<LayerParams> params(1);
    params[0].weights = random_tensor({n}, 10, -0.1f, 0.1f);
    params[0].bias = Tensor::zeros({1});
    Gradients grads(1);
    grads[0].weights = random_tensor({n}, 11, -0.01f, 0.01f);
    grads[0].bias = Tensor::zeros({1});
    AdamState st = init_adam(params, {});
    for (auto _ : state) {
        adam_step(params, grads, st);
        benchmark::DoNotOptimize(params[0].weights.raw());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(n));
}
BENCHMARK(BM_AdamStep);

}  // namespace

BENCHMARK_MAIN();
