#include <doctest.h>

#include <random>

#include "../support/testutil.hpp"
#include "scalpnet/error.hpp"
#include "scalpnet/model_io.hpp"
#include "scalpnet/nn.hpp"

using namespace scalpnet;

namespace {

Model small_model(uint64_t seed = 17) {
    ModelSpec spec;
    spec.input_shape = {8, 8, 3};
    spec.layers = {Conv2DSpec{4, 3, 1, Padding::valid}, ReLUSpec{}, MaxPool2DSpec{2, 2},
                   FlattenSpec{}, DenseSpec{8}, ReLUSpec{}, DenseSpec{2}, SoftmaxSpec{}};
    spec.class_names = {"alopecia_areata", "head_lice"};
    return init_model(spec, seed);
}

Tensor random_batch(uint32_t seed) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<float> dist(0.0f, 1.0f);
    Tensor t = Tensor::zeros({2, 8, 8, 3});
    for (size_t i = 0; i < t.size(); ++i) t[i] = dist(rng);
    return t;
}

}  // namespace

TEST_CASE("save and load round-trip the model exactly") {
    testutil::TempDir dir;
    const Model model = small_model();
    const auto path = dir.path() / "model.scnn";
    save_model(model, path);
    const Model loaded = load_model(path);

    CHECK(loaded.rng_seed == model.rng_seed);
    CHECK(loaded.spec.class_names == model.spec.class_names);
    CHECK(loaded.spec.input_shape == model.spec.input_shape);
    REQUIRE(loaded.spec.layers.size() == model.spec.layers.size());
    REQUIRE(loaded.params.size() == model.params.size());
    for (size_t li = 0; li < model.params.size(); ++li) {
        const auto& a = model.params[li];
        const auto& b = loaded.params[li];
        REQUIRE(a.weights.shape() == b.weights.shape());
        for (size_t i = 0; i < a.weights.size(); ++i) CHECK(a.weights[i] == b.weights[i]);
        for (size_t i = 0; i < a.bias.size(); ++i) CHECK(a.bias[i] == b.bias[i]);
    }

    const Tensor batch = random_batch(1);
    const auto before = forward(model, batch, false);
    const auto after = forward(loaded, batch, false);
    for (size_t i = 0; i < before.probs.size(); ++i) CHECK(before.probs[i] == after.probs[i]);
}

TEST_CASE("corruption in the weights region trips the checksum") {
    testutil::TempDir dir;
    const Model model = small_model();
    const auto path = dir.path() / "model.scnn";
    save_model(model, path);

    auto bytes = testutil::read_file(path);
    const size_t header_end = 12 + (bytes[8] | bytes[9] << 8 | bytes[10] << 16 | bytes[11] << 24);
    const size_t weights_mid = header_end + (bytes.size() - 4 - header_end) / 2;
    bytes[weights_mid] ^= 0x40;
    const auto corrupted = dir.path() / "corrupted.scnn";
    testutil::write_file(corrupted, bytes);

    CHECK_THROWS_WITH_AS(load_model(corrupted),
                         doctest::Contains("checksum"), Error);
}

TEST_CASE("wrong magic and truncation are rejected cleanly") {
    testutil::TempDir dir;
    const Model model = small_model();
    const auto path = dir.path() / "model.scnn";
    save_model(model, path);
    auto bytes = testutil::read_file(path);

    auto bad_magic = bytes;
    bad_magic[0] = 'X';
    testutil::write_file(dir.path() / "bad_magic.scnn", bad_magic);
    CHECK_THROWS_WITH_AS(load_model(dir.path() / "bad_magic.scnn"),
                         doctest::Contains("magic"), Error);

    std::vector<uint8_t> truncated(bytes.begin(), bytes.begin() + bytes.size() / 2);
    testutil::write_file(dir.path() / "truncated.scnn", truncated);
    CHECK_THROWS_AS(load_model(dir.path() / "truncated.scnn"), Error);

    auto bad_version = bytes;
    bad_version[4] = 9;
    testutil::write_file(dir.path() / "bad_version.scnn", bad_version);
    CHECK_THROWS_AS(load_model(dir.path() / "bad_version.scnn"), Error);

    auto trailing = bytes;
    trailing.push_back(0x00);
    testutil::write_file(dir.path() / "trailing.scnn", trailing);
    CHECK_THROWS_AS(load_model(dir.path() / "trailing.scnn"), Error);

    CHECK_THROWS_AS(load_model(dir.path() / "missing.scnn"), Error);
}

TEST_CASE("model spec json round-trips every layer kind") {
    ModelSpec spec;
    spec.input_shape = {32, 32, 3};
    spec.layers = {Conv2DSpec{16, 5, 2, Padding::same},
                   ReLUSpec{},
                   MaxPool2DSpec{3, 3},
                   Conv2DSpec{8, 3, 1, Padding::valid},
                   FlattenSpec{},
                   DenseSpec{10},
                   ReLUSpec{},
                   DenseSpec{4},
                   SoftmaxSpec{}};
    spec.class_names = {"a", "b", "c", "d"};

    uint64_t seed = 0;
    const ModelSpec back = model_spec_from_json(model_spec_to_json(spec, 99), &seed);
    CHECK(seed == 99);
    CHECK(back.input_shape == spec.input_shape);
    CHECK(back.class_names == spec.class_names);
    REQUIRE(back.layers.size() == spec.layers.size());

    const auto* conv = std::get_if<Conv2DSpec>(&back.layers[0]);
    REQUIRE(conv != nullptr);
    CHECK(conv->filters == 16);
    CHECK(conv->kernel == 5);
    CHECK(conv->stride == 2);
    CHECK(conv->padding == Padding::same);
    const auto* pool = std::get_if<MaxPool2DSpec>(&back.layers[2]);
    REQUIRE(pool != nullptr);
    CHECK(pool->pool == 3);

    CHECK_THROWS_AS(model_spec_from_json("{not json"), Error);
    CHECK_THROWS_AS(model_spec_from_json(R"({"layers":[{"type":"dropout"}]})"), Error);
}

TEST_CASE("layer stacks without spatial layers also persist") {
    testutil::TempDir dir;
    ModelSpec spec;
    spec.input_shape = {2, 2, 3};
    spec.layers = {FlattenSpec{}, DenseSpec{3}, SoftmaxSpec{}};
    spec.class_names = {"a", "b", "c"};
    const Model model = init_model(spec, 5);
    save_model(model, dir.path() / "dense.scnn");
    const Model loaded = load_model(dir.path() / "dense.scnn");
    for (size_t i = 0; i < model.params[1].weights.size(); ++i)
        CHECK(loaded.params[1].weights[i] == model.params[1].weights[i]);
}
